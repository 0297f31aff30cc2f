#include "dsv/codec.hpp"

namespace dsv {

namespace {

void check_divisible(int t, int h, int w, int patch_t, int patch_s) {
    require(patch_t >= 1 && patch_s >= 1, "codec: patch sizes must be >= 1");
    require(t % patch_t == 0, "codec: frame count not divisible by temporal patch");
    require(h % patch_s == 0 && w % patch_s == 0,
            "codec: image size not divisible by spatial patch");
}

}  // namespace

LatentGrid codec_encode(const Video& clip, int patch_t, int patch_s, LatentTag tag) {
    check_divisible(clip.frames, clip.height, clip.width, patch_t, patch_s);
    const int lt = clip.frames / patch_t;
    const int lh = clip.height / patch_s;
    const int lw = clip.width / patch_s;
    const int c_in = clip.channels;
    const int d = c_in * patch_t * patch_s * patch_s;

    LatentGrid grid(lt, lh, lw, d, tag);
    for (int tt = 0; tt < lt; ++tt)
        for (int yy = 0; yy < lh; ++yy)
            for (int xx = 0; xx < lw; ++xx) {
                double* cell = grid.values.data() +
                               ((static_cast<size_t>(tt) * lh + yy) * lw + xx) * d;
                for (int dt = 0; dt < patch_t; ++dt)
                    for (int dy = 0; dy < patch_s; ++dy)
                        for (int dx = 0; dx < patch_s; ++dx)
                            for (int c = 0; c < c_in; ++c) {
                                const int ch = ((dt * patch_s + dy) * patch_s + dx) * c_in + c;
                                cell[ch] = clip.at(tt * patch_t + dt, yy * patch_s + dy,
                                                   xx * patch_s + dx, c);
                            }
            }
    return grid;
}

Video codec_decode(const LatentGrid& grid, int patch_t, int patch_s) {
    const int per_cell = patch_t * patch_s * patch_s;
    require(grid.channels % per_cell == 0, "codec: channel count incompatible with patches");
    const int c_out = grid.channels / per_cell;

    Video clip(grid.frames * patch_t, grid.height * patch_s, grid.width * patch_s, c_out);
    for (int tt = 0; tt < grid.frames; ++tt)
        for (int yy = 0; yy < grid.height; ++yy)
            for (int xx = 0; xx < grid.width; ++xx) {
                const double* cell = grid.values.data() +
                                     ((static_cast<size_t>(tt) * grid.height + yy) * grid.width +
                                      xx) *
                                         grid.channels;
                for (int dt = 0; dt < patch_t; ++dt)
                    for (int dy = 0; dy < patch_s; ++dy)
                        for (int dx = 0; dx < patch_s; ++dx)
                            for (int c = 0; c < c_out; ++c) {
                                const int ch = ((dt * patch_s + dy) * patch_s + dx) * c_out + c;
                                clip.at(tt * patch_t + dt, yy * patch_s + dy,
                                        xx * patch_s + dx, c) = static_cast<float>(cell[ch]);
                            }
            }
    return clip;
}

}  // namespace dsv
