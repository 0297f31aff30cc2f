#ifndef DSV_CODEC_HPP
#define DSV_CODEC_HPP

#include <cstdint>
#include <vector>

#include "dsv/error.hpp"
#include "dsv/video.hpp"

namespace dsv {

enum class LatentTag : uint8_t { video = 0, camera = 1, trajectory = 2 };

// T^ x H^ x W^ x d grid; video latents, camera encodings, and trajectory
// encodings all live here.
struct LatentGrid {
    int frames = 0, height = 0, width = 0, channels = 0;
    std::vector<double> values;
    LatentTag tag = LatentTag::video;

    LatentGrid() = default;
    LatentGrid(int t, int h, int w, int c, LatentTag tg = LatentTag::video)
        : frames(t),
          height(h),
          width(w),
          channels(c),
          values(static_cast<size_t>(t) * h * w * c, 0.0),
          tag(tg) {}

    size_t numel() const { return values.size(); }
    double* token(int flat) { return values.data() + static_cast<size_t>(flat) * channels; }
    const double* token(int flat) const {
        return values.data() + static_cast<size_t>(flat) * channels;
    }
    int tokens() const { return frames * height * width; }

    bool same_shape(const LatentGrid& o) const {
        return frames == o.frames && height == o.height && width == o.width &&
               channels == o.channels;
    }
};

// Invertible space-time-to-depth rearrangement standing in for a learned
// codec: clip dims divide by (p_t, p_s, p_s) into d = C * p_t * p_s^2
// channels. Pure index permutation, so decode(encode(x)) == x bit-exactly.
LatentGrid codec_encode(const Video& clip, int patch_t, int patch_s,
                        LatentTag tag = LatentTag::video);
Video codec_decode(const LatentGrid& grid, int patch_t, int patch_s);

}  // namespace dsv

#endif
