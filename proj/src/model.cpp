#include "dsv/model.hpp"

#include <cmath>

namespace dsv {

namespace {

constexpr double kRmsEps = 1e-8;
constexpr double kRopeBase = 100.0;
constexpr int kTimeFeat = 16;

double silu(double x) { return x / (1.0 + std::exp(-x)); }
double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// Temporal conv output length for kernel 3, padding 1.
int conv_out_len(int len, int stride) { return (len - 1) / stride + 1; }

void time_features(double t, double* out) {
    for (int i = 0; i < kTimeFeat / 2; ++i) {
        const double omega = std::pow(1000.0, static_cast<double>(i) / (kTimeFeat / 2 - 1));
        out[2 * i] = std::sin(omega * t);
        out[2 * i + 1] = std::cos(omega * t);
    }
}

struct RopeSplit {
    int pairs_t, pairs_h, pairs_w;
};

RopeSplit rope_split(int head_dim) {
    const int pairs = head_dim / 2;
    const int spatial = std::max(1, pairs / 3);
    return {pairs - 2 * spatial, spatial, spatial};
}

void init_normal(Tensor& t, Rng& rng, double scale) {
    for (double& v : t.data) v = rng.normal() * scale;
}

struct TrajStrides {
    int s1, s2;
};

TrajStrides traj_strides(int patch_t) {
    if (patch_t == 4) return {2, 2};
    if (patch_t == 2) return {2, 1};
    return {1, 1};
}

// out[t_out][cells][c_out] = conv1d_k3(in, stride), zero padding 1, plus bias.
void temporal_conv_forward(const std::vector<double>& in, int t_in, int cells, int c_in,
                           const Tensor& w, const Tensor& b, int stride,
                           std::vector<double>& out, int* t_out_ptr) {
    const int c_out = static_cast<int>(w.shape[0]);
    const int t_out = conv_out_len(t_in, stride);
    out.assign(static_cast<size_t>(t_out) * cells * c_out, 0.0);
    for (int to = 0; to < t_out; ++to) {
        double* dst = out.data() + static_cast<size_t>(to) * cells * c_out;
        for (int cell = 0; cell < cells; ++cell) {
            double* y = dst + static_cast<size_t>(cell) * c_out;
            for (int co = 0; co < c_out; ++co) y[co] = b.ptr()[co];
        }
        for (int k = 0; k < 3; ++k) {
            const int ti = to * stride + k - 1;
            if (ti < 0 || ti >= t_in) continue;
            const double* src = in.data() + static_cast<size_t>(ti) * cells * c_in;
            for (int cell = 0; cell < cells; ++cell) {
                const double* x = src + static_cast<size_t>(cell) * c_in;
                double* y = dst + static_cast<size_t>(cell) * c_out;
                for (int co = 0; co < c_out; ++co) {
                    const double* wr = w.ptr() + static_cast<size_t>(co) * c_in * 3;
                    double acc = 0.0;
                    for (int ci = 0; ci < c_in; ++ci) acc += wr[ci * 3 + k] * x[ci];
                    y[co] += acc;
                }
            }
        }
    }
    *t_out_ptr = t_out;
}

void temporal_conv_backward(const std::vector<double>& in, int t_in, int cells, int c_in,
                            const Tensor& w, int stride, const std::vector<double>& dout,
                            int t_out, Tensor& dw, Tensor& db, std::vector<double>* din) {
    const int c_out = static_cast<int>(w.shape[0]);
    if (din) din->assign(static_cast<size_t>(t_in) * cells * c_in, 0.0);
    for (int to = 0; to < t_out; ++to) {
        const double* dy_t = dout.data() + static_cast<size_t>(to) * cells * c_out;
        for (int cell = 0; cell < cells; ++cell) {
            const double* dy = dy_t + static_cast<size_t>(cell) * c_out;
            for (int co = 0; co < c_out; ++co) db.ptr()[co] += dy[co];
        }
        for (int k = 0; k < 3; ++k) {
            const int ti = to * stride + k - 1;
            if (ti < 0 || ti >= t_in) continue;
            const double* x_t = in.data() + static_cast<size_t>(ti) * cells * c_in;
            double* dx_t = din ? din->data() + static_cast<size_t>(ti) * cells * c_in : nullptr;
            for (int cell = 0; cell < cells; ++cell) {
                const double* x = x_t + static_cast<size_t>(cell) * c_in;
                const double* dy = dy_t + static_cast<size_t>(cell) * c_out;
                double* dx = dx_t ? dx_t + static_cast<size_t>(cell) * c_in : nullptr;
                for (int co = 0; co < c_out; ++co) {
                    const double g = dy[co];
                    if (g == 0.0) continue;
                    double* dwr = dw.ptr() + static_cast<size_t>(co) * c_in * 3;
                    const double* wr = w.ptr() + static_cast<size_t>(co) * c_in * 3;
                    for (int ci = 0; ci < c_in; ++ci) {
                        dwr[ci * 3 + k] += g * x[ci];
                        if (dx) dx[ci] += g * wr[ci * 3 + k];
                    }
                }
            }
        }
    }
}

// LayerNorm without affine params over the last dim.
void layer_norm(const double* x, int n, int d, std::vector<double>& y,
                std::vector<double>& inv_std) {
    y.assign(static_cast<size_t>(n) * d, 0.0);
    inv_std.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<size_t>(i) * d;
        double mu = 0.0;
        for (int c = 0; c < d; ++c) mu += xi[c];
        mu /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) var += (xi[c] - mu) * (xi[c] - mu);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + 1e-8);
        inv_std[i] = inv;
        double* yi = y.data() + static_cast<size_t>(i) * d;
        for (int c = 0; c < d; ++c) yi[c] = (xi[c] - mu) * inv;
    }
}

void layer_norm_backward(const double* dy, const double* y, const double* inv_std, int n,
                         int d, double* dx) {
    for (int i = 0; i < n; ++i) {
        const double* dyi = dy + static_cast<size_t>(i) * d;
        const double* yi = y + static_cast<size_t>(i) * d;
        double mean_dy = 0.0, mean_dyy = 0.0;
        for (int c = 0; c < d; ++c) {
            mean_dy += dyi[c];
            mean_dyy += dyi[c] * yi[c];
        }
        mean_dy /= d;
        mean_dyy /= d;
        double* dxi = dx + static_cast<size_t>(i) * d;
        for (int c = 0; c < d; ++c)
            dxi[c] = inv_std[i] * (dyi[c] - mean_dy - yi[c] * mean_dyy);
    }
}

}  // namespace

void ModelConfig::validate() const {
    require(hidden % heads == 0, "model: hidden width must divide by head count");
    require(head_dim() % 2 == 0, "model: head dim must be even");
    require(frames % patch_t == 0, "model: patch_t must divide frames");
    require(height % patch_s == 0 && width % patch_s == 0,
            "model: patch_s must divide height and width");
    require(patch_t == 1 || patch_t == 2 || patch_t == 4,
            "model: temporal patch must be 1, 2 or 4");
    require(d_trk > 0 && d_trk % 2 == 0, "model: d_trk must be even");
    require(blocks >= 1, "model: at least one block");
    require(label_vocab >= 1, "model: empty label vocabulary");
}

// ---------------------------------------------------------------------------
// Camera encoding: warp + codec, no learned parameters.
// ---------------------------------------------------------------------------

LatentGrid encode_camera(const ConditionBundle& bundle, const DepthMap& depth0,
                         const ModelConfig& cfg) {
    require(static_cast<int>(bundle.path.poses.size()) == cfg.frames,
            "encode_camera: camera path must cover every frame");
    Video warped(cfg.frames, cfg.height, cfg.width, 4);
    for (int t = 0; t < cfg.frames; ++t) {
        const WarpResult w = warp_first_frame(bundle.first_frame, depth0,
                                              bundle.path.intrinsics, bundle.path.poses[t]);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x) {
                for (int c = 0; c < 3; ++c) warped.at(t, y, x, c) = w.image.at(y, x, c);
                warped.at(t, y, x, 3) =
                    w.valid[static_cast<size_t>(y) * cfg.width + x] ? 1.0f : 0.0f;
            }
    }
    return codec_encode(warped, cfg.patch_t, cfg.patch_s, LatentTag::camera);
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

DualStreamModel::DualStreamModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int D = cfg_.hidden;
    const int dv = cfg_.d_video();
    const int dc = cfg_.d_camera();
    const int ffn = D * cfg_.mlp_ratio;

    embed_w = P({D, dv});
    embed_b = P({D});
    head_w = P({dv, D});
    head_b = P({dv});
    final_mod_w = P({2 * D, D});
    final_mod_b = P({2 * D});
    skip_w = P({dv, D});
    skip_b = P({dv});
    time_w1 = P({D, kTimeFeat});
    time_b1 = P({D});
    time_w2 = P({D, D});
    time_b2 = P({D});
    label_table = P({cfg_.label_vocab + 1, D});

    trk_conv1_w = P({cfg_.trk_hidden, cfg_.d_trk, 3});
    trk_conv1_b = P({cfg_.trk_hidden});
    trk_gain = P({cfg_.trk_hidden});
    trk_conv2_w = P({dv, cfg_.trk_hidden, 3});
    trk_conv2_b = P({dv});

    blocks_.resize(cfg_.blocks);
    for (auto& b : blocks_) {
        b.inject_cam = P({D, dc});
        b.inject_trk = P({D, dv});
        b.mod_w = P({6 * D, D});
        b.mod_b = P({6 * D});
        b.wq = P({D, D});
        b.bq = P({D});
        b.wk = P({D, D});
        b.bk = P({D});
        b.wv = P({D, D});
        b.bv = P({D});
        b.wo = P({D, D});
        b.bo = P({D});
        b.mlp_w1 = P({ffn, D});
        b.mlp_b1 = P({ffn});
        b.mlp_w2 = P({D, ffn});
        b.mlp_b2 = P({D});
    }

    init_params(init_seed);
    register_params();
}

void DualStreamModel::init_params(uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0xd5a15ee1ULL));
    const int D = cfg_.hidden;
    const int ffn = D * cfg_.mlp_ratio;

    init_normal(embed_w.value, rng, 1.0 / std::sqrt(double(cfg_.d_video())));
    init_normal(time_w1.value, rng, 1.0 / std::sqrt(double(kTimeFeat)));
    init_normal(time_w2.value, rng, 1.0 / std::sqrt(double(D)));
    init_normal(label_table.value, rng, 0.02);
    init_normal(trk_conv1_w.value, rng, 1.0 / std::sqrt(3.0 * cfg_.d_trk));
    trk_gain.value.fill(1.0);
    // head, trk_conv2, injections and every modulation projection stay zero:
    // conditioning and modulation start as exact no-ops on the backbone.

    for (auto& b : blocks_) {
        init_normal(b.wq.value, rng, 1.0 / std::sqrt(double(D)));
        init_normal(b.wk.value, rng, 1.0 / std::sqrt(double(D)));
        init_normal(b.wv.value, rng, 1.0 / std::sqrt(double(D)));
        init_normal(b.wo.value, rng, 1.0 / std::sqrt(double(D)));
        init_normal(b.mlp_w1.value, rng, 1.0 / std::sqrt(double(D)));
        init_normal(b.mlp_w2.value, rng, 1.0 / std::sqrt(double(ffn)));
    }
}

void DualStreamModel::register_params() {
    registry_.clear();
    // The flag marks the restricted trainable subset (encoders, injections,
    // self-attention); with train_all it is ignored.
    auto add = [&](const std::string& name, P& p, bool subset) {
        registry_.push_back({name, &p.value, &p.grad, subset});
    };
    add("embed.w", embed_w, false);
    add("embed.b", embed_b, false);
    add("head.w", head_w, false);
    add("head.b", head_b, false);
    add("final_mod.w", final_mod_w, false);
    add("final_mod.b", final_mod_b, false);
    add("skip.w", skip_w, false);
    add("skip.b", skip_b, false);
    add("time.w1", time_w1, false);
    add("time.b1", time_b1, false);
    add("time.w2", time_w2, false);
    add("time.b2", time_b2, false);
    add("label.table", label_table, false);
    add("trk_enc.conv1.w", trk_conv1_w, true);
    add("trk_enc.conv1.b", trk_conv1_b, true);
    add("trk_enc.gain", trk_gain, true);
    add("trk_enc.conv2.w", trk_conv2_w, true);
    add("trk_enc.conv2.b", trk_conv2_b, true);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        add(p + "inject_cam", blocks_[i].inject_cam, true);
        add(p + "inject_trk", blocks_[i].inject_trk, true);
        add(p + "mod.w", blocks_[i].mod_w, false);
        add(p + "mod.b", blocks_[i].mod_b, false);
        add(p + "attn.wq", blocks_[i].wq, true);
        add(p + "attn.bq", blocks_[i].bq, true);
        add(p + "attn.wk", blocks_[i].wk, true);
        add(p + "attn.bk", blocks_[i].bk, true);
        add(p + "attn.wv", blocks_[i].wv, true);
        add(p + "attn.bv", blocks_[i].bv, true);
        add(p + "attn.wo", blocks_[i].wo, true);
        add(p + "attn.bo", blocks_[i].bo, true);
        add(p + "mlp.w1", blocks_[i].mlp_w1, false);
        add(p + "mlp.b1", blocks_[i].mlp_b1, false);
        add(p + "mlp.w2", blocks_[i].mlp_w2, false);
        add(p + "mlp.b2", blocks_[i].mlp_b2, false);
    }
}

std::vector<DualStreamModel::ParamRef> DualStreamModel::params() {
    std::vector<ParamRef> out = registry_;
    if (cfg_.train_all) {
        for (auto& p : out) p.trainable = true;
    }
    return out;
}

void DualStreamModel::zero_grads() {
    for (auto& p : registry_) p.grad->fill(0.0);
}

int64_t DualStreamModel::param_count() const {
    int64_t n = 0;
    for (const auto& p : registry_) n += p.value->numel();
    return n;
}

Tensor* DualStreamModel::find_param(const std::string& name) {
    for (auto& p : registry_)
        if (p.name == name) return p.value;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Trajectory encoder
// ---------------------------------------------------------------------------

struct DualStreamModel::TrajEncoderCache {
    bool used = false;
    int t_in = 0, cells = 0, t_mid = 0, t_out = 0;
    std::vector<double> pooled;   // [t_in][cells][d_trk]
    std::vector<double> u1;       // conv1 out [t_mid][cells][mid]
    std::vector<double> rms_inv;  // [t_mid][cells]
    std::vector<double> y_norm;   // pre-gain normalized
    std::vector<double> z_act;    // post-gain, pre-SiLU
    std::vector<double> a_act;    // post-SiLU
};

namespace {

void traj_encoder_forward(const ModelConfig& cfg, const Tensor& conv1_w, const Tensor& conv1_b,
                          const Tensor& gain, const Tensor& conv2_w, const Tensor& conv2_b,
                          const TrajectoryMap& map, DualStreamModel::TrajEncoderCache* cache,
                          LatentGrid* out) {
    require(map.frames == cfg.frames && map.height == cfg.height && map.width == cfg.width &&
                map.dim == cfg.d_trk,
            "encode_trajectory: map dims do not match the configured video shape");

    const int lh = cfg.latent_height(), lw = cfg.latent_width();
    const int cells = lh * lw;
    const int ps = cfg.patch_s;
    const int mid = cfg.trk_hidden;
    const int dv = cfg.d_video();
    const auto strides = traj_strides(cfg.patch_t);

    // Non-learned spatial reduction: p_s x p_s average pooling.
    std::vector<double> pooled(static_cast<size_t>(cfg.frames) * cells * cfg.d_trk, 0.0);
    const double inv_area = 1.0 / (ps * ps);
    for (int t = 0; t < cfg.frames; ++t)
        for (int yy = 0; yy < lh; ++yy)
            for (int xx = 0; xx < lw; ++xx) {
                double* dst = pooled.data() +
                              (static_cast<size_t>(t) * cells + yy * lw + xx) * cfg.d_trk;
                for (int dy = 0; dy < ps; ++dy)
                    for (int dx = 0; dx < ps; ++dx) {
                        const double* src = map.cell(t, yy * ps + dy, xx * ps + dx);
                        for (int c = 0; c < cfg.d_trk; ++c) dst[c] += src[c] * inv_area;
                    }
            }

    std::vector<double> u1;
    int t_mid = 0;
    temporal_conv_forward(pooled, cfg.frames, cells, cfg.d_trk, conv1_w, conv1_b, strides.s1,
                          u1, &t_mid);

    std::vector<double> rms_inv(static_cast<size_t>(t_mid) * cells, 0.0);
    std::vector<double> y_norm(u1.size(), 0.0);
    std::vector<double> z_act(u1.size(), 0.0);
    std::vector<double> a_act(u1.size(), 0.0);
    for (int t = 0; t < t_mid; ++t)
        for (int cell = 0; cell < cells; ++cell) {
            const size_t base = (static_cast<size_t>(t) * cells + cell) * mid;
            double ms = 0.0;
            for (int c = 0; c < mid; ++c) ms += u1[base + c] * u1[base + c];
            const double inv = 1.0 / std::sqrt(ms / mid + kRmsEps);
            rms_inv[static_cast<size_t>(t) * cells + cell] = inv;
            for (int c = 0; c < mid; ++c) {
                y_norm[base + c] = u1[base + c] * inv;
                z_act[base + c] = y_norm[base + c] * gain.ptr()[c];
                a_act[base + c] = silu(z_act[base + c]);
            }
        }

    std::vector<double> u2;
    int t_out = 0;
    temporal_conv_forward(a_act, t_mid, cells, mid, conv2_w, conv2_b, strides.s2, u2, &t_out);
    require(t_out == cfg.latent_frames(), "encode_trajectory: temporal stack mismatch");

    *out = LatentGrid(t_out, lh, lw, dv, LatentTag::trajectory);
    out->values = std::move(u2);

    if (cache) {
        cache->used = true;
        cache->t_in = cfg.frames;
        cache->cells = cells;
        cache->t_mid = t_mid;
        cache->t_out = t_out;
        cache->pooled = std::move(pooled);
        cache->u1 = std::move(u1);
        cache->rms_inv = std::move(rms_inv);
        cache->y_norm = std::move(y_norm);
        cache->z_act = std::move(z_act);
        cache->a_act = std::move(a_act);
    }
}

void traj_encoder_backward(const ModelConfig& cfg, const Tensor& conv1_w, const Tensor& gain,
                           const Tensor& conv2_w, DualStreamModel::TrajEncoderCache& cache,
                           const std::vector<double>& d_out, Tensor& d_conv1_w,
                           Tensor& d_conv1_b, Tensor& d_gain, Tensor& d_conv2_w,
                           Tensor& d_conv2_b) {
    const int mid = cfg.trk_hidden;
    const auto strides = traj_strides(cfg.patch_t);

    std::vector<double> da;
    temporal_conv_backward(cache.a_act, cache.t_mid, cache.cells, mid, conv2_w, strides.s2,
                           d_out, cache.t_out, d_conv2_w, d_conv2_b, &da);

    std::vector<double> du(cache.u1.size(), 0.0);
    for (int t = 0; t < cache.t_mid; ++t)
        for (int cell = 0; cell < cache.cells; ++cell) {
            const size_t base = (static_cast<size_t>(t) * cache.cells + cell) * mid;
            const double inv = cache.rms_inv[static_cast<size_t>(t) * cache.cells + cell];
            double dot = 0.0;
            for (int c = 0; c < mid; ++c) {
                const double dz = da[base + c] * silu_grad(cache.z_act[base + c]);
                d_gain.ptr()[c] += dz * cache.y_norm[base + c];
                const double dy = dz * gain.ptr()[c];
                dot += dy * cache.y_norm[base + c];
                du[base + c] = dy;
            }
            const double scale = dot / mid;
            for (int c = 0; c < mid; ++c)
                du[base + c] = inv * (du[base + c] - cache.y_norm[base + c] * scale);
        }

    temporal_conv_backward(cache.pooled, cache.t_in, cache.cells, cfg.d_trk, conv1_w,
                           strides.s1, du, cache.t_mid, d_conv1_w, d_conv1_b, nullptr);
}

}  // namespace

LatentGrid DualStreamModel::encode_trajectory(const TrajectoryMap& map) const {
    LatentGrid out;
    traj_encoder_forward(cfg_, trk_conv1_w.value, trk_conv1_b.value, trk_gain.value,
                         trk_conv2_w.value, trk_conv2_b.value, map, nullptr, &out);
    return out;
}

// ---------------------------------------------------------------------------
// Workspace
// ---------------------------------------------------------------------------

struct DualStreamModel::Workspace {
    int n_stream = 0, m_total = 0;
    bool cross_blocked = false;
    double t = 0.0;
    int label_index = 0;

    std::vector<double> x_tok;     // [M][d_video]
    std::vector<double> zcam_tok;  // [M][d_camera]
    bool cam_present[2] = {false, false};
    std::vector<double> etrk_tok;  // [M][d_video]
    bool trk_present[2] = {false, false};
    TrajEncoderCache trk_cache[2];

    std::vector<double> rope_cos, rope_sin;  // [M][pairs]

    double tfeat[kTimeFeat] = {0};
    std::vector<double> t_pre1, t_act1, t_emb;
    std::vector<double> cvec, silu_c;

    struct BlockCache {
        std::vector<double> y1, inv1, h1;
        std::vector<double> q, k, v;
        std::vector<double> attn_mix, attn_out;
        std::vector<double> y2, inv2, h2;
        std::vector<double> mlp_pre, mlp_act, mlp_out;
        std::vector<double> mod;                // [6D]
        std::vector<std::vector<double>> attn;  // per head [M][M]
    };
    std::vector<BlockCache> blocks;

    std::vector<double> y_f, inv_f, h_f;
    std::vector<double> mod_f;     // [2D]
    std::vector<double> skip_vec;  // [d_video]
};

std::shared_ptr<DualStreamModel::Workspace> DualStreamModel::make_workspace() const {
    return std::make_shared<Workspace>();
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

std::pair<LatentGrid, LatentGrid> DualStreamModel::forward(
    Workspace& ws, const LatentGrid& z_can, const LatentGrid& z_tar, double t,
    const LatentGrid* zcam_can, const LatentGrid* zcam_tar, const TrajectoryMap* trk_can,
    const TrajectoryMap* trk_tar, std::optional<int> label, bool block_cross_stream) {
    require(z_can.same_shape(z_tar), "forward: stream latents must share one shape");
    require(z_can.frames == cfg_.latent_frames() && z_can.height == cfg_.latent_height() &&
                z_can.width == cfg_.latent_width() && z_can.channels == cfg_.d_video(),
            "forward: latent shape does not match the model config");
    require(t >= 0.0 && t <= 1.0, "forward: timestep outside [0,1]");

    const int N = cfg_.tokens_per_stream();
    const int M = 2 * N;
    const int D = cfg_.hidden;
    const int dv = cfg_.d_video();
    const int dc = cfg_.d_camera();
    const int ffn = D * cfg_.mlp_ratio;
    const int heads = cfg_.heads;
    const int hd = cfg_.head_dim();
    const int pairs = hd / 2;

    ws.n_stream = N;
    ws.m_total = M;
    ws.cross_blocked = block_cross_stream;
    ws.t = t;
    if (label.has_value()) {
        require(*label >= 0 && *label < cfg_.label_vocab, "forward: label outside vocabulary");
        ws.label_index = *label;
    } else {
        ws.label_index = cfg_.label_vocab;  // learned null embedding
    }

    ws.x_tok.assign(static_cast<size_t>(M) * dv, 0.0);
    std::copy(z_can.values.begin(), z_can.values.end(), ws.x_tok.begin());
    std::copy(z_tar.values.begin(), z_tar.values.end(),
              ws.x_tok.begin() + static_cast<size_t>(N) * dv);

    ws.zcam_tok.assign(static_cast<size_t>(M) * dc, 0.0);
    ws.cam_present[0] = zcam_can != nullptr;
    ws.cam_present[1] = zcam_tar != nullptr;
    if (zcam_can) {
        require(zcam_can->tokens() == N && zcam_can->channels == dc,
                "forward: camera latent shape mismatch (canonical)");
        std::copy(zcam_can->values.begin(), zcam_can->values.end(), ws.zcam_tok.begin());
    }
    if (zcam_tar) {
        require(zcam_tar->tokens() == N && zcam_tar->channels == dc,
                "forward: camera latent shape mismatch (target)");
        std::copy(zcam_tar->values.begin(), zcam_tar->values.end(),
                  ws.zcam_tok.begin() + static_cast<size_t>(N) * dc);
    }

    ws.etrk_tok.assign(static_cast<size_t>(M) * dv, 0.0);
    ws.trk_present[0] = trk_can != nullptr;
    ws.trk_present[1] = trk_tar != nullptr;
    ws.trk_cache[0] = TrajEncoderCache{};
    ws.trk_cache[1] = TrajEncoderCache{};
    const TrajectoryMap* maps[2] = {trk_can, trk_tar};
    for (int s = 0; s < 2; ++s) {
        if (!maps[s]) continue;  // empty condition: e_trk stays the zero grid
        LatentGrid e;
        traj_encoder_forward(cfg_, trk_conv1_w.value, trk_conv1_b.value, trk_gain.value,
                             trk_conv2_w.value, trk_conv2_b.value, *maps[s], &ws.trk_cache[s],
                             &e);
        std::copy(e.values.begin(), e.values.end(),
                  ws.etrk_tok.begin() + static_cast<size_t>(s) * N * dv);
    }

    // RoPE tables: shared spatial indices; target-stream temporal indices are
    // offset by T^ so the streams are distinguishable.
    const RopeSplit split = rope_split(hd);
    ws.rope_cos.assign(static_cast<size_t>(M) * pairs, 0.0);
    ws.rope_sin.assign(static_cast<size_t>(M) * pairs, 0.0);
    const int lh = cfg_.latent_height(), lw = cfg_.latent_width();
    for (int m = 0; m < M; ++m) {
        const int s = m / N;
        const int n = m % N;
        const int tau = n / (lh * lw);
        const int yy = (n / lw) % lh;
        const int xx = n % lw;
        const double pos_axis[3] = {static_cast<double>(tau + s * cfg_.latent_frames()),
                                    static_cast<double>(yy), static_cast<double>(xx)};
        const int counts[3] = {split.pairs_t, split.pairs_h, split.pairs_w};
        int j = 0;
        for (int axis = 0; axis < 3; ++axis) {
            for (int jj = 0; jj < counts[axis]; ++jj, ++j) {
                const double freq =
                    std::pow(kRopeBase, -static_cast<double>(jj) / std::max(1, counts[axis]));
                const double angle = pos_axis[axis] * freq;
                ws.rope_cos[static_cast<size_t>(m) * pairs + j] = std::cos(angle);
                ws.rope_sin[static_cast<size_t>(m) * pairs + j] = std::sin(angle);
            }
        }
    }

    // Conditioning vector, shared by both streams (same t, one label).
    time_features(t, ws.tfeat);
    ws.t_pre1.assign(D, 0.0);
    ws.t_act1.assign(D, 0.0);
    ws.t_emb.assign(D, 0.0);
    matvec(time_w1.value, ws.tfeat, time_b1.value.ptr(), ws.t_pre1.data());
    for (int c = 0; c < D; ++c) ws.t_act1[c] = silu(ws.t_pre1[c]);
    matvec(time_w2.value, ws.t_act1.data(), time_b2.value.ptr(), ws.t_emb.data());
    ws.cvec.assign(D, 0.0);
    const double* lrow = label_table.value.ptr() + static_cast<size_t>(ws.label_index) * D;
    for (int c = 0; c < D; ++c) ws.cvec[c] = ws.t_emb[c] + lrow[c];
    ws.silu_c.assign(D, 0.0);
    for (int c = 0; c < D; ++c) ws.silu_c[c] = silu(ws.cvec[c]);

    // Token embedding.
    std::vector<double> f(static_cast<size_t>(M) * D, 0.0);
    matmul_bt(ws.x_tok.data(), embed_w.value.ptr(), f.data(), M, dv, D);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < D; ++c) f[static_cast<size_t>(m) * D + c] += embed_b.value.ptr()[c];

    ws.blocks.assign(cfg_.blocks, Workspace::BlockCache{});
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    for (int bi = 0; bi < cfg_.blocks; ++bi) {
        auto& bp = blocks_[bi];
        auto& bc = ws.blocks[bi];

        // Per-stream condition injection.
        for (int s = 0; s < 2; ++s) {
            const size_t tok0 = static_cast<size_t>(s) * N;
            if (ws.cam_present[s]) {
                matmul_bt(ws.zcam_tok.data() + tok0 * dc, bp.inject_cam.value.ptr(),
                          f.data() + tok0 * D, N, dc, D, /*accumulate=*/true);
            }
            if (ws.trk_present[s]) {
                matmul_bt(ws.etrk_tok.data() + tok0 * dv, bp.inject_trk.value.ptr(),
                          f.data() + tok0 * D, N, dv, D, /*accumulate=*/true);
            }
        }

        // Per-block modulation (zero-init: starts as the plain backbone).
        bc.mod.assign(static_cast<size_t>(6) * D, 0.0);
        matvec(bp.mod_w.value, ws.silu_c.data(), bp.mod_b.value.ptr(), bc.mod.data());
        const double* s1 = bc.mod.data();
        const double* b1 = bc.mod.data() + D;
        const double* g1 = bc.mod.data() + 2 * D;
        const double* s2 = bc.mod.data() + 3 * D;
        const double* b2 = bc.mod.data() + 4 * D;
        const double* g2 = bc.mod.data() + 5 * D;

        layer_norm(f.data(), M, D, bc.y1, bc.inv1);
        bc.h1.assign(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bc.h1[static_cast<size_t>(m) * D + c] =
                    bc.y1[static_cast<size_t>(m) * D + c] * (1.0 + s1[c]) + b1[c];

        bc.q.assign(static_cast<size_t>(M) * D, 0.0);
        bc.k.assign(static_cast<size_t>(M) * D, 0.0);
        bc.v.assign(static_cast<size_t>(M) * D, 0.0);
        matmul_bt(bc.h1.data(), bp.wq.value.ptr(), bc.q.data(), M, D, D);
        matmul_bt(bc.h1.data(), bp.wk.value.ptr(), bc.k.data(), M, D, D);
        matmul_bt(bc.h1.data(), bp.wv.value.ptr(), bc.v.data(), M, D, D);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                bc.q[static_cast<size_t>(m) * D + c] += bp.bq.value.ptr()[c];
                bc.k[static_cast<size_t>(m) * D + c] += bp.bk.value.ptr()[c];
                bc.v[static_cast<size_t>(m) * D + c] += bp.bv.value.ptr()[c];
            }

        for (int m = 0; m < M; ++m) {
            const double* cs = ws.rope_cos.data() + static_cast<size_t>(m) * pairs;
            const double* sn = ws.rope_sin.data() + static_cast<size_t>(m) * pairs;
            for (int h = 0; h < heads; ++h) {
                double* qm = bc.q.data() + static_cast<size_t>(m) * D + h * hd;
                double* km = bc.k.data() + static_cast<size_t>(m) * D + h * hd;
                for (int j = 0; j < pairs; ++j) {
                    const double c = cs[j], s = sn[j];
                    const double q0 = qm[2 * j], q1 = qm[2 * j + 1];
                    qm[2 * j] = q0 * c - q1 * s;
                    qm[2 * j + 1] = q0 * s + q1 * c;
                    const double k0 = km[2 * j], k1 = km[2 * j + 1];
                    km[2 * j] = k0 * c - k1 * s;
                    km[2 * j + 1] = k0 * s + k1 * c;
                }
            }
        }

        // Joint self-attention over the concatenated token set.
        bc.attn.assign(heads, std::vector<double>(static_cast<size_t>(M) * M, 0.0));
        bc.attn_mix.assign(static_cast<size_t>(M) * D, 0.0);
        for (int h = 0; h < heads; ++h) {
            auto& A = bc.attn[h];
            for (int i = 0; i < M; ++i) {
                const double* qi = bc.q.data() + static_cast<size_t>(i) * D + h * hd;
                const int si = i / N;
                double mx = -1e300;
                double* Ai = A.data() + static_cast<size_t>(i) * M;
                for (int j = 0; j < M; ++j) {
                    if (block_cross_stream && (j / N) != si) continue;
                    const double* kj = bc.k.data() + static_cast<size_t>(j) * D + h * hd;
                    double dot = 0.0;
                    for (int c = 0; c < hd; ++c) dot += qi[c] * kj[c];
                    Ai[j] = dot * scale;
                    mx = std::max(mx, Ai[j]);
                }
                double denom = 0.0;
                for (int j = 0; j < M; ++j) {
                    if (block_cross_stream && (j / N) != si) {
                        Ai[j] = 0.0;
                        continue;
                    }
                    Ai[j] = std::exp(Ai[j] - mx);
                    denom += Ai[j];
                }
                const double inv = 1.0 / denom;
                double* mix = bc.attn_mix.data() + static_cast<size_t>(i) * D + h * hd;
                for (int j = 0; j < M; ++j) {
                    Ai[j] *= inv;
                    if (Ai[j] == 0.0) continue;
                    const double* vj = bc.v.data() + static_cast<size_t>(j) * D + h * hd;
                    for (int c = 0; c < hd; ++c) mix[c] += Ai[j] * vj[c];
                }
            }
        }

        bc.attn_out.assign(static_cast<size_t>(M) * D, 0.0);
        matmul_bt(bc.attn_mix.data(), bp.wo.value.ptr(), bc.attn_out.data(), M, D, D);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bc.attn_out[static_cast<size_t>(m) * D + c] += bp.bo.value.ptr()[c];

        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                f[static_cast<size_t>(m) * D + c] +=
                    bc.attn_out[static_cast<size_t>(m) * D + c] * (1.0 + g1[c]);

        layer_norm(f.data(), M, D, bc.y2, bc.inv2);
        bc.h2.assign(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bc.h2[static_cast<size_t>(m) * D + c] =
                    bc.y2[static_cast<size_t>(m) * D + c] * (1.0 + s2[c]) + b2[c];

        bc.mlp_pre.assign(static_cast<size_t>(M) * ffn, 0.0);
        matmul_bt(bc.h2.data(), bp.mlp_w1.value.ptr(), bc.mlp_pre.data(), M, D, ffn);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < ffn; ++c)
                bc.mlp_pre[static_cast<size_t>(m) * ffn + c] += bp.mlp_b1.value.ptr()[c];
        bc.mlp_act.assign(static_cast<size_t>(M) * ffn, 0.0);
        for (size_t i = 0; i < bc.mlp_pre.size(); ++i) bc.mlp_act[i] = silu(bc.mlp_pre[i]);

        bc.mlp_out.assign(static_cast<size_t>(M) * D, 0.0);
        matmul_bt(bc.mlp_act.data(), bp.mlp_w2.value.ptr(), bc.mlp_out.data(), M, ffn, D);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bc.mlp_out[static_cast<size_t>(m) * D + c] += bp.mlp_b2.value.ptr()[c];

        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                f[static_cast<size_t>(m) * D + c] +=
                    bc.mlp_out[static_cast<size_t>(m) * D + c] * (1.0 + g2[c]);
    }

    // Final modulated norm and velocity head.
    ws.mod_f.assign(static_cast<size_t>(2) * D, 0.0);
    matvec(final_mod_w.value, ws.silu_c.data(), final_mod_b.value.ptr(), ws.mod_f.data());
    layer_norm(f.data(), M, D, ws.y_f, ws.inv_f);
    ws.h_f.assign(static_cast<size_t>(M) * D, 0.0);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < D; ++c)
            ws.h_f[static_cast<size_t>(m) * D + c] =
                ws.y_f[static_cast<size_t>(m) * D + c] * (1.0 + ws.mod_f[c]) + ws.mod_f[D + c];

    std::vector<double> v_tok(static_cast<size_t>(M) * dv, 0.0);
    matmul_bt(ws.h_f.data(), head_w.value.ptr(), v_tok.data(), M, D, dv);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < dv; ++c)
            v_tok[static_cast<size_t>(m) * dv + c] += head_b.value.ptr()[c];

    // Timestep-conditioned per-channel skip from the noisy input: the
    // velocity's (z_t - z0)/t shape has a z_t/t component no narrow
    // normalized trunk can carry, so the head gets it directly. Zero-init
    // keeps the step-0 backbone equality.
    ws.skip_vec.assign(dv, 0.0);
    matvec(skip_w.value, ws.silu_c.data(), skip_b.value.ptr(), ws.skip_vec.data());
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < dv; ++c)
            v_tok[static_cast<size_t>(m) * dv + c] +=
                ws.skip_vec[c] * ws.x_tok[static_cast<size_t>(m) * dv + c];

    LatentGrid v_can(z_can.frames, z_can.height, z_can.width, dv, LatentTag::video);
    LatentGrid v_tar = v_can;
    std::copy(v_tok.begin(), v_tok.begin() + static_cast<size_t>(N) * dv, v_can.values.begin());
    std::copy(v_tok.begin() + static_cast<size_t>(N) * dv, v_tok.end(), v_tar.values.begin());
    return {std::move(v_can), std::move(v_tar)};
}

std::pair<LatentGrid, LatentGrid> DualStreamModel::infer(
    const LatentGrid& z_can, const LatentGrid& z_tar, double t, const LatentGrid* zcam_can,
    const LatentGrid* zcam_tar, const TrajectoryMap* trk_can, const TrajectoryMap* trk_tar,
    std::optional<int> label, bool block_cross_stream) {
    Workspace ws;
    return forward(ws, z_can, z_tar, t, zcam_can, zcam_tar, trk_can, trk_tar, label,
                   block_cross_stream);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

void DualStreamModel::backward(Workspace& ws, const LatentGrid& dv_can,
                               const LatentGrid& dv_tar) {
    const int N = ws.n_stream;
    const int M = ws.m_total;
    const int D = cfg_.hidden;
    const int dv = cfg_.d_video();
    const int dc = cfg_.d_camera();
    const int ffn = D * cfg_.mlp_ratio;
    const int heads = cfg_.heads;
    const int hd = cfg_.head_dim();
    const int pairs = hd / 2;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    std::vector<double> dv_tok(static_cast<size_t>(M) * dv, 0.0);
    std::copy(dv_can.values.begin(), dv_can.values.end(), dv_tok.begin());
    std::copy(dv_tar.values.begin(), dv_tar.values.end(),
              dv_tok.begin() + static_cast<size_t>(N) * dv);

    std::vector<double> d_silu_c(D, 0.0);
    std::vector<double> detrk(static_cast<size_t>(M) * dv, 0.0);

    // Input skip.
    {
        std::vector<double> dskip(dv, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < dv; ++c)
                dskip[c] += dv_tok[static_cast<size_t>(m) * dv + c] *
                            ws.x_tok[static_cast<size_t>(m) * dv + c];
        matmul_at(dskip.data(), ws.silu_c.data(), skip_w.grad.ptr(), 1, dv, D, true);
        for (int c = 0; c < dv; ++c) skip_b.grad.ptr()[c] += dskip[c];
        std::vector<double> tmp(D, 0.0);
        matmul(dskip.data(), skip_w.value.ptr(), tmp.data(), 1, dv, D);
        for (int c = 0; c < D; ++c) d_silu_c[c] += tmp[c];
    }

    // Head.
    std::vector<double> dh_f(static_cast<size_t>(M) * D, 0.0);
    matmul_at(dv_tok.data(), ws.h_f.data(), head_w.grad.ptr(), M, dv, D, /*acc=*/true);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < dv; ++c)
            head_b.grad.ptr()[c] += dv_tok[static_cast<size_t>(m) * dv + c];
    matmul(dv_tok.data(), head_w.value.ptr(), dh_f.data(), M, dv, D);

    // Final modulation + norm.
    std::vector<double> dmod_f(static_cast<size_t>(2) * D, 0.0);
    std::vector<double> dy_f(static_cast<size_t>(M) * D, 0.0);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < D; ++c) {
            const double g = dh_f[static_cast<size_t>(m) * D + c];
            dmod_f[c] += g * ws.y_f[static_cast<size_t>(m) * D + c];
            dmod_f[D + c] += g;
            dy_f[static_cast<size_t>(m) * D + c] = g * (1.0 + ws.mod_f[c]);
        }
    matmul_at(dmod_f.data(), ws.silu_c.data(), final_mod_w.grad.ptr(), 1, 2 * D, D, true);
    for (int c = 0; c < 2 * D; ++c) final_mod_b.grad.ptr()[c] += dmod_f[c];
    {
        std::vector<double> tmp(D, 0.0);
        matmul(dmod_f.data(), final_mod_w.value.ptr(), tmp.data(), 1, 2 * D, D);
        for (int c = 0; c < D; ++c) d_silu_c[c] += tmp[c];
    }

    std::vector<double> df(static_cast<size_t>(M) * D, 0.0);
    layer_norm_backward(dy_f.data(), ws.y_f.data(), ws.inv_f.data(), M, D, df.data());

    for (int bi = cfg_.blocks - 1; bi >= 0; --bi) {
        auto& bp = blocks_[bi];
        auto& bc = ws.blocks[bi];
        const double* s1 = bc.mod.data();
        const double* g1 = bc.mod.data() + 2 * D;
        const double* s2 = bc.mod.data() + 3 * D;
        const double* g2 = bc.mod.data() + 5 * D;
        std::vector<double> dmod(static_cast<size_t>(6) * D, 0.0);

        // MLP residual.
        std::vector<double> dmlp_out(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                const double g = df[static_cast<size_t>(m) * D + c];
                dmlp_out[static_cast<size_t>(m) * D + c] = g * (1.0 + g2[c]);
                dmod[5 * D + c] += g * bc.mlp_out[static_cast<size_t>(m) * D + c];
            }

        std::vector<double> dmlp_act(static_cast<size_t>(M) * ffn, 0.0);
        matmul_at(dmlp_out.data(), bc.mlp_act.data(), bp.mlp_w2.grad.ptr(), M, D, ffn, true);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bp.mlp_b2.grad.ptr()[c] += dmlp_out[static_cast<size_t>(m) * D + c];
        matmul(dmlp_out.data(), bp.mlp_w2.value.ptr(), dmlp_act.data(), M, D, ffn);

        for (size_t i = 0; i < dmlp_act.size(); ++i) dmlp_act[i] *= silu_grad(bc.mlp_pre[i]);

        std::vector<double> dh2(static_cast<size_t>(M) * D, 0.0);
        matmul_at(dmlp_act.data(), bc.h2.data(), bp.mlp_w1.grad.ptr(), M, ffn, D, true);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < ffn; ++c)
                bp.mlp_b1.grad.ptr()[c] += dmlp_act[static_cast<size_t>(m) * ffn + c];
        matmul(dmlp_act.data(), bp.mlp_w1.value.ptr(), dh2.data(), M, ffn, D);

        std::vector<double> dy2(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                const double g = dh2[static_cast<size_t>(m) * D + c];
                dmod[3 * D + c] += g * bc.y2[static_cast<size_t>(m) * D + c];
                dmod[4 * D + c] += g;
                dy2[static_cast<size_t>(m) * D + c] = g * (1.0 + s2[c]);
            }
        std::vector<double> df_mid(static_cast<size_t>(M) * D, 0.0);
        layer_norm_backward(dy2.data(), bc.y2.data(), bc.inv2.data(), M, D, df_mid.data());
        for (size_t i = 0; i < df.size(); ++i) df_mid[i] += df[i];

        // Attention residual.
        std::vector<double> dattn_out(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                const double g = df_mid[static_cast<size_t>(m) * D + c];
                dattn_out[static_cast<size_t>(m) * D + c] = g * (1.0 + g1[c]);
                dmod[2 * D + c] += g * bc.attn_out[static_cast<size_t>(m) * D + c];
            }

        std::vector<double> dmix(static_cast<size_t>(M) * D, 0.0);
        matmul_at(dattn_out.data(), bc.attn_mix.data(), bp.wo.grad.ptr(), M, D, D, true);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c)
                bp.bo.grad.ptr()[c] += dattn_out[static_cast<size_t>(m) * D + c];
        matmul(dattn_out.data(), bp.wo.value.ptr(), dmix.data(), M, D, D);

        std::vector<double> dq(static_cast<size_t>(M) * D, 0.0);
        std::vector<double> dk(static_cast<size_t>(M) * D, 0.0);
        std::vector<double> dvv(static_cast<size_t>(M) * D, 0.0);
        std::vector<double> dA(static_cast<size_t>(M) * M, 0.0);
        for (int h = 0; h < heads; ++h) {
            const auto& A = bc.attn[h];
            for (int i = 0; i < M; ++i) {
                const double* dmix_i = dmix.data() + static_cast<size_t>(i) * D + h * hd;
                const double* Ai = A.data() + static_cast<size_t>(i) * M;
                double* dAi = dA.data() + static_cast<size_t>(i) * M;
                for (int j = 0; j < M; ++j) {
                    const double a = Ai[j];
                    const double* vj = bc.v.data() + static_cast<size_t>(j) * D + h * hd;
                    double dot = 0.0;
                    for (int c = 0; c < hd; ++c) dot += dmix_i[c] * vj[c];
                    dAi[j] = dot;
                    if (a == 0.0) continue;
                    double* dvj = dvv.data() + static_cast<size_t>(j) * D + h * hd;
                    for (int c = 0; c < hd; ++c) dvj[c] += a * dmix_i[c];
                }
            }
            for (int i = 0; i < M; ++i) {
                const double* Ai = A.data() + static_cast<size_t>(i) * M;
                double* dAi = dA.data() + static_cast<size_t>(i) * M;
                double inner = 0.0;
                for (int j = 0; j < M; ++j) inner += Ai[j] * dAi[j];
                for (int j = 0; j < M; ++j) dAi[j] = Ai[j] * (dAi[j] - inner);
            }
            for (int i = 0; i < M; ++i) {
                const double* dSi = dA.data() + static_cast<size_t>(i) * M;
                double* dqi = dq.data() + static_cast<size_t>(i) * D + h * hd;
                const double* qi = bc.q.data() + static_cast<size_t>(i) * D + h * hd;
                for (int j = 0; j < M; ++j) {
                    const double ds = dSi[j] * scale;
                    if (ds == 0.0) continue;
                    const double* kj = bc.k.data() + static_cast<size_t>(j) * D + h * hd;
                    double* dkj = dk.data() + static_cast<size_t>(j) * D + h * hd;
                    for (int c = 0; c < hd; ++c) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                    }
                }
            }
        }

        // Un-rotate dq, dk.
        for (int m = 0; m < M; ++m) {
            const double* cs = ws.rope_cos.data() + static_cast<size_t>(m) * pairs;
            const double* sn = ws.rope_sin.data() + static_cast<size_t>(m) * pairs;
            for (int h = 0; h < heads; ++h) {
                double* qm = dq.data() + static_cast<size_t>(m) * D + h * hd;
                double* km = dk.data() + static_cast<size_t>(m) * D + h * hd;
                for (int j = 0; j < pairs; ++j) {
                    const double c = cs[j], s = sn[j];
                    const double q0 = qm[2 * j], q1 = qm[2 * j + 1];
                    qm[2 * j] = q0 * c + q1 * s;
                    qm[2 * j + 1] = -q0 * s + q1 * c;
                    const double k0 = km[2 * j], k1 = km[2 * j + 1];
                    km[2 * j] = k0 * c + k1 * s;
                    km[2 * j + 1] = -k0 * s + k1 * c;
                }
            }
        }

        std::vector<double> dh1(static_cast<size_t>(M) * D, 0.0);
        matmul_at(dq.data(), bc.h1.data(), bp.wq.grad.ptr(), M, D, D, true);
        matmul_at(dk.data(), bc.h1.data(), bp.wk.grad.ptr(), M, D, D, true);
        matmul_at(dvv.data(), bc.h1.data(), bp.wv.grad.ptr(), M, D, D, true);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                bp.bq.grad.ptr()[c] += dq[static_cast<size_t>(m) * D + c];
                bp.bk.grad.ptr()[c] += dk[static_cast<size_t>(m) * D + c];
                bp.bv.grad.ptr()[c] += dvv[static_cast<size_t>(m) * D + c];
            }
        matmul(dq.data(), bp.wq.value.ptr(), dh1.data(), M, D, D);
        matmul(dk.data(), bp.wk.value.ptr(), dh1.data(), M, D, D, true);
        matmul(dvv.data(), bp.wv.value.ptr(), dh1.data(), M, D, D, true);

        std::vector<double> dy1(static_cast<size_t>(M) * D, 0.0);
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < D; ++c) {
                const double g = dh1[static_cast<size_t>(m) * D + c];
                dmod[c] += g * bc.y1[static_cast<size_t>(m) * D + c];
                dmod[D + c] += g;
                dy1[static_cast<size_t>(m) * D + c] = g * (1.0 + s1[c]);
            }
        std::vector<double> df_in(static_cast<size_t>(M) * D, 0.0);
        layer_norm_backward(dy1.data(), bc.y1.data(), bc.inv1.data(), M, D, df_in.data());
        for (size_t i = 0; i < df_in.size(); ++i) df_in[i] += df_mid[i];

        matmul_at(dmod.data(), ws.silu_c.data(), bp.mod_w.grad.ptr(), 1, 6 * D, D, true);
        for (int c = 0; c < 6 * D; ++c) bp.mod_b.grad.ptr()[c] += dmod[c];
        {
            std::vector<double> tmp(D, 0.0);
            matmul(dmod.data(), bp.mod_w.value.ptr(), tmp.data(), 1, 6 * D, D);
            for (int c = 0; c < D; ++c) d_silu_c[c] += tmp[c];
        }

        // Injection backward: weight grads plus the running d(e_trk) needed
        // by the trajectory encoder (df passes through additively).
        for (int s = 0; s < 2; ++s) {
            const size_t tok0 = static_cast<size_t>(s) * N;
            if (ws.cam_present[s]) {
                matmul_at(df_in.data() + tok0 * D, ws.zcam_tok.data() + tok0 * dc,
                          bp.inject_cam.grad.ptr(), N, D, dc, true);
            }
            if (ws.trk_present[s]) {
                matmul_at(df_in.data() + tok0 * D, ws.etrk_tok.data() + tok0 * dv,
                          bp.inject_trk.grad.ptr(), N, D, dv, true);
                matmul(df_in.data() + tok0 * D, bp.inject_trk.value.ptr(),
                       detrk.data() + tok0 * dv, N, D, dv, true);
            }
        }

        df = std::move(df_in);
    }

    // Trajectory encoder backward per stream.
    for (int s = 0; s < 2; ++s) {
        if (!ws.trk_present[s]) continue;
        std::vector<double> d_out(detrk.begin() + static_cast<size_t>(s) * N * dv,
                                  detrk.begin() + static_cast<size_t>(s + 1) * N * dv);
        traj_encoder_backward(cfg_, trk_conv1_w.value, trk_gain.value, trk_conv2_w.value,
                              ws.trk_cache[s], d_out, trk_conv1_w.grad, trk_conv1_b.grad,
                              trk_gain.grad, trk_conv2_w.grad, trk_conv2_b.grad);
    }

    // Token embedding.
    matmul_at(df.data(), ws.x_tok.data(), embed_w.grad.ptr(), M, D, dv, true);
    for (int m = 0; m < M; ++m)
        for (int c = 0; c < D; ++c) embed_b.grad.ptr()[c] += df[static_cast<size_t>(m) * D + c];

    // Conditioning vector through the shared SiLU.
    std::vector<double> dc_vec(D, 0.0);
    for (int c = 0; c < D; ++c) dc_vec[c] = d_silu_c[c] * silu_grad(ws.cvec[c]);

    {
        double* lg = label_table.grad.ptr() + static_cast<size_t>(ws.label_index) * D;
        for (int c = 0; c < D; ++c) lg[c] += dc_vec[c];
    }
    {
        std::vector<double> dact(D, 0.0);
        matmul_at(dc_vec.data(), ws.t_act1.data(), time_w2.grad.ptr(), 1, D, D, true);
        for (int c = 0; c < D; ++c) time_b2.grad.ptr()[c] += dc_vec[c];
        matmul(dc_vec.data(), time_w2.value.ptr(), dact.data(), 1, D, D);
        for (int c = 0; c < D; ++c) dact[c] *= silu_grad(ws.t_pre1[c]);
        matmul_at(dact.data(), ws.tfeat, time_w1.grad.ptr(), 1, D, kTimeFeat, true);
        for (int c = 0; c < D; ++c) time_b1.grad.ptr()[c] += dact[c];
    }
}

// ---------------------------------------------------------------------------
// Flow-matching helpers
// ---------------------------------------------------------------------------

LatentGrid interpolate_latent(const LatentGrid& z0, const LatentGrid& noise, double t) {
    require(z0.same_shape(noise), "interpolate: shape mismatch");
    LatentGrid out = z0;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (1.0 - t) * z0.values[i] + t * noise.values[i];
    return out;
}

LatentGrid velocity_target(const LatentGrid& z0, const LatentGrid& noise) {
    require(z0.same_shape(noise), "velocity_target: shape mismatch");
    LatentGrid out = z0;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = noise.values[i] - z0.values[i];
    return out;
}

LatentGrid gaussian_like(const LatentGrid& shape_like, Rng& rng) {
    LatentGrid out = shape_like;
    for (double& v : out.values) v = rng.normal();
    return out;
}

}  // namespace dsv
