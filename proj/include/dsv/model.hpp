#ifndef DSV_MODEL_HPP
#define DSV_MODEL_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dsv/codec.hpp"
#include "dsv/geometry.hpp"
#include "dsv/rng.hpp"
#include "dsv/tensor.hpp"
#include "dsv/tracks.hpp"

namespace dsv {

struct ModelConfig {
    int frames = 8, height = 32, width = 32;
    int patch_t = 2, patch_s = 4;
    int hidden = 64;
    int blocks = 2;
    int heads = 4;
    int mlp_ratio = 4;
    int d_trk = 8;        // trajectory-map embedding channels
    int trk_hidden = 16;  // mid channels of the trajectory encoder
    int label_vocab = 4;  // motion labels; a learned null slot is appended
    bool train_all = true;  // false: only encoders + self-attention update

    int latent_frames() const { return frames / patch_t; }
    int latent_height() const { return height / patch_s; }
    int latent_width() const { return width / patch_s; }
    int d_video() const { return 3 * patch_t * patch_s * patch_s; }
    int d_camera() const { return 4 * patch_t * patch_s * patch_s; }
    int head_dim() const { return hidden / heads; }
    int tokens_per_stream() const { return latent_frames() * latent_height() * latent_width(); }

    void validate() const;
};

// Per-stream condition set mirroring c_can / c_tar: first frame, camera
// path, optional trajectory condition, optional motion label. An absent
// trajectory encodes as the zero latent.
struct ConditionBundle {
    Image first_frame;
    CameraPath path;
    std::optional<TrajectoryMap> trajectory;
    std::optional<int> label;
};

// Warp the first frame along the camera path (validity as a fourth channel,
// zero-filled RGB) and codec-encode the warped sequence.
LatentGrid encode_camera(const ConditionBundle& bundle, const DepthMap& depth0,
                         const ModelConfig& cfg);

class DualStreamModel {
public:
    DualStreamModel(const ModelConfig& cfg, uint64_t init_seed);

    // The registry points into the parameter storage.
    DualStreamModel(const DualStreamModel&) = delete;
    DualStreamModel& operator=(const DualStreamModel&) = delete;

    const ModelConfig& config() const { return cfg_; }

    struct ParamRef {
        std::string name;
        Tensor* value;
        Tensor* grad;
        bool trainable;
    };
    std::vector<ParamRef> params();
    void zero_grads();
    int64_t param_count() const;

    // Learned trajectory encoder: spatial average pooling, then the temporal
    // conv stack. Inference path (no cache kept).
    LatentGrid encode_trajectory(const TrajectoryMap& map) const;

    // One joint denoising evaluation. Trajectory maps are consumed raw so
    // their encoder participates in the differentiated graph; null pointers
    // mean "empty condition" (zero trajectory latent / no injection).
    // Token count per attention layer is 2 * tokens_per_stream().
    struct Workspace;
    std::pair<LatentGrid, LatentGrid> forward(Workspace& ws, const LatentGrid& z_can,
                                              const LatentGrid& z_tar, double t,
                                              const LatentGrid* zcam_can,
                                              const LatentGrid* zcam_tar,
                                              const TrajectoryMap* trk_can,
                                              const TrajectoryMap* trk_tar,
                                              std::optional<int> label,
                                              bool block_cross_stream = false);

    // Convenience inference wrapper (workspace managed internally).
    std::pair<LatentGrid, LatentGrid> infer(const LatentGrid& z_can, const LatentGrid& z_tar,
                                            double t, const LatentGrid* zcam_can,
                                            const LatentGrid* zcam_tar,
                                            const TrajectoryMap* trk_can,
                                            const TrajectoryMap* trk_tar,
                                            std::optional<int> label,
                                            bool block_cross_stream = false);

    // Accumulates parameter gradients for the preceding forward.
    void backward(Workspace& ws, const LatentGrid& dv_can, const LatentGrid& dv_tar);

    std::shared_ptr<Workspace> make_workspace() const;

    // Checkpoint access.
    Tensor* find_param(const std::string& name);

    struct TrajEncoderCache;

private:
    void init_params(uint64_t seed);
    void register_params();

    ModelConfig cfg_;

    struct P {
        Tensor value, grad;
        P() = default;
        explicit P(std::vector<int64_t> shape) : value(std::move(shape)) {
            grad = Tensor(value.shape);
        }
    };

    // Embedding and head.
    P embed_w, embed_b;
    P head_w, head_b;
    P final_mod_w, final_mod_b;  // 2*hidden modulation of the final norm
    P skip_w, skip_b;            // timestep-conditioned per-channel input skip

    // Timestep MLP and label table (vocab + null row).
    P time_w1, time_b1, time_w2, time_b2;
    P label_table;

    // Trajectory encoder.
    P trk_conv1_w, trk_conv1_b;  // [mid][d_trk][3]
    P trk_gain;                  // RMSNorm gain [mid]
    P trk_conv2_w, trk_conv2_b;  // [d_video][mid][3]

    struct BlockParams {
        P inject_cam, inject_trk;       // hidden x d_camera / hidden x d_video
        P mod_w, mod_b;                 // 6*hidden x hidden (zero-init)
        P wq, bq, wk, bk, wv, bv, wo, bo;
        P mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    };
    std::vector<BlockParams> blocks_;

    std::vector<ParamRef> registry_;
};

// Flow-matching helpers on latent grids.
LatentGrid interpolate_latent(const LatentGrid& z0, const LatentGrid& noise, double t);
LatentGrid velocity_target(const LatentGrid& z0, const LatentGrid& noise);
LatentGrid gaussian_like(const LatentGrid& shape_like, Rng& rng);

}  // namespace dsv

#endif
