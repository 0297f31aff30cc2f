#ifndef DSV_TRAIN_HPP
#define DSV_TRAIN_HPP

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "dsv/model.hpp"
#include "dsv/synth.hpp"

namespace dsv {

struct TrainConfig {
    int iterations = 2000;
    int batch_size = 2;
    double learning_rate = 3e-5;  // desk-scale runs typically override this
    double weight_decay = 1e-3;
    double causal_p = 0.8;
    double track_drop_prob = 0.2;
    double truncate_prob = 0.3;
    double coarsen_prob = 0.5;
    double label_dropout = 0.2;
    uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: final checkpoint only

    void validate() const;
};

// One assembled training unit: noisy latents, velocity targets, encoded /
// raw conditions and the per-stream loss mask.
struct TrainingPair {
    LatentGrid z0_can, z0_tar;
    LatentGrid zt_can, zt_tar;
    LatentGrid tgt_can, tgt_tar;
    LatentGrid zcam_can, zcam_tar;
    std::optional<TrajectoryMap> trk_can;  // target stream condition is empty
    std::optional<int> label;
    bool mask_can = true, mask_tar = true;
    double t = 0.0;
    bool causal_active = false;   // causal-dropout branch taken
    bool causal_applied = false;  // both roles were non-empty
    bool label_dropped = false;
    bool coarsened = false;
};

// Applies the dropout pipeline (causal, coarsen, degrade), rasterizes and
// encodes conditions, samples one shared t and independent per-stream noise.
TrainingPair make_training_pair(const Sample& sample, const ModelConfig& mcfg,
                                const TrainConfig& cfg, Rng& rng);

// Masked mean squared error over unmasked stream entries; optional gradient
// outputs. Throws when both masks are off.
double stream_loss(const LatentGrid& v_can, const LatentGrid& v_tar, const LatentGrid& tgt_can,
                   const LatentGrid& tgt_tar, bool mask_can, bool mask_tar,
                   LatentGrid* d_can = nullptr, LatentGrid* d_tar = nullptr);

struct IterationStats {
    int iteration = 0;
    double loss = 0.0;
    int paired = 0, static_dup = 0, single_dynamic = 0;
    int causal_active = 0, causal_passive = 0;
    int labels_dropped = 0;
};

struct TrainResult {
    std::unique_ptr<DualStreamModel> model;
    std::vector<double> loss_history;
    double initial_smoothed = 0.0;
    double final_smoothed = 0.0;
    int64_t causal_active_total = 0;
    int64_t causal_applied_total = 0;
};

// Decoupled-weight-decay Adam over the trainable parameter subset;
// deterministic under a fixed seed and single-worker data order. Per-sample
// randomness is derived as seed ^ mix(global sample index), so assembly order
// never changes it. Non-finite loss aborts with diagnostics.
// `on_checkpoint` fires every `checkpoint_every` iterations (and can persist
// the model mid-run); 0 disables periodic checkpoints.
TrainResult train(const std::vector<Sample>& dataset, const ModelConfig& mcfg,
                  const TrainConfig& cfg,
                  const std::function<void(const IterationStats&)>& on_iteration = {},
                  const std::function<void(int, DualStreamModel&)>& on_checkpoint = {});

}  // namespace dsv

#endif
