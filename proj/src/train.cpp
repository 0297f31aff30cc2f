#include "dsv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dsv {

void TrainConfig::validate() const {
    require(iterations > 0, "train: iterations must be positive");
    require(batch_size > 0, "train: batch size must be positive");
    require(learning_rate > 0.0, "train: learning rate must be positive");
    for (double p : {causal_p, track_drop_prob, truncate_prob, coarsen_prob, label_dropout}) {
        require(p >= 0.0 && p <= 1.0, "train: probabilities must lie in [0,1]");
    }
}

TrainingPair make_training_pair(const Sample& sample, const ModelConfig& mcfg,
                                const TrainConfig& cfg, Rng& rng) {
    TrainingPair out;

    // Track-condition pipeline. Draw order is part of the format: causal,
    // coarsen, degrade, label, t, noise.
    TrackSet tracks = sample.tracks;
    if (!tracks.empty()) {
        auto [act, pas] = decompose_roles(tracks);
        out.causal_applied = !act.empty() && !pas.empty();
        tracks = causal_dropout(tracks, cfg.causal_p, rng, &out.causal_active);
    }
    out.coarsened = rng.uniform() < cfg.coarsen_prob;
    if (out.coarsened && !tracks.empty()) {
        tracks = coarsen(tracks, CoarsenMode::object_level);
    }
    if (!tracks.empty()) {
        tracks = degrade(tracks, cfg.track_drop_prob, cfg.truncate_prob, rng);
        out.trk_can = rasterize(tracks, mcfg.d_trk);
    }

    out.label_dropped = rng.uniform() < cfg.label_dropout;
    if (!out.label_dropped) out.label = static_cast<int>(sample.label);

    // Camera conditions: identity path for the canonical stream, the sample's
    // path for the target stream. Both warp the shared first frame.
    ConditionBundle can_bundle;
    can_bundle.first_frame = sample.canonical.frame(0);
    can_bundle.path.intrinsics = sample.path.intrinsics;
    can_bundle.path.poses = identity_path(sample.spec.frames);
    out.zcam_can = encode_camera(can_bundle, sample.depth0, mcfg);

    ConditionBundle tar_bundle = can_bundle;
    tar_bundle.path = sample.path;
    out.zcam_tar = encode_camera(tar_bundle, sample.depth0, mcfg);

    // Latents and flow-matching interpolation: one shared t, independent
    // noise per stream.
    out.z0_can = codec_encode(sample.canonical, mcfg.patch_t, mcfg.patch_s);
    out.z0_tar = codec_encode(sample.target, mcfg.patch_t, mcfg.patch_s);
    out.t = rng.uniform();
    const LatentGrid eps_can = gaussian_like(out.z0_can, rng);
    const LatentGrid eps_tar = gaussian_like(out.z0_tar, rng);
    out.zt_can = interpolate_latent(out.z0_can, eps_can, out.t);
    out.zt_tar = interpolate_latent(out.z0_tar, eps_tar, out.t);
    out.tgt_can = velocity_target(out.z0_can, eps_can);
    out.tgt_tar = velocity_target(out.z0_tar, eps_tar);

    switch (sample.mode) {
        case SupervisionMode::paired:
        case SupervisionMode::static_dup:
            out.mask_can = out.mask_tar = true;
            break;
        case SupervisionMode::single_dynamic:
            out.mask_can = false;  // loss at the first stream stays zero
            out.mask_tar = true;
            break;
    }
    return out;
}

double stream_loss(const LatentGrid& v_can, const LatentGrid& v_tar, const LatentGrid& tgt_can,
                   const LatentGrid& tgt_tar, bool mask_can, bool mask_tar, LatentGrid* d_can,
                   LatentGrid* d_tar) {
    require(v_can.same_shape(tgt_can) && v_tar.same_shape(tgt_tar),
            "loss: output/target shape mismatch");
    if (!mask_can && !mask_tar) {
        fail_invalid("loss: every stream is masked");
    }
    const size_t n_each = v_can.values.size();
    const size_t n = (mask_can ? n_each : 0) + (mask_tar ? n_each : 0);

    if (d_can) {
        *d_can = v_can;
        std::fill(d_can->values.begin(), d_can->values.end(), 0.0);
    }
    if (d_tar) {
        *d_tar = v_tar;
        std::fill(d_tar->values.begin(), d_tar->values.end(), 0.0);
    }

    double acc = 0.0;
    if (mask_can) {
        for (size_t i = 0; i < n_each; ++i) {
            const double e = v_can.values[i] - tgt_can.values[i];
            acc += e * e;
            if (d_can) d_can->values[i] = 2.0 * e / static_cast<double>(n);
        }
    }
    if (mask_tar) {
        for (size_t i = 0; i < n_each; ++i) {
            const double e = v_tar.values[i] - tgt_tar.values[i];
            acc += e * e;
            if (d_tar) d_tar->values[i] = 2.0 * e / static_cast<double>(n);
        }
    }
    return acc / static_cast<double>(n);
}

namespace {

struct AdamWState {
    std::vector<std::vector<double>> m, v;
    int64_t step = 0;
};

void adamw_step(DualStreamModel& model, AdamWState& state, const TrainConfig& cfg) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto params = model.params();
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].value->data.size(), 0.0);
            state.v[i].assign(params[i].value->data.size(), 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        auto& w = params[i].value->data;
        const auto& g = params[i].grad->data;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= cfg.learning_rate *
                    (mhat / (std::sqrt(vhat) + eps) + cfg.weight_decay * w[j]);
        }
    }
}

double window_mean(const std::vector<double>& xs, size_t begin, size_t end) {
    double acc = 0.0;
    for (size_t i = begin; i < end; ++i) acc += xs[i];
    return acc / static_cast<double>(end - begin);
}

}  // namespace

TrainResult train(const std::vector<Sample>& dataset, const ModelConfig& mcfg,
                  const TrainConfig& cfg,
                  const std::function<void(const IterationStats&)>& on_iteration,
                  const std::function<void(int, DualStreamModel&)>& on_checkpoint) {
    cfg.validate();
    mcfg.validate();
    require(!dataset.empty(), "empty dataset");

    TrainResult result;
    result.model = std::make_unique<DualStreamModel>(mcfg, cfg.seed);
    DualStreamModel& model = *result.model;

    AdamWState opt;
    Rng order_rng(splitmix64(cfg.seed ^ 0x0dde7ULL));
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // forces an initial shuffle

    auto ws = model.make_workspace();
    int64_t sample_counter = 0;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        IterationStats stats;
        stats.iteration = iter;
        model.zero_grads();
        double loss_acc = 0.0;

        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i) {
                    const size_t j = static_cast<size_t>(order_rng.uniform_int(0, i - 1));
                    std::swap(order[i - 1], order[j]);
                }
                cursor = 0;
            }
            const Sample& sample = dataset[order[cursor++]];

            Rng sample_rng(derive_seed(cfg.seed, static_cast<uint64_t>(sample_counter++)));
            const TrainingPair pair = make_training_pair(sample, mcfg, cfg, sample_rng);

            switch (sample.mode) {
                case SupervisionMode::paired: ++stats.paired; break;
                case SupervisionMode::static_dup: ++stats.static_dup; break;
                case SupervisionMode::single_dynamic: ++stats.single_dynamic; break;
            }
            if (pair.causal_applied) {
                (pair.causal_active ? stats.causal_active : stats.causal_passive)++;
            }
            if (pair.label_dropped) ++stats.labels_dropped;

            const auto [v_can, v_tar] = model.forward(
                *ws, pair.zt_can, pair.zt_tar, pair.t, &pair.zcam_can, &pair.zcam_tar,
                pair.trk_can ? &*pair.trk_can : nullptr, nullptr, pair.label);

            LatentGrid d_can, d_tar;
            double loss = stream_loss(v_can, v_tar, pair.tgt_can, pair.tgt_tar, pair.mask_can,
                                      pair.mask_tar, &d_can, &d_tar);
            loss /= cfg.batch_size;
            const double inv_batch = 1.0 / cfg.batch_size;
            for (auto& g : d_can.values) g *= inv_batch;
            for (auto& g : d_tar.values) g *= inv_batch;
            model.backward(*ws, d_can, d_tar);
            loss_acc += loss;
        }

        if (!std::isfinite(loss_acc)) {
            std::ostringstream oss;
            oss << "training diverged: non-finite loss at iteration " << iter << " (seed "
                << cfg.seed << ", lr " << cfg.learning_rate << ")";
            fail_runtime(oss.str());
        }

        adamw_step(model, opt, cfg);

        stats.loss = loss_acc;
        result.loss_history.push_back(loss_acc);
        result.causal_active_total += stats.causal_active;
        result.causal_applied_total += stats.causal_active + stats.causal_passive;
        if (on_iteration) on_iteration(stats);
        if (on_checkpoint && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
            iter + 1 < cfg.iterations) {
            on_checkpoint(iter + 1, model);
        }
    }

    const size_t n = result.loss_history.size();
    const size_t w = std::min<size_t>(50, n);
    result.initial_smoothed = window_mean(result.loss_history, 0, w);
    result.final_smoothed = window_mean(result.loss_history, n - w, n);
    return result;
}

}  // namespace dsv
