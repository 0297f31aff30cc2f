// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Heavy criteria (overfit training) run once and share
// artifacts with the dependent probes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dsv/io.hpp"
#include "dsv/metrics.hpp"
#include "dsv/pipeline.hpp"
#include "dsv/sampler.hpp"
#include "dsv/train.hpp"

using namespace dsv;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? -1.0 : v[v.size() / 2];
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

ModelConfig overfit_model_config() {
    ModelConfig cfg;
    cfg.frames = 8;
    cfg.height = cfg.width = 32;
    cfg.patch_t = 2;
    cfg.patch_s = 4;
    cfg.hidden = 64;
    cfg.blocks = 2;
    cfg.heads = 4;
    cfg.d_trk = 8;
    cfg.trk_hidden = 16;
    return cfg;
}

ModelConfig gradcheck_config() {
    ModelConfig cfg;
    cfg.frames = 4;
    cfg.height = cfg.width = 8;
    cfg.patch_t = 2;
    cfg.patch_s = 4;
    cfg.hidden = 16;
    cfg.blocks = 1;
    cfg.heads = 2;
    cfg.mlp_ratio = 2;
    cfg.d_trk = 4;
    cfg.trk_hidden = 4;
    return cfg;
}

// The eight 32x32x8 training scenes: mixed push/static/camera programs,
// deterministic from the base seed.
std::vector<Sample> overfit_dataset() {
    GenConfig gcfg;
    std::vector<Sample> dataset;
    for (uint64_t i = 0; i < 8; ++i) {
        dataset.push_back(make_sample(random_scene_spec(derive_seed(42, i), gcfg)));
    }
    return dataset;
}

// Conditions the model was trained around: the active subset when the sample
// has one (training always conditions on a single component), dense otherwise.
std::pair<ConditionBundle, ConditionBundle> regeneration_bundles(const Sample& s, int d_trk,
                                                                 const char* roles) {
    TrackSet tracks = s.tracks;
    auto [act, pas] = decompose_roles(tracks);
    if (std::string(roles) == "active" && !act.empty()) tracks = act;
    if (std::string(roles) == "passive" && !pas.empty()) tracks = pas;

    ConditionBundle can;
    can.first_frame = s.canonical.frame(0);
    can.path.intrinsics = s.path.intrinsics;
    can.path.poses = identity_path(s.spec.frames);
    if (!tracks.empty()) can.trajectory = rasterize(tracks, d_trk);
    can.label = static_cast<int>(s.label);

    ConditionBundle tar;
    tar.first_frame = can.first_frame;
    tar.path = s.path;
    tar.label = can.label;
    return {std::move(can), std::move(tar)};
}

LatentGrid random_latent(const ModelConfig& cfg, Rng& rng, int channels = -1) {
    LatentGrid z(cfg.latent_frames(), cfg.latent_height(), cfg.latent_width(),
                 channels < 0 ? cfg.d_video() : channels);
    for (auto& v : z.values) v = rng.normal();
    return z;
}

TrajectoryMap random_map(const ModelConfig& cfg, Rng& rng, double fill = 0.3) {
    TrajectoryMap map(cfg.frames, cfg.height, cfg.width, cfg.d_trk);
    for (int t = 0; t < map.frames; ++t)
        for (int y = 0; y < map.height; ++y)
            for (int x = 0; x < map.width; ++x) {
                if (rng.uniform() > fill) continue;
                map.occupancy[(static_cast<size_t>(t) * map.height + y) * map.width + x] = 1;
                double* cell = map.cell(t, y, x);
                for (int c = 0; c < map.dim; ++c) cell[c] = rng.uniform(-1.0, 1.0);
            }
    return map;
}

// ---------------------------------------------------------------------------

void criterion_1_geometry_oracles() {
    Timer timer;
    CameraIntrinsics in;
    in.fx = in.fy = 40.0;
    in.cx = in.cy = 16.0;
    in.width = in.height = 32;

    Rng rng(7);
    double worst_roundtrip = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec2 px{rng.uniform(0.0, 31.0), rng.uniform(0.0, 31.0)};
        const double d = rng.uniform(1e-3, 50.0);
        const Vec2 back = project(in, unproject(in, px, d));
        worst_roundtrip = std::max(worst_roundtrip, (back - px).norm());
    }

    double worst_identity = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        CameraPath path;
        path.intrinsics = in;
        path.poses = identity_path(8);
        std::vector<Vec2> track;
        std::vector<double> depths;
        std::vector<uint8_t> vis;
        for (int t = 0; t < 8; ++t) {
            track.push_back({rng.uniform(0.5, 31.0), rng.uniform(0.5, 31.0)});
            depths.push_back(rng.uniform(1.0, 10.0));
            vis.push_back(1);
        }
        const CanonicalTrack out = canonicalize_track(track, depths, vis, path);
        for (int t = 0; t < 8; ++t)
            worst_identity = std::max(worst_identity, (out.points[t] - track[t]).norm());
    }

    // Static-world constancy on 100 random rendered scenes with exact depths.
    double worst_constancy = 0.0;
    int scenes = 0;
    for (uint64_t seed = 0; scenes < 100; ++seed) {
        GenConfig gcfg;
        SceneSpec spec = random_scene_spec(derive_seed(1001, seed), gcfg);
        spec.script = Script::none;
        spec.active_speed = 0.0;
        for (auto& o : spec.objects) o.role = Role::passive;
        if (spec.camera_kind == CameraKind::static_cam) {
            spec.camera_kind = scenes % 2 ? CameraKind::orbit : CameraKind::pan;
            spec.camera_magnitude = scenes % 2 ? 5.0 : 0.45;
        }
        ++scenes;

        const WorldTrajectory world = simulate(spec);
        double mean_depth = 0.0;
        for (const auto& o : spec.objects) mean_depth += o.depth;
        mean_depth /= spec.objects.size();
        const auto poses = sample_camera_program(spec.camera_kind, spec.camera_magnitude,
                                                 spec.frames, mean_depth);
        (void)render(spec, world, poses);  // the scenes are rendered ones

        CameraPath path;
        path.intrinsics = spec.intrinsics;
        path.poses = poses;

        for (size_t k = 0; k < spec.objects.size(); ++k) {
            const ObjectSpec& o = spec.objects[k];
            for (int gy = 0; gy < 3; ++gy)
                for (int gx = 0; gx < 3; ++gx) {
                    const Vec3 wp{o.x0 + (gx - 1) * 0.5 * o.half_w,
                                  o.y0 + (gy - 1) * 0.5 * o.half_h, o.depth};
                    std::vector<Vec2> track(spec.frames);
                    std::vector<double> depths(spec.frames);
                    std::vector<uint8_t> vis(spec.frames, 1);
                    bool usable = true;
                    for (int t = 0; t < spec.frames; ++t) {
                        const Vec3 cam = poses[t].apply(wp);
                        if (cam.z <= 0.0) usable = false;
                        if (!usable) break;
                        track[t] = project(spec.intrinsics, cam);
                        depths[t] = cam.z;
                    }
                    if (!usable) continue;
                    const Vec2 ref = project(spec.intrinsics, wp);
                    const CanonicalTrack canon = canonicalize_track(track, depths, vis, path);
                    for (int t = 0; t < spec.frames; ++t)
                        if (canon.visible[t])
                            worst_constancy =
                                std::max(worst_constancy, (canon.points[t] - ref).norm());
                }
        }
    }

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "geometry oracles: roundtrip %.2e px (<=1e-9), identity %.2e px (<=1e-9), "
                  "constancy %.2e px (<=1e-6) over 100 scenes, %.1fs (<60s)",
                  worst_roundtrip, worst_identity, worst_constancy, timer.seconds());
    verdict(1, worst_roundtrip <= 1e-9 && worst_identity <= 1e-9 && worst_constancy <= 1e-6 &&
                   timer.seconds() < 60.0,
            buf);
}

void criterion_2_canonicalization_end_to_end() {
    Timer timer;
    std::vector<double> errors;
    int samples_used = 0;
    for (uint64_t seed = 0; samples_used < 50; ++seed) {
        GenConfig gcfg;
        SceneSpec spec = random_scene_spec(derive_seed(2002, seed), gcfg);
        if (spec.camera_kind == CameraKind::static_cam) continue;  // needs real motion
        ++samples_used;

        const WorldTrajectory world = simulate(spec);
        const Sample s = make_sample(spec);
        std::vector<int> can_ids, tar_ids;
        const TrackSet can = view_tracks(spec, world, identity_path(spec.frames), 0, &can_ids);
        const TrackSet tar = view_tracks(spec, world, s.path.poses, 0, &tar_ids);
        const RenderOut tar_render = render(spec, world, s.path.poses);

        std::map<int, int> can_index;
        for (size_t i = 0; i < can_ids.size(); ++i) can_index[can_ids[i]] = static_cast<int>(i);

        CameraPath path;
        path.intrinsics = spec.intrinsics;
        path.poses = s.path.poses;

        for (int i = 0; i < tar.count(); ++i) {
            const auto it = can_index.find(tar_ids[i]);
            if (it == can_index.end()) continue;
            const int ci = it->second;
            std::vector<double> depths(spec.frames, 1.0);
            std::vector<uint8_t> vis = tar.visible[i];
            for (int t = 0; t < spec.frames; ++t) {
                if (!vis[t]) continue;
                const auto d = sample_depth(tar_render.depth[t], tar.positions[i][t]);
                if (!d) {
                    vis[t] = 0;
                    continue;
                }
                depths[t] = *d;
            }
            const CanonicalTrack canon = canonicalize_track(tar.positions[i], depths, vis, path);
            for (int t = 0; t < spec.frames; ++t)
                if (canon.visible[t] && can.visible[ci][t])
                    errors.push_back((canon.points[t] - can.positions[ci][t]).norm());
        }
    }
    const double med = median_of(errors);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "end-to-end canonicalization: median %.4f px (<=0.5) over %zu steps / 50 "
                  "samples, %.1fs (<120s)",
                  med, errors.size(), timer.seconds());
    verdict(2, med <= 0.5 && errors.size() > 1000 && timer.seconds() < 120.0, buf);
}

void criterion_3_codec_exactness() {
    Rng rng(3);
    bool exact = true;
    for (int rep = 0; rep < 100; ++rep) {
        const int pt = rep % 2 ? 1 : 2;
        const int ps = rep % 3 ? 4 : 2;
        Video clip(pt * (1 + static_cast<int>(rng.uniform_int(1, 4))), ps * 4, ps * 6, 3);
        for (auto& v : clip.data) v = static_cast<float>(rng.uniform(-1.0, 2.0));
        const Video back = codec_decode(codec_encode(clip, pt, ps), pt, ps);
        exact = exact && back.data == clip.data;
    }
    verdict(3, exact, "codec exactness: decode(encode(x)) bit-exact on 100 random clips");
}

void criterion_4_flow_matching_algebra() {
    const ModelConfig cfg = gradcheck_config();
    Rng rng(4);
    bool endpoints_exact = true;
    double worst_recovery = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const LatentGrid z0 = random_latent(cfg, rng);
        const LatentGrid eps = random_latent(cfg, rng);
        const LatentGrid at0 = interpolate_latent(z0, eps, 0.0);
        const LatentGrid at1 = interpolate_latent(z0, eps, 1.0);
        endpoints_exact = endpoints_exact && at0.values == z0.values && at1.values == eps.values;

        const double t = rng.uniform();
        const LatentGrid zt = interpolate_latent(z0, eps, t);
        const LatentGrid target = velocity_target(z0, eps);
        for (size_t i = 0; i < zt.values.size(); ++i)
            worst_recovery = std::max(
                worst_recovery, std::fabs(zt.values[i] - t * target.values[i] - z0.values[i]));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "flow-matching algebra: endpoints %s, z0 recovery %.2e (<=1e-6)",
                  endpoints_exact ? "exact" : "NOT exact", worst_recovery);
    verdict(4, endpoints_exact && worst_recovery <= 1e-6, buf);
}

void criterion_5_gradient_correctness() {
    Timer timer;
    const ModelConfig cfg = gradcheck_config();
    DualStreamModel model(cfg, 29);
    {
        Rng rng(555);
        for (auto& p : model.params())
            for (double& v : p.value->data) v = rng.normal() * 0.25;
    }

    Rng rng(10);
    const LatentGrid z_can = random_latent(cfg, rng);
    const LatentGrid z_tar = random_latent(cfg, rng);
    const LatentGrid zc_can = random_latent(cfg, rng, cfg.d_camera());
    const LatentGrid zc_tar = random_latent(cfg, rng, cfg.d_camera());
    const TrajectoryMap map = random_map(cfg, rng, 0.35);
    const LatentGrid t_can = random_latent(cfg, rng);
    const LatentGrid t_tar = random_latent(cfg, rng);
    const double t = 0.37;

    auto eval_loss = [&](bool with_grad) {
        auto ws = model.make_workspace();
        const auto [v_can, v_tar] =
            model.forward(*ws, z_can, z_tar, t, &zc_can, &zc_tar, &map, nullptr, 2);
        LatentGrid d_can, d_tar;
        const double loss = stream_loss(v_can, v_tar, t_can, t_tar, true, true,
                                        with_grad ? &d_can : nullptr,
                                        with_grad ? &d_tar : nullptr);
        if (with_grad) model.backward(*ws, d_can, d_tar);
        return loss;
    };

    model.zero_grads();
    eval_loss(true);

    const double h = 1e-5;
    double worst = 0.0;
    int checked = 0;
    for (auto& p : model.params()) {
        const int64_t n = p.value->numel();
        const int64_t step = std::max<int64_t>(1, n / 4);
        for (int64_t i = 0; i < n; i += step) {
            const double keep = p.value->data[i];
            p.value->data[i] = keep + h;
            const double lp = eval_loss(false);
            p.value->data[i] = keep - h;
            const double lm = eval_loss(false);
            p.value->data[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = p.grad->data[i];
            if (std::fabs(fd) < 1e-10 && std::fabs(an) < 1e-10) continue;
            worst = std::max(worst, std::fabs(fd - an) / std::max(std::fabs(fd), std::fabs(an)));
            ++checked;
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "gradients: worst rel err %.2e (<1e-4) over %d entries, %.1fs (<300s)", worst,
                  checked, timer.seconds());
    verdict(5, worst < 1e-4 && checked > 60 && timer.seconds() < 300.0, buf);
}

void criterion_6_conditioning_noop(const ModelConfig& cfg) {
    DualStreamModel model(cfg, 99);  // fresh init: injections zero
    Rng rng(6);
    const LatentGrid z_can = random_latent(cfg, rng);
    const LatentGrid z_tar = random_latent(cfg, rng);
    const LatentGrid zc_can = random_latent(cfg, rng, cfg.d_camera());
    const LatentGrid zc_tar = random_latent(cfg, rng, cfg.d_camera());
    const TrajectoryMap map = random_map(cfg, rng);

    const auto with_cond =
        model.infer(z_can, z_tar, 0.45, &zc_can, &zc_tar, &map, nullptr, std::nullopt);
    const auto backbone =
        model.infer(z_can, z_tar, 0.45, nullptr, nullptr, nullptr, nullptr, std::nullopt);
    const bool equal = with_cond.first.values == backbone.first.values &&
                       with_cond.second.values == backbone.second.values;
    verdict(6, equal,
            "conditioning no-op: zero injections + dropped label == unconditioned backbone "
            "(bit-exact)");
}

void criterion_7_cross_view_pathway(DualStreamModel& trained) {
    const ModelConfig& cfg = trained.config();
    Rng rng(77);
    const LatentGrid z_can = random_latent(cfg, rng);
    const LatentGrid z_tar = random_latent(cfg, rng);
    const LatentGrid zc = random_latent(cfg, rng, cfg.d_camera());
    const TrajectoryMap map_a = random_map(cfg, rng);
    const TrajectoryMap map_b = random_map(cfg, rng);

    const auto blocked_a =
        trained.infer(z_can, z_tar, 0.5, &zc, &zc, &map_a, nullptr, 1, /*block=*/true);
    const auto blocked_b =
        trained.infer(z_can, z_tar, 0.5, &zc, &zc, &map_b, nullptr, 1, /*block=*/true);
    const bool invariant = blocked_a.second.values == blocked_b.second.values;

    const auto open_a = trained.infer(z_can, z_tar, 0.5, &zc, &zc, &map_a, nullptr, 1);
    const auto open_b = trained.infer(z_can, z_tar, 0.5, &zc, &zc, &map_b, nullptr, 1);
    double max_diff = 0.0;
    for (size_t i = 0; i < open_a.second.values.size(); ++i)
        max_diff = std::max(max_diff,
                            std::fabs(open_a.second.values[i] - open_b.second.values[i]));

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "cross-view pathway: masked => v_tar bit-invariant (%s); enabled => max-abs "
                  "diff %.3e (>0) on the trained checkpoint",
                  invariant ? "yes" : "NO", max_diff);
    verdict(7, invariant && max_diff > 0.0, buf);
}

void criterion_8_dropout_statistics() {
    Rng mk(88);
    TrackSet ts;
    ts.height = ts.width = 64;
    for (int i = 0; i < 40; ++i) {
        std::vector<Vec2> pos(4, {double(i % 60) + 1.0, double(i % 60) + 1.0});
        std::vector<uint8_t> vis(4, 1);
        ts.push_track(std::move(pos), std::move(vis), i / 4,
                      i % 2 ? Role::active : Role::passive);
    }

    Rng rng_a(888);
    int active = 0;
    for (int i = 0; i < 10000; ++i) {
        bool was_active = false;
        causal_dropout(ts, 0.8, rng_a, &was_active);
        if (was_active) ++active;
    }
    const double active_rate = active / 10000.0;

    // 100 non-exempt tracks x 100 draws = 10,000 removal decisions.
    TrackSet big;
    big.height = big.width = 64;
    for (int i = 0; i < 101; ++i) {
        std::vector<Vec2> pos(4, {1.0 + (i % 60), 1.0 + (i % 60)});
        std::vector<uint8_t> vis(4, 1);
        big.push_track(std::move(pos), std::move(vis), i, Role::active);
    }
    Rng rng_b(889);
    int removed = 0;
    for (int rep = 0; rep < 100; ++rep) removed += 101 - degrade(big, 0.2, 0.0, rng_b).count();
    const double removal_rate = removed / 10000.0;

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "dropout statistics: causal active rate %.4f (0.80 +/- 0.02), track removal "
                  "rate %.4f (0.20 +/- 0.02) over 10,000 draws each",
                  active_rate, removal_rate);
    verdict(8, std::fabs(active_rate - 0.8) <= 0.02 && std::fabs(removal_rate - 0.2) <= 0.02,
            buf);
}

struct OverfitArtifacts {
    std::unique_ptr<DualStreamModel> model;
    std::vector<Sample> dataset;
    std::vector<GeneratedClips> clips;
};

OverfitArtifacts criterion_9_overfit_controllability() {
    Timer timer;
    OverfitArtifacts art;
    art.dataset = overfit_dataset();

    int interaction = 0, static_dup = 0, moving_cam = 0;
    for (const auto& s : art.dataset) {
        if (s.spec.script != Script::none) ++interaction;
        if (s.mode == SupervisionMode::static_dup) ++static_dup;
        if (s.spec.camera_kind != CameraKind::static_cam) ++moving_cam;
    }
    std::printf("       dataset mix: %d interaction, %d static-dup, %d moving-camera\n",
                interaction, static_dup, moving_cam);

    const ModelConfig mcfg = overfit_model_config();
    TrainConfig tcfg;
    tcfg.iterations = 2500;  // <= 5000 budget
    tcfg.batch_size = 2;
    tcfg.learning_rate = 2e-3;
    tcfg.seed = 42;

    TrainResult result = train(art.dataset, mcfg, tcfg);
    const double ratio = result.final_smoothed / result.initial_smoothed;
    const double train_seconds = timer.seconds();

    std::vector<double> epe_medians, rot_medians, trans_medians;
    int camera_undefined = 0;
    for (size_t i = 0; i < art.dataset.size(); ++i) {
        const Sample& s = art.dataset[i];
        const auto [can, tar] = regeneration_bundles(s, mcfg.d_trk, "active");
        art.clips.push_back(sample(*result.model, can, tar, s.depth0, 20, 9000 + i));

        const ColorDetector det = detector_for(s.spec);
        const WorldTrajectory world = simulate(s.spec);
        const TrackSet gt_tar = view_tracks(s.spec, world, s.path.poses, 36);
        std::vector<std::array<double, 3>> colors;
        for (const auto& o : s.spec.objects) colors.push_back(o.albedo);
        try {
            epe_medians.push_back(epe(art.clips[i].target, gt_tar, colors, det).median_px);
        } catch (const Error&) {
            epe_medians.push_back(1e9);  // undetectable counts as failure
        }
        try {
            const CameraErrorResult cam =
                camera_error(art.clips[i].target, s.path, fiducials(s.spec), det);
            rot_medians.push_back(cam.median_rotation_deg);
            trans_medians.push_back(cam.median_translation);
        } catch (const Error&) {
            ++camera_undefined;
        }
    }

    const double epe_med = median_of(epe_medians);
    const double rot_med = median_of(rot_medians);
    const double trans_med = median_of(trans_medians);
    const double scene_depth = art.dataset[0].spec.background_depth;
    const double total_seconds = timer.seconds();

    char buf[320];
    std::snprintf(
        buf, sizeof(buf),
        "overfit: loss %.4f -> %.4f (ratio %.3f < 0.2), median EPE %.3f px (<=2.0), rot %.3f "
        "deg (<=5), trans %.3f (<=%.1f), camera undefined on %d/8, train %.0fs total %.0fs "
        "(<=14400)",
        result.initial_smoothed, result.final_smoothed, ratio, epe_med, rot_med, trans_med,
        0.1 * scene_depth, camera_undefined, train_seconds, total_seconds);
    verdict(9, ratio < 0.2 && epe_med <= 2.0 && rot_med >= 0.0 && rot_med <= 5.0 &&
                   trans_med >= 0.0 && trans_med <= 0.1 * scene_depth && camera_undefined <= 2 &&
                   total_seconds <= 14400.0,
            buf);

    art.model = std::move(result.model);
    return art;
}

void criterion_10_causality_smoke(OverfitArtifacts& art) {
    // A training push sample: forward reasoning moves the passive object in
    // the right direction; inverse reasoning produces a contacting action.
    int push_index = -1;
    for (size_t i = 0; i < art.dataset.size(); ++i) {
        if (art.dataset[i].spec.script == Script::push &&
            !decompose_roles(art.dataset[i].tracks).second.empty()) {
            push_index = static_cast<int>(i);
            break;
        }
    }
    if (push_index < 0) {
        verdict(10, false, "causality smoke: no push sample in the training mix");
        return;
    }
    const Sample& s = art.dataset[push_index];
    const ColorDetector det = detector_for(s.spec);
    const ModelConfig& mcfg = art.model->config();

    bool forward_ok = false, inverse_ok = false;
    double cosine = -2.0, magnitude_frac = 0.0, active_disp = 0.0;
    bool contact_order = false;
    try {
        // Forward: active-only conditioning (the regeneration clip already
        // used it); probe the canonical stream.
        const CausalityReport fwd = causality_probe(art.clips[push_index].canonical, s,
                                                    CausalityMode::forward, det);
        cosine = fwd.direction_cosine;
        magnitude_frac =
            fwd.gt_passive_disp_px > 0 ? fwd.passive_disp_px / fwd.gt_passive_disp_px : 0.0;
        forward_ok = cosine > 0.5 && magnitude_frac > 0.25;
    } catch (const Error&) {
    }

    try {
        const auto [can, tar] = regeneration_bundles(s, mcfg.d_trk, "passive");
        const GeneratedClips inv = sample(*art.model, can, tar, s.depth0, 20, 31337);
        const CausalityReport rep =
            causality_probe(inv.canonical, s, CausalityMode::inverse, det);
        active_disp = rep.active_disp_px;
        contact_order = rep.contact_before_onset;
        inverse_ok = active_disp > 1.0 && contact_order;
    } catch (const Error&) {
    }

    char buf[280];
    std::snprintf(buf, sizeof(buf),
                  "causality smoke (sample %d, push): forward cos %.3f (>0.5) magnitude %.0f%% "
                  "(>25%%); inverse active disp %.2f px (>1) contact-before-onset %s",
                  push_index, cosine, 100.0 * magnitude_frac, active_disp,
                  contact_order ? "yes" : "NO");
    verdict(10, forward_ok && inverse_ok, buf);
}

void criterion_11_reproducibility() {
    const fs::path root =
        fs::temp_directory_path() / ("dsv_accept_" + std::to_string(::getpid()));
    fs::create_directories(root);

    bool dataset_identical = true, losses_identical = true, clips_identical = true,
         reports_identical = true;
    try {
        // Dataset bit-identity.
        gen_data("", (root / "data_a").string(), 2, 123);
        gen_data("", (root / "data_b").string(), 2, 123);
        for (int i = 0; i < 2; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%04d", i);
            for (const char* file :
                 {"canonical.f32", "target.f32", "depth0.f64", "tracks_pos.f64", "poses.f64"}) {
                std::ifstream a(root / "data_a" / name / file, std::ios::binary);
                std::ifstream b(root / "data_b" / name / file, std::ios::binary);
                std::string sa((std::istreambuf_iterator<char>(a)),
                               std::istreambuf_iterator<char>());
                std::string sb((std::istreambuf_iterator<char>(b)),
                               std::istreambuf_iterator<char>());
                dataset_identical = dataset_identical && !sa.empty() && sa == sb;
            }
        }

        // Loss-curve and checkpoint bit-identity on a tiny run.
        std::vector<Sample> ds = {read_sample(root / "data_a" / "sample_0000"),
                                  read_sample(root / "data_a" / "sample_0001")};
        ModelConfig mcfg = gradcheck_config();
        mcfg.frames = ds[0].spec.frames;
        mcfg.height = ds[0].spec.height;
        mcfg.width = ds[0].spec.width;
        mcfg.hidden = 32;
        mcfg.heads = 2;
        TrainConfig tcfg;
        tcfg.iterations = 10;
        tcfg.batch_size = 1;
        tcfg.learning_rate = 1e-3;
        tcfg.seed = 9;
        const TrainResult ra = train(ds, mcfg, tcfg);
        const TrainResult rb = train(ds, mcfg, tcfg);
        losses_identical = ra.loss_history == rb.loss_history;

        // Sampling bit-identity.
        const auto [can, tar] = regeneration_bundles(ds[0], mcfg.d_trk, "all");
        const GeneratedClips ga = sample(*ra.model, can, tar, ds[0].depth0, 4, 55);
        const GeneratedClips gb = sample(*rb.model, can, tar, ds[0].depth0, 4, 55);
        clips_identical = ga.target.data == gb.target.data &&
                          ga.canonical.data == gb.canonical.data;

        // Metric-report identity through the full eval command.
        write_checkpoint(root / "ckpt", *ra.model);
        {
            json cond{{"sample_dir", (root / "data_a" / "sample_0000").string()},
                      {"steps", 2},
                      {"seed", 3},
                      {"export_images", false}};
            write_json_file(root / "cond.json", cond);
        }
        sample_command((root / "ckpt").string(), (root / "cond.json").string(),
                       (root / "gen_a").string(), 0, std::nullopt);
        sample_command((root / "ckpt").string(), (root / "cond.json").string(),
                       (root / "gen_b").string(), 0, std::nullopt);
        eval_command((root / "gen_a").string(), "", (root / "report_a.jsonl").string());
        eval_command((root / "gen_b").string(), "", (root / "report_b.jsonl").string());
        auto slurp = [](const fs::path& p) {
            std::ifstream in(p);
            std::string s((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
            // The generated paths differ; compare after stripping them.
            const size_t cut = s.find("\"generated\"");
            return s.substr(0, cut) + s.substr(s.find(',', cut));
        };
        reports_identical = slurp(root / "report_a.jsonl") == slurp(root / "report_b.jsonl");
    } catch (const std::exception& e) {
        std::printf("       reproducibility raised: %s\n", e.what());
        dataset_identical = false;
    }
    fs::remove_all(root);

    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "reproducibility: dataset %s, loss curves %s, samples %s, reports %s "
                  "(all bit-identical)",
                  dataset_identical ? "ok" : "DIFFER", losses_identical ? "ok" : "DIFFER",
                  clips_identical ? "ok" : "DIFFER", reports_identical ? "ok" : "DIFFER");
    verdict(11, dataset_identical && losses_identical && clips_identical && reports_identical,
            buf);
}

}  // namespace

int main() {
    std::printf("acceptance suite (%s)\n", kCodeVersion);

    criterion_1_geometry_oracles();
    criterion_2_canonicalization_end_to_end();
    criterion_3_codec_exactness();
    criterion_4_flow_matching_algebra();
    criterion_5_gradient_correctness();
    criterion_6_conditioning_noop(overfit_model_config());
    criterion_8_dropout_statistics();

    OverfitArtifacts art = criterion_9_overfit_controllability();
    criterion_7_cross_view_pathway(*art.model);
    criterion_10_causality_smoke(art);
    criterion_11_reproducibility();

    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
