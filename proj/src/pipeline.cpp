#include "dsv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dsv/metrics.hpp"
#include "dsv/sampler.hpp"
#include "dsv/train.hpp"

namespace dsv {

namespace fs = std::filesystem;

namespace {

json load_config_or_empty(const std::string& path) {
    if (path.empty()) return json::object();
    return read_json_file(path);
}

GenConfig gen_config_from_json(const json& j) {
    GenConfig cfg;
    cfg.height = j.value("height", cfg.height);
    cfg.width = j.value("width", cfg.width);
    cfg.frames = j.value("frames", cfg.frames);
    cfg.paired_ratio = j.value("paired_ratio", cfg.paired_ratio);
    cfg.static_dup_ratio = j.value("static_dup_ratio", cfg.static_dup_ratio);
    cfg.single_dynamic_ratio = j.value("single_dynamic_ratio", cfg.single_dynamic_ratio);
    cfg.script_none_ratio = j.value("script_none_ratio", cfg.script_none_ratio);
    require(cfg.height > 0 && cfg.width > 0 && cfg.frames > 0, "gen config: bad dimensions");
    require(cfg.paired_ratio >= 0 && cfg.static_dup_ratio >= 0 &&
                cfg.single_dynamic_ratio >= 0,
            "gen config: ratios must be non-negative");
    return cfg;
}

json gen_config_to_json(const GenConfig& c) {
    return json{{"height", c.height},
                {"width", c.width},
                {"frames", c.frames},
                {"paired_ratio", c.paired_ratio},
                {"static_dup_ratio", c.static_dup_ratio},
                {"single_dynamic_ratio", c.single_dynamic_ratio},
                {"script_none_ratio", c.script_none_ratio}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.causal_p = j.value("causal_p", cfg.causal_p);
    cfg.track_drop_prob = j.value("track_drop_prob", cfg.track_drop_prob);
    cfg.truncate_prob = j.value("truncate_prob", cfg.truncate_prob);
    cfg.coarsen_prob = j.value("coarsen_prob", cfg.coarsen_prob);
    cfg.label_dropout = j.value("label_dropout", cfg.label_dropout);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    return cfg;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"iterations", c.iterations},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay},
                {"causal_p", c.causal_p},
                {"track_drop_prob", c.track_drop_prob},
                {"truncate_prob", c.truncate_prob},
                {"coarsen_prob", c.coarsen_prob},
                {"label_dropout", c.label_dropout},
                {"seed", c.seed},
                {"checkpoint_every", c.checkpoint_every}};
}

std::vector<std::string> dataset_sample_dirs(const fs::path& data_dir) {
    const json manifest = read_json_file(data_dir / "dataset.json");
    require(manifest.value("schema_version", -1) == kSchemaVersion,
            "dataset manifest: unsupported schema version");
    std::vector<std::string> dirs;
    for (const auto& d : manifest.at("samples")) dirs.push_back(d.get<std::string>());
    return dirs;
}

std::optional<int> label_index_from_string(const std::string& name) {
    for (int i = 0; i < kLabelVocab; ++i) {
        if (name == to_string(static_cast<Script>(i))) return i;
    }
    return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

void gen_data(const std::string& config_path, const std::string& out_dir, int count,
              uint64_t seed) {
    const RunClock clock;
    require(count >= 0, "gen-data: count must be >= 0");
    const json jcfg = load_config_or_empty(config_path);
    const GenConfig cfg = gen_config_from_json(jcfg);

    fs::create_directories(out_dir);
    std::vector<std::string> dirs;
    for (int i = 0; i < count; ++i) {
        const uint64_t sample_seed = derive_seed(seed, static_cast<uint64_t>(i));
        const SceneSpec spec = random_scene_spec(sample_seed, cfg);
        const Sample sample = make_sample(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04d", i);
        write_sample(fs::path(out_dir) / name, sample);
        dirs.push_back(name);
    }
    write_json_file(fs::path(out_dir) / "dataset.json",
                    json{{"schema_version", kSchemaVersion},
                         {"count", count},
                         {"samples", dirs},
                         {"gen_config", gen_config_to_json(cfg)}});
    write_run_manifest(out_dir, "gen-data",
                       json{{"gen_config", gen_config_to_json(cfg)}, {"count", count}}, seed,
                       dirs, clock);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void train_command(const std::string& data_dir, const std::string& config_path,
                   const std::string& out_dir) {
    const RunClock clock;
    const json jcfg = load_config_or_empty(config_path);
    TrainConfig tcfg = train_config_from_json(jcfg.value("train", json::object()));
    ModelConfig mcfg = model_config_from_json(jcfg.value("model", json::object()));

    std::vector<Sample> dataset;
    for (const auto& d : dataset_sample_dirs(data_dir)) {
        dataset.push_back(read_sample(fs::path(data_dir) / d));
    }
    require(!dataset.empty(), "empty dataset");

    // Model geometry follows the data.
    mcfg.frames = dataset[0].spec.frames;
    mcfg.height = dataset[0].spec.height;
    mcfg.width = dataset[0].spec.width;

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "metrics.jsonl");
    require(log.good(), "train: cannot open metrics log");

    TrainResult result = train(
        dataset, mcfg, tcfg,
        [&](const IterationStats& s) {
            log << json{{"iter", s.iteration},
                        {"loss", s.loss},
                        {"modes",
                         {{"paired", s.paired},
                          {"static_dup", s.static_dup},
                          {"single_dynamic", s.single_dynamic}}},
                        {"causal", {{"active", s.causal_active}, {"passive", s.causal_passive}}},
                        {"labels_dropped", s.labels_dropped}}
                       .dump()
                << "\n";
        },
        [&](int iter, DualStreamModel& model) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%06d", iter);
            write_checkpoint(fs::path(out_dir) / name, model);
        });
    log.close();

    write_checkpoint(fs::path(out_dir) / "checkpoint", *result.model);
    write_json_file(fs::path(out_dir) / "train_summary.json",
                    json{{"schema_version", kSchemaVersion},
                         {"iterations", tcfg.iterations},
                         {"initial_smoothed_loss", result.initial_smoothed},
                         {"final_smoothed_loss", result.final_smoothed},
                         {"causal_active_total", result.causal_active_total},
                         {"causal_applied_total", result.causal_applied_total}});
    write_run_manifest(out_dir, "train",
                       json{{"train", train_config_to_json(tcfg)},
                            {"model", model_config_to_json(mcfg)},
                            {"data_dir", data_dir}},
                       tcfg.seed, {"checkpoint", "metrics.jsonl", "train_summary.json"}, clock);
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

namespace {

// Builds the condition bundles from a stored sample per the condition spec:
// role filtering, optional coarsening, camera override.
struct BuiltConditions {
    ConditionBundle canonical, target;
    std::string roles = "all";
};

BuiltConditions build_conditions(const Sample& sample, const json& spec, int d_trk) {
    BuiltConditions out;
    out.roles = spec.value("roles", "all");

    TrackSet tracks = sample.tracks;
    const std::string track_mode = spec.value("tracks", "gt");
    if (track_mode == "none") {
        tracks = TrackSet{};
        tracks.height = sample.spec.height;
        tracks.width = sample.spec.width;
    } else if (track_mode == "gt") {
        if (out.roles != "all") {
            auto [act, pas] = decompose_roles(tracks);
            TrackSet picked = out.roles == "active" ? act : pas;
            if (picked.empty()) picked = out.roles == "active" ? pas : act;
            tracks = picked;
        }
        if (spec.value("coarsen", "none") == "object" && !tracks.empty()) {
            tracks = coarsen(tracks, CoarsenMode::object_level);
        }
    } else {
        fail_invalid("condition spec: tracks must be 'gt' or 'none'");
    }

    out.canonical.first_frame = sample.canonical.frame(0);
    out.canonical.path.intrinsics = sample.path.intrinsics;
    out.canonical.path.poses = identity_path(sample.spec.frames);
    if (!tracks.empty()) out.canonical.trajectory = rasterize(tracks, d_trk);

    out.target.first_frame = out.canonical.first_frame;
    if (spec.contains("camera") && spec.at("camera").is_object()) {
        const auto& jc = spec.at("camera");
        double mean_depth = sample.spec.background_depth * 0.5;
        if (!sample.spec.objects.empty()) {
            mean_depth = 0.0;
            for (const auto& o : sample.spec.objects) mean_depth += o.depth;
            mean_depth /= sample.spec.objects.size();
        }
        out.target.path.intrinsics = sample.path.intrinsics;
        CameraKind kind = CameraKind::static_cam;
        const std::string kname = jc.value("kind", "static");
        for (const auto k : {CameraKind::static_cam, CameraKind::orbit, CameraKind::pan,
                             CameraKind::zoom, CameraKind::mixed}) {
            if (kname == to_string(k)) kind = k;
        }
        out.target.path.poses = sample_camera_program(kind, jc.value("magnitude", 0.0),
                                                      sample.spec.frames, mean_depth);
    } else {
        out.target.path = sample.path;  // "sample": reuse the stored program
    }

    const std::string label_mode = spec.value("label", "auto");
    if (label_mode == "auto") {
        out.canonical.label = static_cast<int>(sample.label);
    } else if (label_mode != "none") {
        const auto idx = label_index_from_string(label_mode);
        require(idx.has_value(), "condition spec: unknown label '" + label_mode + "'");
        out.canonical.label = *idx;
    }
    out.target.label = out.canonical.label;
    return out;
}

}  // namespace

void sample_command(const std::string& checkpoint_dir, const std::string& condition_path,
                    const std::string& out_dir, int steps_override,
                    std::optional<uint64_t> seed_override) {
    LoadedCheckpoint ckpt = read_checkpoint(checkpoint_dir);
    sample_with_checkpoint(ckpt, checkpoint_dir, condition_path, out_dir, steps_override,
                           seed_override);
}

void sample_with_checkpoint(LoadedCheckpoint& ckpt, const std::string& checkpoint_dir,
                            const std::string& condition_path, const std::string& out_dir,
                            int steps_override, std::optional<uint64_t> seed_override) {
    const RunClock clock;
    const json spec = read_json_file(condition_path);
    require(spec.contains("sample_dir"), "condition spec: missing sample_dir");
    const std::string sample_dir = spec.at("sample_dir").get<std::string>();
    const Sample base = read_sample(sample_dir);

    require(ckpt.config.frames == base.spec.frames && ckpt.config.height == base.spec.height &&
                ckpt.config.width == base.spec.width,
            "sample: checkpoint geometry does not match the conditioning sample");

    const int steps = steps_override > 0 ? steps_override : spec.value("steps", 20);
    const uint64_t seed = seed_override.value_or(spec.value("seed", 0ULL));

    const BuiltConditions cond = build_conditions(base, spec, ckpt.config.d_trk);
    const GeneratedClips clips =
        sample(*ckpt.model, cond.canonical, cond.target, base.depth0, steps, seed);

    fs::create_directories(out_dir);
    write_video_f32(fs::path(out_dir) / "target.f32", clips.target);
    write_video_f32(fs::path(out_dir) / "canonical.f32", clips.canonical);
    if (spec.value("export_images", true)) {
        write_ppm_sequence(fs::path(out_dir) / "target_frames", clips.target);
        write_ppm_sequence(fs::path(out_dir) / "canonical_frames", clips.canonical);
    }
    write_json_file(fs::path(out_dir) / "generated.json",
                    json{{"schema_version", kSchemaVersion},
                         {"sample_dir", fs::absolute(sample_dir).string()},
                         {"checkpoint", fs::absolute(checkpoint_dir).string()},
                         {"steps", steps},
                         {"seed", seed},
                         {"roles", cond.roles},
                         {"shape", {base.spec.frames, base.spec.height, base.spec.width, 3}}});
    write_run_manifest(out_dir, "sample", spec, seed,
                       {"target.f32", "canonical.f32", "generated.json"}, clock);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

namespace {

json eval_one(const fs::path& generated_dir, const std::string& data_dir_override) {
    const json gen = read_json_file(generated_dir / "generated.json");
    require(gen.value("schema_version", -1) == kSchemaVersion,
            "generated manifest: unsupported schema version");

    std::string sample_dir = gen.at("sample_dir").get<std::string>();
    if (!data_dir_override.empty()) {
        // Re-anchor the stored sample reference under the override root.
        sample_dir = (fs::path(data_dir_override) / fs::path(sample_dir).filename()).string();
    }
    const Sample sample = read_sample(sample_dir);
    const auto& spec = sample.spec;

    const auto shape = gen.at("shape").get<std::vector<int>>();
    const Video target = read_video_f32(generated_dir / "target.f32", shape[0], shape[1],
                                        shape[2], shape[3]);
    const Video canonical = read_video_f32(generated_dir / "canonical.f32", shape[0], shape[1],
                                           shape[2], shape[3]);

    const ColorDetector detector = detector_for(spec);
    const WorldTrajectory world = simulate(spec);
    std::vector<std::array<double, 3>> colors;
    for (const auto& o : spec.objects) colors.push_back(o.albedo);

    // Ground-truth target-view centroid tracks from exact re-simulation.
    const TrackSet gt_target_tracks = view_tracks(spec, world, sample.path.poses, 36);
    const std::vector<Fiducial> fids = fiducials(spec);

    json out{{"generated", generated_dir.string()}, {"sample", sample_dir}};

    // Detector noise floor: the same metrics on the exact render.
    const Video gt_render = render(spec, world, sample.path.poses).clip;
    const EpeResult floor_epe = epe(gt_render, gt_target_tracks, colors, detector);
    out["epe_floor_px"] = floor_epe.median_px;

    try {
        const EpeResult e = epe(target, gt_target_tracks, colors, detector);
        out["epe_px"] = e.median_px;
        out["epe_steps"] = e.steps_evaluated;
        out["epe_undetected"] = e.steps_undetected;
    } catch (const Error& err) {
        out["epe_error"] = err.what();
    }

    try {
        const CameraErrorResult floor_cam =
            camera_error(gt_render, sample.path, fids, detector);
        out["camera_floor_rot_deg"] = floor_cam.median_rotation_deg;
        out["camera_floor_trans"] = floor_cam.median_translation;
        const CameraErrorResult cam = camera_error(target, sample.path, fids, detector);
        out["camera_rot_deg"] = cam.median_rotation_deg;
        out["camera_trans"] = cam.median_translation;
        out["camera_frames_used"] = cam.frames_used;
    } catch (const Error& err) {
        out["camera_error"] = err.what();
    }

    bool has_active = false, has_passive = false;
    for (const auto& o : spec.objects) {
        has_active |= o.role == Role::active;
        has_passive |= o.role == Role::passive;
    }
    if (has_active && has_passive) {
        try {
            const CausalityReport fwd =
                causality_probe(canonical, sample, CausalityMode::forward, detector);
            out["forward_passive_disp_px"] = fwd.passive_disp_px;
            out["forward_gt_passive_disp_px"] = fwd.gt_passive_disp_px;
            out["forward_cosine"] = fwd.direction_cosine;
        } catch (const Error& err) {
            out["causality_error"] = err.what();
        }
    }
    return out;
}

}  // namespace

void eval_command(const std::string& generated_dir, const std::string& data_dir,
                  const std::string& report_path) {
    const RunClock clock;
    std::vector<fs::path> clip_dirs;
    if (fs::exists(fs::path(generated_dir) / "generated.json")) {
        clip_dirs.push_back(generated_dir);
    } else {
        for (const auto& entry : fs::directory_iterator(generated_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "generated.json")) {
                clip_dirs.push_back(entry.path());
            }
        }
        std::sort(clip_dirs.begin(), clip_dirs.end());
    }
    require(!clip_dirs.empty(), "eval: no generated clips under " + generated_dir);

    std::ofstream report(report_path);
    require(report.good(), "eval: cannot open report path " + report_path);

    std::vector<double> epes, rots, transs;
    for (const auto& dir : clip_dirs) {
        const json line = eval_one(dir, data_dir);
        report << line.dump() << "\n";
        if (line.contains("epe_px")) epes.push_back(line["epe_px"].get<double>());
        if (line.contains("camera_rot_deg")) {
            rots.push_back(line["camera_rot_deg"].get<double>());
            transs.push_back(line["camera_trans"].get<double>());
        }
    }

    const auto med = [](std::vector<double> v) -> json {
        if (v.empty()) return nullptr;
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    json summary{{"schema_version", kSchemaVersion},
                 {"clips", clip_dirs.size()},
                 {"median_epe_px", med(epes)},
                 {"median_rot_deg", med(rots)},
                 {"median_trans", med(transs)}};
    const fs::path summary_path = fs::path(report_path).parent_path() / "summary.json";
    write_json_file(summary_path, summary);
    write_run_manifest(fs::path(report_path).parent_path(), "eval",
                       json{{"generated", generated_dir}, {"data", data_dir}}, 0,
                       {fs::path(report_path).filename().string(), "summary.json"}, clock);
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

std::string inspect_command(const std::string& path) {
    std::ostringstream out;
    const fs::path p(path);
    if (fs::exists(p / "manifest.json")) {
        const json m = read_json_file(p / "manifest.json");
        out << "sample directory " << path << "\n";
        out << "  mode: " << m.value("mode", "?") << ", label: " << m.value("label", -1)
            << "\n";
        for (const auto& [name, t] : m.at("tensors").items()) {
            out << "  " << name << ": " << t.at("dtype").get<std::string>() << " [";
            bool first = true;
            for (const auto& d : t.at("shape")) {
                out << (first ? "" : ", ") << d;
                first = false;
            }
            out << "]\n";
        }
    } else if (fs::exists(p / "checkpoint.json")) {
        const json c = read_json_file(p / "checkpoint.json");
        out << "checkpoint " << path << "\n";
        out << "  code: " << c.value("code_version", "?") << "\n";
        out << "  doubles: " << c.value("total_doubles", 0) << "\n";
        out << "  model: " << c.at("model_config").dump() << "\n";
        out << "  params: " << c.at("params").size() << " tensors\n";
    } else if (fs::exists(p / "dataset.json")) {
        const json d = read_json_file(p / "dataset.json");
        out << "dataset " << path << ": " << d.value("count", 0) << " samples\n";
    } else if (fs::exists(p / "generated.json")) {
        const json g = read_json_file(p / "generated.json");
        out << "generated clip " << path << "\n  " << g.dump(2) << "\n";
    } else if (fs::exists(p / "run_manifest.json")) {
        out << read_json_file(p / "run_manifest.json").dump(2) << "\n";
    } else {
        fail_invalid("inspect: unrecognized artifact at " + path);
    }
    return out.str();
}

}  // namespace dsv
