#include "dsv/io.hpp"

#include <bit>
#include <chrono>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "on-disk tensor formats are little-endian");

namespace dsv {

namespace fs = std::filesystem;

namespace {

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <typename T>
void write_blob(const fs::path& file, const T* data, size_t count) {
    std::ofstream out(file, std::ios::binary);
    require(out.good(), "io: cannot open " + file.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data), count * sizeof(T));
    require(out.good(), "io: short write to " + file.string());
}

template <typename T>
void read_blob(const fs::path& file, T* data, size_t count) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    require(in.good(), "io: cannot open " + file.string());
    const auto size = static_cast<size_t>(in.tellg());
    if (size != count * sizeof(T)) {
        fail_invalid("io: corrupt tensor file " + file.string() + " (have " +
                     std::to_string(size) + " bytes, expect " +
                     std::to_string(count * sizeof(T)) + ")");
    }
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data), count * sizeof(T));
    require(in.good(), "io: short read from " + file.string());
}

json tensor_entry(const std::string& file, const std::string& dtype,
                  std::vector<int64_t> shape) {
    return json{{"file", file}, {"dtype", dtype}, {"shape", shape}};
}

void check_schema(const json& j, const std::string& what) {
    require(j.contains("schema_version"), what + ": missing schema_version");
    const int v = j.at("schema_version").get<int>();
    if (v != kSchemaVersion) {
        fail_invalid(what + ": schema version " + std::to_string(v) +
                     " unsupported (this build reads version " +
                     std::to_string(kSchemaVersion) + ")");
    }
}

}  // namespace

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    require(in.good(), "io: cannot open " + file.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail_invalid("io: malformed JSON in " + file.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const fs::path& file, const json& j) {
    std::ofstream out(file);
    require(out.good(), "io: cannot open " + file.string() + " for writing");
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// SceneSpec / ModelConfig JSON
// ---------------------------------------------------------------------------

json scene_spec_to_json(const SceneSpec& s) {
    json objects = json::array();
    for (const auto& o : s.objects) {
        objects.push_back({{"half_w", o.half_w},
                           {"half_h", o.half_h},
                           {"x0", o.x0},
                           {"y0", o.y0},
                           {"depth", o.depth},
                           {"albedo", o.albedo},
                           {"role", o.role == Role::active ? "active" : "passive"}});
    }
    return json{{"seed", s.seed},
                {"height", s.height},
                {"width", s.width},
                {"frames", s.frames},
                {"intrinsics",
                 {{"fx", s.intrinsics.fx},
                  {"fy", s.intrinsics.fy},
                  {"cx", s.intrinsics.cx},
                  {"cy", s.intrinsics.cy},
                  {"width", s.intrinsics.width},
                  {"height", s.intrinsics.height}}},
                {"background_depth", s.background_depth},
                {"background_texture", s.background_texture},
                {"objects", objects},
                {"script", to_string(s.script)},
                {"camera_kind", to_string(s.camera_kind)},
                {"camera_magnitude", s.camera_magnitude},
                {"active_speed", s.active_speed},
                {"motion_dir", {s.motion_dir_x, s.motion_dir_y}},
                {"track_count", s.track_count},
                {"mode", to_string(s.mode)}};
}

namespace {

Script script_from_string(const std::string& s) {
    if (s == "none") return Script::none;
    if (s == "push") return Script::push;
    if (s == "pull") return Script::pull;
    if (s == "collide") return Script::collide;
    fail_invalid("scene_spec: unknown script '" + s + "'");
}

CameraKind camera_kind_from_string(const std::string& s) {
    if (s == "static") return CameraKind::static_cam;
    if (s == "orbit") return CameraKind::orbit;
    if (s == "pan") return CameraKind::pan;
    if (s == "zoom") return CameraKind::zoom;
    if (s == "mixed") return CameraKind::mixed;
    fail_invalid("scene_spec: unknown camera kind '" + s + "'");
}

SupervisionMode mode_from_string(const std::string& s) {
    if (s == "paired") return SupervisionMode::paired;
    if (s == "static-dup") return SupervisionMode::static_dup;
    if (s == "single-dynamic") return SupervisionMode::single_dynamic;
    fail_invalid("scene_spec: unknown supervision mode '" + s + "'");
}

}  // namespace

SceneSpec scene_spec_from_json(const json& j) {
    SceneSpec s;
    s.seed = j.at("seed").get<uint64_t>();
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.frames = j.at("frames").get<int>();
    const auto& in = j.at("intrinsics");
    s.intrinsics.fx = in.at("fx").get<double>();
    s.intrinsics.fy = in.at("fy").get<double>();
    s.intrinsics.cx = in.at("cx").get<double>();
    s.intrinsics.cy = in.at("cy").get<double>();
    s.intrinsics.width = in.at("width").get<int>();
    s.intrinsics.height = in.at("height").get<int>();
    s.background_depth = j.at("background_depth").get<double>();
    s.background_texture = j.at("background_texture").get<int>();
    for (const auto& jo : j.at("objects")) {
        ObjectSpec o;
        o.half_w = jo.at("half_w").get<double>();
        o.half_h = jo.at("half_h").get<double>();
        o.x0 = jo.at("x0").get<double>();
        o.y0 = jo.at("y0").get<double>();
        o.depth = jo.at("depth").get<double>();
        o.albedo = jo.at("albedo").get<std::array<double, 3>>();
        o.role = jo.at("role").get<std::string>() == "active" ? Role::active : Role::passive;
        s.objects.push_back(o);
    }
    s.script = script_from_string(j.at("script").get<std::string>());
    s.camera_kind = camera_kind_from_string(j.at("camera_kind").get<std::string>());
    s.camera_magnitude = j.at("camera_magnitude").get<double>();
    s.active_speed = j.at("active_speed").get<double>();
    s.motion_dir_x = j.at("motion_dir")[0].get<double>();
    s.motion_dir_y = j.at("motion_dir")[1].get<double>();
    s.track_count = j.at("track_count").get<int>();
    s.mode = mode_from_string(j.at("mode").get<std::string>());
    return s;
}

json model_config_to_json(const ModelConfig& c) {
    return json{{"frames", c.frames},       {"height", c.height},
                {"width", c.width},         {"patch_t", c.patch_t},
                {"patch_s", c.patch_s},     {"hidden", c.hidden},
                {"blocks", c.blocks},       {"heads", c.heads},
                {"mlp_ratio", c.mlp_ratio}, {"d_trk", c.d_trk},
                {"trk_hidden", c.trk_hidden}, {"label_vocab", c.label_vocab},
                {"train_all", c.train_all}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.frames = j.value("frames", c.frames);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.patch_t = j.value("patch_t", c.patch_t);
    c.patch_s = j.value("patch_s", c.patch_s);
    c.hidden = j.value("hidden", c.hidden);
    c.blocks = j.value("blocks", c.blocks);
    c.heads = j.value("heads", c.heads);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.d_trk = j.value("d_trk", c.d_trk);
    c.trk_hidden = j.value("trk_hidden", c.trk_hidden);
    c.label_vocab = j.value("label_vocab", c.label_vocab);
    c.train_all = j.value("train_all", c.train_all);
    return c;
}

// ---------------------------------------------------------------------------
// Sample format
// ---------------------------------------------------------------------------

void write_sample(const fs::path& dir, const Sample& s) {
    fs::create_directories(dir);
    const int t = s.spec.frames, h = s.spec.height, w = s.spec.width;
    const int n = s.tracks.count();

    write_blob(dir / "canonical.f32", s.canonical.data.data(), s.canonical.data.size());
    write_blob(dir / "target.f32", s.target.data.data(), s.target.data.size());
    write_blob(dir / "depth0.f64", s.depth0.values.data(), s.depth0.values.size());
    write_blob(dir / "depth0_valid.u8", s.depth0.valid.data(), s.depth0.valid.size());

    std::vector<double> pos(static_cast<size_t>(n) * t * 2);
    std::vector<uint8_t> vis(static_cast<size_t>(n) * t);
    std::vector<int32_t> obj(n);
    std::vector<uint8_t> role(n);
    for (int i = 0; i < n; ++i) {
        obj[i] = s.tracks.object_id[i];
        role[i] = static_cast<uint8_t>(s.tracks.role[i]);
        for (int u = 0; u < t; ++u) {
            pos[(static_cast<size_t>(i) * t + u) * 2] = s.tracks.positions[i][u].x;
            pos[(static_cast<size_t>(i) * t + u) * 2 + 1] = s.tracks.positions[i][u].y;
            vis[static_cast<size_t>(i) * t + u] = s.tracks.visible[i][u];
        }
    }
    write_blob(dir / "tracks_pos.f64", pos.data(), pos.size());
    write_blob(dir / "tracks_vis.u8", vis.data(), vis.size());
    write_blob(dir / "tracks_obj.i32", obj.data(), obj.size());
    write_blob(dir / "tracks_role.u8", role.data(), role.size());

    std::vector<double> poses(static_cast<size_t>(t) * 12);
    for (int u = 0; u < t; ++u) {
        for (int i = 0; i < 9; ++i) poses[u * 12 + i] = s.path.poses[u].rotation.m[i];
        poses[u * 12 + 9] = s.path.poses[u].translation.x;
        poses[u * 12 + 10] = s.path.poses[u].translation.y;
        poses[u * 12 + 11] = s.path.poses[u].translation.z;
    }
    write_blob(dir / "poses.f64", poses.data(), poses.size());

    json manifest{
        {"schema_version", kSchemaVersion},
        {"mode", to_string(s.mode)},
        {"label", static_cast<int>(s.label)},
        {"scene_spec", scene_spec_to_json(s.spec)},
        {"tensors",
         {{"canonical", tensor_entry("canonical.f32", "f32", {t, h, w, 3})},
          {"target", tensor_entry("target.f32", "f32", {t, h, w, 3})},
          {"depth0", tensor_entry("depth0.f64", "f64", {h, w})},
          {"depth0_valid", tensor_entry("depth0_valid.u8", "u8", {h, w})},
          {"tracks_pos", tensor_entry("tracks_pos.f64", "f64", {n, t, 2})},
          {"tracks_vis", tensor_entry("tracks_vis.u8", "u8", {n, t})},
          {"tracks_obj", tensor_entry("tracks_obj.i32", "i32", {n})},
          {"tracks_role", tensor_entry("tracks_role.u8", "u8", {n})},
          {"poses", tensor_entry("poses.f64", "f64", {t, 12})}}},
    };
    write_json_file(dir / "manifest.json", manifest);
}

Sample read_sample(const fs::path& dir) {
    const json manifest = read_json_file(dir / "manifest.json");
    check_schema(manifest, "sample manifest " + dir.string());

    Sample s;
    s.spec = scene_spec_from_json(manifest.at("scene_spec"));
    s.mode = mode_from_string(manifest.at("mode").get<std::string>());
    s.label = static_cast<MotionLabel>(manifest.at("label").get<int>());

    const int t = s.spec.frames, h = s.spec.height, w = s.spec.width;
    const int n = manifest.at("tensors").at("tracks_obj").at("shape")[0].get<int>();

    s.canonical = Video(t, h, w, 3);
    read_blob(dir / "canonical.f32", s.canonical.data.data(), s.canonical.data.size());
    s.target = Video(t, h, w, 3);
    read_blob(dir / "target.f32", s.target.data.data(), s.target.data.size());

    s.depth0 = DepthMap(h, w);
    read_blob(dir / "depth0.f64", s.depth0.values.data(), s.depth0.values.size());
    read_blob(dir / "depth0_valid.u8", s.depth0.valid.data(), s.depth0.valid.size());

    std::vector<double> pos(static_cast<size_t>(n) * t * 2);
    std::vector<uint8_t> vis(static_cast<size_t>(n) * t);
    std::vector<int32_t> obj(n);
    std::vector<uint8_t> role(n);
    read_blob(dir / "tracks_pos.f64", pos.data(), pos.size());
    read_blob(dir / "tracks_vis.u8", vis.data(), vis.size());
    read_blob(dir / "tracks_obj.i32", obj.data(), obj.size());
    read_blob(dir / "tracks_role.u8", role.data(), role.size());

    s.tracks.height = h;
    s.tracks.width = w;
    for (int i = 0; i < n; ++i) {
        std::vector<Vec2> p(t);
        std::vector<uint8_t> v(t);
        for (int u = 0; u < t; ++u) {
            p[u] = {pos[(static_cast<size_t>(i) * t + u) * 2],
                    pos[(static_cast<size_t>(i) * t + u) * 2 + 1]};
            v[u] = vis[static_cast<size_t>(i) * t + u];
        }
        s.tracks.push_track(std::move(p), std::move(v), obj[i], static_cast<Role>(role[i]));
    }

    std::vector<double> poses(static_cast<size_t>(t) * 12);
    read_blob(dir / "poses.f64", poses.data(), poses.size());
    s.path.intrinsics = s.spec.intrinsics;
    s.path.poses.resize(t);
    for (int u = 0; u < t; ++u) {
        for (int i = 0; i < 9; ++i) s.path.poses[u].rotation.m[i] = poses[u * 12 + i];
        s.path.poses[u].translation = {poses[u * 12 + 9], poses[u * 12 + 10],
                                       poses[u * 12 + 11]};
    }
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

void write_checkpoint(const fs::path& dir, DualStreamModel& model) {
    fs::create_directories(dir);
    json params = json::array();
    std::vector<double> blob;
    for (const auto& p : model.params()) {
        params.push_back({{"name", p.name},
                          {"shape", p.value->shape},
                          {"offset", blob.size()}});
        blob.insert(blob.end(), p.value->data.begin(), p.value->data.end());
    }
    write_blob(dir / "weights.bin", blob.data(), blob.size());
    write_json_file(dir / "checkpoint.json",
                    json{{"schema_version", kSchemaVersion},
                         {"code_version", kCodeVersion},
                         {"model_config", model_config_to_json(model.config())},
                         {"params", params},
                         {"total_doubles", blob.size()}});
}

LoadedCheckpoint read_checkpoint(const fs::path& dir) {
    const json j = read_json_file(dir / "checkpoint.json");
    check_schema(j, "checkpoint " + dir.string());

    LoadedCheckpoint out;
    out.config = model_config_from_json(j.at("model_config"));
    out.model = std::make_unique<DualStreamModel>(out.config, /*init_seed=*/0);

    const size_t total = j.at("total_doubles").get<size_t>();
    std::vector<double> blob(total);
    read_blob(dir / "weights.bin", blob.data(), blob.size());

    std::vector<std::string> missing, mismatched;
    std::vector<std::string> seen;
    for (const auto& jp : j.at("params")) {
        const std::string name = jp.at("name").get<std::string>();
        seen.push_back(name);
        Tensor* t = out.model->find_param(name);
        if (!t) {
            missing.push_back(name);
            continue;
        }
        const auto shape = jp.at("shape").get<std::vector<int64_t>>();
        if (shape != t->shape) {
            mismatched.push_back(name);
            continue;
        }
        const size_t offset = jp.at("offset").get<size_t>();
        require(offset + t->data.size() <= blob.size(),
                "checkpoint: blob overrun for " + name);
        std::copy(blob.begin() + offset, blob.begin() + offset + t->data.size(),
                  t->data.begin());
    }
    for (const auto& p : out.model->params()) {
        if (std::find(seen.begin(), seen.end(), p.name) == seen.end())
            missing.push_back(p.name);
    }
    if (!missing.empty() || !mismatched.empty()) {
        std::string msg = "checkpoint: structural mismatch against its config echo;";
        if (!missing.empty()) {
            msg += " missing/unknown:";
            for (const auto& m : missing) msg += " " + m;
        }
        if (!mismatched.empty()) {
            msg += " shape mismatch:";
            for (const auto& m : mismatched) msg += " " + m;
        }
        fail_invalid(msg);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run manifests, raw clips, PPM
// ---------------------------------------------------------------------------

RunClock::RunClock() : started_at(timestamp_utc()) {}

void write_run_manifest(const fs::path& dir, const std::string& command,
                        const json& config_echo, uint64_t seed,
                        const std::vector<std::string>& artifacts, const RunClock& clock) {
    fs::create_directories(dir);
    write_json_file(dir / "run_manifest.json", json{{"schema_version", kSchemaVersion},
                                                    {"command", command},
                                                    {"config", config_echo},
                                                    {"seed", seed},
                                                    {"code_version", kCodeVersion},
                                                    {"started_at", clock.started_at},
                                                    {"finished_at", timestamp_utc()},
                                                    {"artifacts", artifacts}});
}

void write_video_f32(const fs::path& file, const Video& clip) {
    write_blob(file, clip.data.data(), clip.data.size());
}

Video read_video_f32(const fs::path& file, int t, int h, int w, int c) {
    Video v(t, h, w, c);
    read_blob(file, v.data.data(), v.data.size());
    return v;
}

void write_ppm_sequence(const fs::path& dir, const Video& clip) {
    fs::create_directories(dir);
    for (int t = 0; t < clip.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.ppm", t);
        std::ofstream out(dir / name, std::ios::binary);
        out << "P6\n" << clip.width << " " << clip.height << "\n255\n";
        for (int y = 0; y < clip.height; ++y)
            for (int x = 0; x < clip.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    const float v = clip.at(t, y, x, std::min(c, clip.channels - 1));
                    const int q = std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
                    out.put(static_cast<char>(q));
                }
    }
}

}  // namespace dsv
