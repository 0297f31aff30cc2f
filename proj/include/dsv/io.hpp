#ifndef DSV_IO_HPP
#define DSV_IO_HPP

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "dsv/model.hpp"
#include "dsv/synth.hpp"

namespace dsv {

constexpr int kSchemaVersion = 1;
constexpr const char* kCodeVersion = "dsv 0.1.0";

using json = nlohmann::json;

json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const json& j);

json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);

// Sample directory: manifest.json plus named raw little-endian tensor files.
// Clips are float32; depth, tracks and poses are float64 (the geometry
// oracles demand 64-bit); flags are u8, object ids i32. Row-major flattening
// throughout, so read(write(s)) == s bit-exactly.
void write_sample(const std::filesystem::path& dir, const Sample& sample);
Sample read_sample(const std::filesystem::path& dir);

// Checkpoint: checkpoint.json (config echo + flat parameter manifest with
// offsets) plus weights.bin (float64 blob).
void write_checkpoint(const std::filesystem::path& dir, DualStreamModel& model);

struct LoadedCheckpoint {
    ModelConfig config;
    std::unique_ptr<DualStreamModel> model;
};
LoadedCheckpoint read_checkpoint(const std::filesystem::path& dir);

// Every command drops exactly one run manifest into its artifact directory.
// Construct the clock when the command starts; writing stamps the end.
struct RunClock {
    std::string started_at;
    RunClock();
};
void write_run_manifest(const std::filesystem::path& dir, const std::string& command,
                        const json& config_echo, uint64_t seed,
                        const std::vector<std::string>& artifacts, const RunClock& clock);

void write_video_f32(const std::filesystem::path& file, const Video& clip);
Video read_video_f32(const std::filesystem::path& file, int t, int h, int w, int c);

// Lossless 8-bit PPM dump for human inspection; tensors stay authoritative.
void write_ppm_sequence(const std::filesystem::path& dir, const Video& clip);

json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const json& j);

}  // namespace dsv

#endif
