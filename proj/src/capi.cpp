#include "dsv.h"

#include <cstring>
#include <string>

#include "dsv/io.hpp"
#include "dsv/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

dsv_status to_status(dsv::ErrorCode code) {
    switch (code) {
        case dsv::ErrorCode::ok: return DSV_OK;
        case dsv::ErrorCode::invalid_input: return DSV_ERR_INVALID;
        case dsv::ErrorCode::usage: return DSV_ERR_USAGE;
        case dsv::ErrorCode::runtime_abort: return DSV_ERR_RUNTIME;
    }
    return DSV_ERR_RUNTIME;
}

template <typename Fn>
dsv_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return DSV_OK;
    } catch (const dsv::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DSV_ERR_RUNTIME;
    }
}

dsv_status usage_error(const char* what) {
    g_last_error = what;
    return DSV_ERR_USAGE;
}

}  // namespace

struct dsv_checkpoint {
    std::string dir;
    dsv::LoadedCheckpoint loaded;
};

struct dsv_sample {
    dsv::Sample sample;
    dsv::json info;
};

extern "C" {

const char* dsv_version(void) { return dsv::kCodeVersion; }

const char* dsv_last_error(void) { return g_last_error.c_str(); }

void dsv_string_free(char* s) { std::free(s); }

dsv_status dsv_gen_data(const char* config_path, const char* out_dir, int count,
                        uint64_t seed) {
    if (!out_dir) return usage_error("dsv_gen_data: out_dir is required");
    return guarded([&] {
        dsv::gen_data(config_path ? config_path : "", out_dir, count, seed);
    });
}

dsv_status dsv_train(const char* data_dir, const char* config_path, const char* out_dir) {
    if (!data_dir || !out_dir) return usage_error("dsv_train: data_dir and out_dir required");
    return guarded([&] {
        dsv::train_command(data_dir, config_path ? config_path : "", out_dir);
    });
}

dsv_status dsv_generate(const char* checkpoint_dir, const char* condition_path,
                        const char* out_dir, int steps, int has_seed, uint64_t seed) {
    if (!checkpoint_dir || !condition_path || !out_dir)
        return usage_error("dsv_generate: checkpoint, condition and out_dir required");
    return guarded([&] {
        dsv::sample_command(checkpoint_dir, condition_path, out_dir, steps,
                            has_seed ? std::optional<uint64_t>(seed) : std::nullopt);
    });
}

dsv_status dsv_eval(const char* generated_dir, const char* data_dir,
                    const char* report_path) {
    if (!generated_dir || !report_path)
        return usage_error("dsv_eval: generated_dir and report_path required");
    return guarded([&] {
        dsv::eval_command(generated_dir, data_dir ? data_dir : "", report_path);
    });
}

dsv_status dsv_inspect(const char* path, char** out_text) {
    if (!path || !out_text) return usage_error("dsv_inspect: path and out_text required");
    return guarded([&] { *out_text = dup_string(dsv::inspect_command(path)); });
}

dsv_status dsv_checkpoint_open(const char* dir, dsv_checkpoint** out) {
    if (!dir || !out) return usage_error("dsv_checkpoint_open: dir and out required");
    return guarded([&] {
        auto* handle = new dsv_checkpoint{dir, dsv::read_checkpoint(dir)};
        *out = handle;
    });
}

void dsv_checkpoint_close(dsv_checkpoint* ckpt) { delete ckpt; }

int64_t dsv_checkpoint_param_count(const dsv_checkpoint* ckpt) {
    return ckpt && ckpt->loaded.model ? ckpt->loaded.model->param_count() : 0;
}

dsv_status dsv_checkpoint_config_json(const dsv_checkpoint* ckpt, char** out_text) {
    if (!ckpt || !out_text)
        return usage_error("dsv_checkpoint_config_json: handle and out required");
    return guarded([&] {
        *out_text = dup_string(dsv::model_config_to_json(ckpt->loaded.config).dump());
    });
}

dsv_status dsv_checkpoint_sample(dsv_checkpoint* ckpt, const char* condition_path,
                                 const char* out_dir, int steps, int has_seed, uint64_t seed) {
    if (!ckpt || !condition_path || !out_dir)
        return usage_error("dsv_checkpoint_sample: handle, condition and out_dir required");
    return guarded([&] {
        dsv::sample_with_checkpoint(ckpt->loaded, ckpt->dir, condition_path, out_dir, steps,
                                    has_seed ? std::optional<uint64_t>(seed) : std::nullopt);
    });
}

dsv_status dsv_sample_open(const char* dir, dsv_sample** out) {
    if (!dir || !out) return usage_error("dsv_sample_open: dir and out required");
    return guarded([&] {
        auto* handle = new dsv_sample{dsv::read_sample(dir),
                                      dsv::read_json_file(std::filesystem::path(dir) /
                                                          "manifest.json")};
        *out = handle;
    });
}

void dsv_sample_close(dsv_sample* sample) { delete sample; }

dsv_status dsv_sample_info_json(const dsv_sample* sample, char** out_text) {
    if (!sample || !out_text)
        return usage_error("dsv_sample_info_json: handle and out required");
    return guarded([&] { *out_text = dup_string(sample->info.dump()); });
}

dsv_status dsv_sample_clip(const dsv_sample* sample, int which, float* buffer,
                           size_t buffer_len) {
    if (!sample || !buffer) return usage_error("dsv_sample_clip: handle and buffer required");
    return guarded([&] {
        const dsv::Video& clip = which == 0 ? sample->sample.canonical : sample->sample.target;
        dsv::require(buffer_len == clip.data.size(),
                     "dsv_sample_clip: buffer holds " + std::to_string(buffer_len) +
                         " floats, clip needs " + std::to_string(clip.data.size()));
        std::memcpy(buffer, clip.data.data(), clip.data.size() * sizeof(float));
    });
}

}  // extern "C"
