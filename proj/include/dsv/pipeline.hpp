#ifndef DSV_PIPELINE_HPP
#define DSV_PIPELINE_HPP

#include <optional>
#include <string>

#include "dsv/io.hpp"

namespace dsv {

// The five pipeline commands behind the CLI and the C API. All of them throw
// dsv::Error on contract violations; exit-code mapping happens at the
// boundaries.

void gen_data(const std::string& config_path, const std::string& out_dir, int count,
              uint64_t seed);

void train_command(const std::string& data_dir, const std::string& config_path,
                   const std::string& out_dir);

void sample_command(const std::string& checkpoint_dir, const std::string& condition_path,
                    const std::string& out_dir, int steps_override,
                    std::optional<uint64_t> seed_override);

// Same as sample_command over an already-loaded checkpoint (the C-API handle
// path loads once and samples many times).
void sample_with_checkpoint(LoadedCheckpoint& ckpt, const std::string& checkpoint_dir,
                            const std::string& condition_path, const std::string& out_dir,
                            int steps_override, std::optional<uint64_t> seed_override);

void eval_command(const std::string& generated_dir, const std::string& data_dir,
                  const std::string& report_path);

std::string inspect_command(const std::string& path);

}  // namespace dsv

#endif
