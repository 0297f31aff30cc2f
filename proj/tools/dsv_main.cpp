// CLI for the dual-stream controllable video pipeline, linked against the
// C API only.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "dsv.h"

namespace {

int report(dsv_status status) {
    if (status != DSV_OK) {
        std::fprintf(stderr, "error: %d: %s\n", static_cast<int>(status), dsv_last_error());
    }
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dsv: dual-stream motion/camera-controllable video toy pipeline"};
    app.require_subcommand(1);

    std::string config, out, data_dir, checkpoint, generated, report_path, inspect_path;
    int count = 8;
    int steps = 0;
    uint64_t seed = 0;
    bool seed_set = false;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic paired-view dataset");
    gen->add_option("--config", config, "gen-data config JSON");
    gen->add_option("--out", out, "output dataset directory")->required();
    gen->add_option("--count", count, "number of samples");
    gen->add_option("--seed", seed, "base seed");

    auto* tr = app.add_subcommand("train", "train the dual-stream model on a dataset");
    tr->add_option("data", data_dir, "dataset directory")->required();
    tr->add_option("--config", config, "train config JSON (model + train sections)");
    tr->add_option("--out", out, "output run directory")->required();

    auto* sa = app.add_subcommand("sample", "generate clips from a checkpoint");
    sa->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    sa->add_option("--config", config, "condition spec JSON")->required();
    sa->add_option("--out", out, "output directory")->required();
    sa->add_option("--steps", steps, "ODE steps (overrides the condition spec)");
    sa->add_option("--seed", seed, "noise seed (overrides the condition spec)")
        ->each([&](const std::string&) { seed_set = true; });

    auto* ev = app.add_subcommand("eval", "controllability metrics for generated clips");
    ev->add_option("generated", generated, "generated clip directory (or parent)")->required();
    ev->add_option("--data", data_dir, "override dataset root for sample references");
    ev->add_option("--out", report_path, "report path (JSONL)")->required();

    auto* in = app.add_subcommand("inspect", "print shapes and manifests of an artifact");
    in->add_option("path", inspect_path, "artifact path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the reason and usage
        return 2;
    }

    if (gen->parsed()) {
        return report(dsv_gen_data(config.empty() ? nullptr : config.c_str(), out.c_str(),
                                   count, seed));
    }
    if (tr->parsed()) {
        return report(dsv_train(data_dir.c_str(), config.empty() ? nullptr : config.c_str(),
                                out.c_str()));
    }
    if (sa->parsed()) {
        return report(dsv_generate(checkpoint.c_str(), config.c_str(), out.c_str(), steps,
                                   seed_set ? 1 : 0, seed));
    }
    if (ev->parsed()) {
        return report(dsv_eval(generated.c_str(), data_dir.empty() ? nullptr : data_dir.c_str(),
                               report_path.c_str()));
    }
    if (in->parsed()) {
        char* text = nullptr;
        const dsv_status status = dsv_inspect(inspect_path.c_str(), &text);
        if (status == DSV_OK && text) {
            std::fputs(text, stdout);
            dsv_string_free(text);
        }
        return report(status);
    }
    return 2;
}
