// Command-line front end: train, eval, compare, synth-data, inspect-checkpoint.
//
// Exit codes: 0 success, 2 configuration or argument error, 3 missing data
// or asset, 4 numerical failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wzjscc/checkpoint.hpp"
#include "wzjscc/data.hpp"
#include "wzjscc/errors.hpp"
#include "wzjscc/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

namespace fs = std::filesystem;
using namespace wzjscc;

int run_train(const fs::path& config_path, bool force) {
    const auto config = exp::load_config(config_path);
    const auto out = exp::cmd_train(config, force);
    fmt::print("run {}: best epoch {}, stopped: {}\n", config.run_id, out.train_log.best_epoch,
               train::to_string(out.train_log.stop_reason));
    fmt::print("checkpoint {}\nlog        {}\nmanifest   {}\n", out.checkpoint.string(), out.log.string(),
               out.manifest.string());
    return kExitOk;
}

int run_eval(const fs::path& config_path, const fs::path& checkpoint, const fs::path& out_dir) {
    const auto config = exp::load_config(config_path);
    const fs::path ckpt = checkpoint.empty() ? config.run_dir() / "model.ckpt" : checkpoint;
    const auto out = exp::cmd_eval(ckpt, config, out_dir);
    fmt::print("{:>8} {:>10} {:>10} {:>10}\n", "snr_db", "psnr", "msssim", "lpips");
    for (const auto& r : out.records) {
        fmt::print("{:>8} {:>10.4f} {:>10.4f} {:>10.4f}\n", r.snr_db, r.psnr, r.msssim, r.lpips);
    }
    for (const auto& p : out.csvs) {
        fmt::print("wrote {}\n", p.string());
    }
    return kExitOk;
}

int run_compare(const std::vector<std::string>& csvs, const fs::path& out_dir, const std::string& baseline) {
    std::vector<fs::path> paths(csvs.begin(), csvs.end());
    const auto out = exp::cmd_compare(paths, out_dir, baseline);
    fmt::print("{}", out.summary);
    for (const auto& p : out.plots) {
        fmt::print("wrote {}\n", p.string());
    }
    fmt::print("wrote {}\n", out.table.string());
    return kExitOk;
}

int run_inspect(const fs::path& path, bool as_json) {
    const auto info = codec::inspect_checkpoint(path);
    if (as_json) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : info.parameters) {
            params.push_back({{"name", p.name}, {"shape", {p.shape.n, p.shape.c, p.shape.h, p.shape.w}}});
        }
        const nlohmann::json j{{"version", info.version},
                               {"config", info.config},
                               {"total_parameters", info.total_parameters},
                               {"bandwidth_k", info.config.bandwidth()},
                               {"parameters", params}};
        fmt::print("{}\n", j.dump(2));
        return kExitOk;
    }
    fmt::print("format version  {}\n", info.version);
    fmt::print("variant         {}\n", codec::to_string(info.config.variant));
    fmt::print("rho             {}\n", info.config.rho);
    fmt::print("image           {}x{}x{}\n", info.config.image.channels, info.config.image.height,
               info.config.image.width);
    fmt::print("bandwidth k     {}\n", info.config.bandwidth());
    fmt::print("parameters      {}\n", info.total_parameters);
    fmt::print("tensors         {}\n", info.parameters.size());
    for (const auto& p : info.parameters) {
        fmt::print("  {:<48} {}\n", p.name, p.shape.str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned joint source-channel coding with decoder side information"};
    app.require_subcommand(1);
    std::string asset_dir;
    app.add_option("--asset-dir", asset_dir, "Directory holding pretrained assets (overrides WZJSCC_ASSET_DIR)");

    fs::path config_path;
    bool force = false;
    auto* train_cmd = app.add_subcommand("train", "Train one variant from a JSON experiment config");
    train_cmd->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    train_cmd->add_flag("--force", force, "Overwrite an existing run directory");

    fs::path checkpoint;
    fs::path eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "Sweep the evaluation SNR grid and write metric CSVs");
    eval_cmd->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default: <output_dir>/<run_id>/model.ckpt)");
    eval_cmd->add_option("-o,--out", eval_out, "Output directory (default: the run directory)");

    std::vector<std::string> csvs;
    fs::path compare_out = "compare";
    std::string baseline;
    auto* compare_cmd = app.add_subcommand("compare", "Plot metric CSVs and tabulate deltas against a baseline");
    compare_cmd->add_option("csvs", csvs, "Metric CSV files")->required();
    compare_cmd->add_option("-o,--out", compare_out, "Output directory");
    compare_cmd->add_option("--baseline", baseline, "Baseline curve label (default: first CSV per metric)");

    data::SyntheticConfig synth;
    fs::path synth_out;
    std::string mode = "additive_noise";
    auto* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic correlated stereo dataset as PNGs");
    synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--mode", mode, "additive_noise | shift | independent");
    synth_cmd->add_option("--height", synth.height);
    synth_cmd->add_option("--width", synth.width);
    synth_cmd->add_option("--noise-std", synth.noise_std);
    synth_cmd->add_option("--shift-px", synth.shift_px);
    synth_cmd->add_option("--smoothness", synth.smoothness);
    synth_cmd->add_option("--train", synth.counts.train);
    synth_cmd->add_option("--val", synth.counts.val);
    synth_cmd->add_option("--test", synth.counts.test);
    synth_cmd->add_option("--seed", synth.seed);

    fs::path inspect_path;
    bool as_json = false;
    auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's configuration and tensors");
    inspect_cmd->add_option("checkpoint", inspect_path)->required();
    inspect_cmd->add_flag("--json", as_json, "Machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (!asset_dir.empty()) {
        ::setenv("WZJSCC_ASSET_DIR", asset_dir.c_str(), 1);
    }

    try {
        if (*train_cmd) {
            return run_train(config_path, force);
        }
        if (*eval_cmd) {
            return run_eval(config_path, checkpoint, eval_out);
        }
        if (*compare_cmd) {
            return run_compare(csvs, compare_out, baseline);
        }
        if (*synth_cmd) {
            synth.mode = data::parse_correlation_mode(mode);
            data::export_synthetic(synth, synth_out);
            fmt::print("wrote {} pairs to {}\n", synth.counts.train + synth.counts.val + synth.counts.test,
                       synth_out.string());
            return kExitOk;
        }
        if (*inspect_cmd) {
            return run_inspect(inspect_path, as_json);
        }
    } catch (const MissingResource& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitMissing;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const DegenerateInput& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
