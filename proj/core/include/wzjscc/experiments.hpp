#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wzjscc/codec.hpp"
#include "wzjscc/data.hpp"
#include "wzjscc/metrics.hpp"
#include "wzjscc/training.hpp"

namespace wzjscc::exp {

struct ExperimentConfig {
    data::DatasetSpec dataset;
    codec::ModelConfig model;
    train::TrainConfig train;
    std::vector<double> eval_snr_grid_db{-5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5};
    int eval_repeats = 10;
    std::filesystem::path output_dir = "runs";
    std::string run_id = "run";
    /// "surrogate", "official" (the converted asset under the asset dir) or a file path.
    std::string lpips_net = "surrogate";
    std::uint64_t eval_seed = 0x45564131ull;
    /// Evaluation worker threads; results do not depend on this.
    int eval_threads = 1;

    void validate() const;
    std::filesystem::path run_dir() const { return output_dir / run_id; }
};

void to_json(nlohmann::json& j, const ExperimentConfig& config);
/// Every field is optional. Model image dims and power budget default to
/// the dataset's and the training config's.
void from_json(const nlohmann::json& j, ExperimentConfig& config);

ExperimentConfig load_config(const std::filesystem::path& path);
/// SHA-256 of the canonical JSON form with all defaults filled in.
std::string config_hash(const ExperimentConfig& config);

metrics::FeatureNet resolve_feature_net(const std::string& spec);

struct EvalRecord {
    double snr_db = 0.0;
    double psnr = 0.0;
    double psnr_std = 0.0;
    double msssim = 0.0;
    double msssim_std = 0.0;
    double lpips = 0.0;
    double lpips_std = 0.0;
};

/// Seed of the noise realization for (image, repeat); the same at every SNR.
std::uint64_t eval_noise_seed(std::uint64_t eval_seed, std::size_t image, int repeat);

/// Per SNR: every image is transmitted `repeats` times, its metrics are
/// averaged over the repeats, and the mean and population std are taken
/// across images.
std::vector<EvalRecord> evaluate(const codec::VariantModel& model, std::span<const data::StereoPair> test_set,
                                 std::span<const double> snr_grid_db, int repeats, std::uint64_t eval_seed,
                                 const metrics::FeatureNet& net, int threads = 1);

enum class Metric { psnr, msssim, lpips };
inline constexpr std::array<Metric, 3> kMetrics{Metric::psnr, Metric::msssim, Metric::lpips};
std::string_view to_string(Metric metric);
/// `model/snr,test/<metric>,test/<metric>_std`
std::string csv_header(Metric metric);
bool higher_is_better(Metric metric);

std::string format_csv(std::span<const EvalRecord> records, Metric metric);
/// Writes `<prefix>_<metric>.csv` for each metric; returns the paths.
std::vector<std::filesystem::path> write_eval_csvs(const std::filesystem::path& dir,
                                                   std::span<const EvalRecord> records,
                                                   const std::string& prefix = "eval");

struct CurveRow {
    double snr_db = 0.0;
    double value = 0.0;
    double std = 0.0;
};

struct Curve {
    std::string label;
    Metric metric = Metric::psnr;
    std::vector<CurveRow> rows;
};

/// Strict parser: the header must match csv_header exactly.
Curve read_curve(const std::filesystem::path& path);

struct TrainArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    std::filesystem::path manifest;
    train::TrainLog train_log;
};

/// Trains the configured variant; refuses to reuse an existing run directory
/// unless `force` is set.
TrainArtifacts cmd_train(const ExperimentConfig& config, bool force = false);

struct EvalArtifacts {
    std::vector<std::filesystem::path> csvs;
    std::filesystem::path manifest;
    std::vector<EvalRecord> records;
};

/// Sweeps the SNR grid on the test split. Output goes to `out_dir`, or the
/// run directory when empty.
EvalArtifacts cmd_eval(const std::filesystem::path& checkpoint, const ExperimentConfig& config,
                       const std::filesystem::path& out_dir = {});

struct CompareArtifacts {
    std::vector<std::filesystem::path> plots;
    std::filesystem::path table;
    /// Rendered delta table.
    std::string summary;
};

/// One SVG per metric present in `csvs`, plus a per-SNR delta table against
/// `baseline` (a curve label; the first curve of each metric when empty).
CompareArtifacts cmd_compare(std::span<const std::filesystem::path> csvs, const std::filesystem::path& out_dir,
                             const std::string& baseline = {});

} // namespace wzjscc::exp
