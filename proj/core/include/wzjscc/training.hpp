#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wzjscc/codec.hpp"
#include "wzjscc/data.hpp"
#include "wzjscc/metrics.hpp"
#include "wzjscc/rng.hpp"

namespace wzjscc::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    double p_avg = 1.0;
    double snr_min_db = -5.0;
    double snr_max_db = 5.0;
    double lambda_lpips = 0.5;
    int patience = 10;
    int max_epochs = 500;
    /// Optimizer step budget; 0 means unlimited.
    std::size_t max_steps = 0;
    std::uint64_t seed = 0;
    /// Global gradient-norm bound; 0 disables clipping.
    double grad_clip = 1.0;
    std::vector<double> val_snr_grid{-5.0, -3.0, -1.0, 1.0, 3.0, 5.0};
    /// Asserts the channel power constraint on every forward pass.
    bool check_power = false;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

enum class StopReason { none, patience_exhausted, max_epochs, max_steps };
std::string_view to_string(StopReason reason);

struct StepRecord {
    std::size_t step = 0;
    int epoch = 0;
    double loss = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    /// Index of the last optimizer step in this epoch.
    std::size_t step = 0;
    double val_psnr = 0.0;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    StopReason stop_reason = StopReason::none;

    /// One JSON object per line: step records carry `loss`, epoch records
    /// carry `val_psnr`; the last line is the summary.
    std::string to_jsonl() const;
    void write(const std::filesystem::path& path) const;
};

/// Loss over a batch: takes (x, x_hat), returns a scalar tensor.
using LossFn = std::function<nn::Tensor(const nn::Tensor&, const nn::Tensor&)>;

/// MSE(x, x_hat) + lambda · LPIPS(x, x_hat), both averaged over the batch.
/// With lambda = 0 the LPIPS term is not evaluated and `net` may be null.
nn::Tensor composite_loss(const nn::Tensor& x, const nn::Tensor& x_hat, double lambda,
                          const metrics::FeatureNet* net);
double composite_loss(const ImageTensor& x, const ImageTensor& x_hat, double lambda,
                      const metrics::FeatureNet* net);

LossFn mse_loss();
LossFn make_composite_loss(double lambda, const metrics::FeatureNet* net);

double sample_snr_db(Rng& rng, const TrainConfig& config);

/// Adam with optional global-norm gradient clipping.
class Adam {
public:
    Adam(std::vector<nn::NamedTensor> parameters, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void zero_grad();
    /// Applies one update from the accumulated gradients; returns the
    /// pre-clipping global gradient norm.
    double step(double clip_norm);
    std::size_t steps() const noexcept { return t_; }

private:
    std::vector<nn::NamedTensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::size_t t_ = 0;
};

struct StepResult {
    double loss = 0.0;
    std::vector<double> snr_db;
    double grad_norm = 0.0;
};

/// Owns the optimizer and the SNR/noise streams for one training run.
class Trainer {
public:
    Trainer(codec::VariantModel& model, TrainConfig config, LossFn loss);

    /// One SNR per image, channel in the loop, one optimizer update.
    StepResult train_step(std::span<const data::StereoPair> batch);
    /// Forward and backward only; leaves gradients in the parameters.
    StepResult compute_gradients(std::span<const data::StereoPair> batch);

    const TrainConfig& config() const noexcept { return config_; }
    std::size_t steps() const noexcept { return optimizer_.steps(); }

private:
    codec::VariantModel& model_;
    TrainConfig config_;
    LossFn loss_;
    Adam optimizer_;
    Rng snr_rng_;
    Rng noise_rng_;
};

/// Mean PSNR over the grid, each grid point averaged over `images`. Noise
/// seeds depend only on (seed, image index).
double validation_psnr(const codec::VariantModel& model, std::span<const data::StereoPair> images,
                       std::span<const double> snr_grid_db, std::uint64_t seed);

struct FitOptions {
    /// Replaces the validation metric (for testing the stopping rule).
    std::function<double(const codec::VariantModel&, int epoch)> validation_override;
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
    codec::VariantModel model;
    TrainLog log;
};

/// Shuffled mini-batch epochs with early stopping on validation PSNR; the
/// returned model carries the parameters of the best epoch.
FitResult fit(const codec::VariantModel& initial, std::span<const data::StereoPair> train_set,
              std::span<const data::StereoPair> val_set, const TrainConfig& config, const LossFn& loss,
              const FitOptions& options = {});
FitResult fit(const codec::VariantModel& initial, std::span<const data::StereoPair> train_set,
              std::span<const data::StereoPair> val_set, const TrainConfig& config,
              const metrics::FeatureNet* net);

} // namespace wzjscc::train
