#include "wzjscc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "wzjscc/channel.hpp"
#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"

namespace wzjscc::train {

using nn::Tensor;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(fmt::format("learning_rate must be positive, got {}", learning_rate));
    }
    if (batch_size < 1) {
        throw ConfigError(fmt::format("batch_size must be at least 1, got {}", batch_size));
    }
    if (!(p_avg > 0.0)) {
        throw ConfigError(fmt::format("p_avg must be positive, got {}", p_avg));
    }
    if (!(snr_min_db <= snr_max_db) || !std::isfinite(snr_min_db) || !std::isfinite(snr_max_db)) {
        throw ConfigError(fmt::format("snr range [{}, {}] is empty", snr_min_db, snr_max_db));
    }
    if (!(lambda_lpips >= 0.0)) {
        throw ConfigError(fmt::format("lambda_lpips must be nonnegative, got {}", lambda_lpips));
    }
    if (patience < 1 || max_epochs < 1) {
        throw ConfigError("patience and max_epochs must be at least 1");
    }
    if (grad_clip < 0.0) {
        throw ConfigError("grad_clip must be nonnegative");
    }
    if (val_snr_grid.empty()) {
        throw ConfigError("val_snr_grid must not be empty");
    }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate},
                       {"batch_size", c.batch_size},
                       {"p_avg", c.p_avg},
                       {"snr_range_db", {c.snr_min_db, c.snr_max_db}},
                       {"lambda_lpips", c.lambda_lpips},
                       {"patience", c.patience},
                       {"max_epochs", c.max_epochs},
                       {"max_steps", c.max_steps},
                       {"seed", c.seed},
                       {"grad_clip", c.grad_clip},
                       {"val_snr_grid", c.val_snr_grid},
                       {"check_power", c.check_power}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    const TrainConfig d;
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.p_avg = j.value("p_avg", d.p_avg);
    if (j.contains("snr_range_db")) {
        const auto& r = j.at("snr_range_db");
        if (!r.is_array() || r.size() != 2) {
            throw ConfigError("snr_range_db must be a two-element array");
        }
        c.snr_min_db = r[0].get<double>();
        c.snr_max_db = r[1].get<double>();
    } else {
        c.snr_min_db = d.snr_min_db;
        c.snr_max_db = d.snr_max_db;
    }
    c.lambda_lpips = j.value("lambda_lpips", d.lambda_lpips);
    c.patience = j.value("patience", d.patience);
    c.max_epochs = j.value("max_epochs", d.max_epochs);
    c.max_steps = j.value("max_steps", d.max_steps);
    c.seed = j.value("seed", d.seed);
    c.grad_clip = j.value("grad_clip", d.grad_clip);
    c.val_snr_grid = j.value("val_snr_grid", d.val_snr_grid);
    c.check_power = j.value("check_power", d.check_power);
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
    case StopReason::none:
        return "none";
    case StopReason::patience_exhausted:
        return "patience_exhausted";
    case StopReason::max_epochs:
        return "max_epochs";
    case StopReason::max_steps:
        return "max_steps";
    }
    return "unknown";
}

std::string TrainLog::to_jsonl() const {
    std::string out;
    std::size_t e = 0;
    auto emit_epoch = [&] {
        const auto& r = epochs[e++];
        out += nlohmann::json{{"step", r.step}, {"epoch", r.epoch}, {"val_psnr", r.val_psnr}}.dump();
        out += '\n';
    };
    for (const auto& s : steps) {
        out += nlohmann::json{{"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}}.dump();
        out += '\n';
        // Each epoch record follows the last step it covers.
        while (e < epochs.size() && epochs[e].step <= s.step) {
            emit_epoch();
        }
    }
    while (e < epochs.size()) {
        emit_epoch();
    }
    out += nlohmann::json{{"best_epoch", best_epoch}, {"stop_reason", std::string(to_string(stop_reason))}}.dump();
    out += '\n';
    return out;
}

void TrainLog::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << to_jsonl();
    if (!out) {
        throw ConfigError(fmt::format("cannot write training log {}", path.string()));
    }
}

// ---------------------------------------------------------------- losses

Tensor composite_loss(const Tensor& x, const Tensor& x_hat, double lambda, const metrics::FeatureNet* net) {
    if (x.shape() != x_hat.shape()) {
        throw InvalidArgument(
            fmt::format("composite_loss: shapes differ {} vs {}", x.shape().str(), x_hat.shape().str()));
    }
    if (lambda < 0.0) {
        throw InvalidArgument("composite_loss: lambda must be nonnegative");
    }
    Tensor loss = nn::mse(x, x_hat);
    if (lambda > 0.0) {
        if (net == nullptr) {
            throw InvalidArgument("composite_loss: lambda > 0 needs an LPIPS network");
        }
        loss = nn::add(loss, nn::scale(metrics::lpips_loss(x, x_hat, *net), lambda));
    }
    return loss;
}

double composite_loss(const ImageTensor& x, const ImageTensor& x_hat, double lambda, const metrics::FeatureNet* net) {
    if (!x.same_dims(x_hat)) {
        throw InvalidArgument("composite_loss: image dims differ");
    }
    nn::NoGradGuard guard;
    return composite_loss(to_batch(x), to_batch(x_hat), lambda, net).item();
}

LossFn mse_loss() {
    return [](const Tensor& x, const Tensor& x_hat) { return nn::mse(x, x_hat); };
}

LossFn make_composite_loss(double lambda, const metrics::FeatureNet* net) {
    if (lambda > 0.0 && net == nullptr) {
        throw InvalidArgument("composite loss with lambda > 0 needs an LPIPS network");
    }
    return [lambda, net](const Tensor& x, const Tensor& x_hat) { return composite_loss(x, x_hat, lambda, net); };
}

double sample_snr_db(Rng& rng, const TrainConfig& config) {
    std::uniform_real_distribution<double> dist(config.snr_min_db, config.snr_max_db);
    return dist(rng);
}

// ---------------------------------------------------------------- optimizer

Adam::Adam(std::vector<nn::NamedTensor> parameters, double learning_rate, double beta1, double beta2, double eps)
    : params_(std::move(parameters)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) {
        p.tensor.zero_grad();
    }
}

double Adam::step(double clip_norm) {
    double sq = 0.0;
    for (const auto& p : params_) {
        for (double g : p.tensor.grad()) {
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient norm");
    }
    const double factor = clip_norm > 0.0 && norm > clip_norm ? clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto grad = params_[i].tensor.grad();
        if (grad.empty()) {
            continue;
        }
        auto value = params_[i].tensor.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j] * factor;
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            value[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
    return norm;
}

// ---------------------------------------------------------------- trainer

namespace {

struct Batch {
    Tensor x;
    Tensor x_side;
};

Batch stack(std::span<const data::StereoPair> pairs) {
    std::vector<ImageTensor> xs;
    std::vector<ImageTensor> sides;
    xs.reserve(pairs.size());
    sides.reserve(pairs.size());
    for (const auto& p : pairs) {
        xs.push_back(p.x);
        sides.push_back(p.x_side);
    }
    return {to_batch(xs), to_batch(sides)};
}

void check_power_budget(const codec::VariantModel& model, const TrainConfig& config) {
    if (model.config().p_avg != config.p_avg) {
        throw ConfigError(fmt::format("model p_avg {} differs from training p_avg {}", model.config().p_avg,
                                      config.p_avg));
    }
}

} // namespace

Trainer::Trainer(codec::VariantModel& model, TrainConfig config, LossFn loss)
    : model_(model),
      config_(std::move(config)),
      loss_(std::move(loss)),
      optimizer_(model.parameters(), config_.learning_rate),
      snr_rng_(make_stream(config_.seed, "train-snr")),
      noise_rng_(make_stream(config_.seed, "train-noise")) {
    config_.validate();
    check_power_budget(model_, config_);
}

StepResult Trainer::compute_gradients(std::span<const data::StereoPair> batch) {
    if (batch.empty()) {
        throw InvalidArgument("train_step: empty batch");
    }
    StepResult result;
    std::vector<double> sigma2;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double snr = sample_snr_db(snr_rng_, config_);
        result.snr_db.push_back(snr);
        sigma2.push_back(channel::snr_to_sigma2(snr, config_.p_avg));
        seeds.push_back(noise_rng_());
    }
    const auto context = [&] {
        std::string snrs;
        std::string ids;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            snrs += fmt::format("{}{:.4f}", i == 0 ? "" : ", ", result.snr_db[i]);
            ids += fmt::format("{}{}", i == 0 ? "" : ", ", batch[i].pair_id);
        }
        return fmt::format("step {}; SNRs (dB) [{}]; pairs [{}]", optimizer_.steps() + 1, snrs, ids);
    };
    const Batch b = stack(batch);
    optimizer_.zero_grad();
    codec::LinkOutput link;
    try {
        link = codec::simulate_link(model_, b.x, b.x_side, sigma2, seeds, config_.check_power);
    } catch (const NumericalError& e) {
        throw NumericalError(fmt::format("{} at {}", e.what(), context()));
    } catch (const DegenerateInput& e) {
        throw DegenerateInput(fmt::format("{} at {}", e.what(), context()));
    }
    const Tensor loss = loss_(b.x, link.reconstruction);
    result.loss = loss.item();
    if (!std::isfinite(result.loss)) {
        throw NumericalError(fmt::format("loss is {} at {}", result.loss, context()));
    }
    loss.backward();
    return result;
}

StepResult Trainer::train_step(std::span<const data::StereoPair> batch) {
    StepResult result = compute_gradients(batch);
    result.grad_norm = optimizer_.step(config_.grad_clip);
    return result;
}

// ---------------------------------------------------------------- fit

double validation_psnr(const codec::VariantModel& model, std::span<const data::StereoPair> images,
                       std::span<const double> snr_grid_db, std::uint64_t seed) {
    if (images.empty()) {
        throw InvalidArgument("validation set is empty");
    }
    if (snr_grid_db.empty()) {
        throw InvalidArgument("validation SNR grid is empty");
    }
    nn::NoGradGuard guard;
    const Batch b = stack(images);
    std::vector<std::uint64_t> seeds(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        seeds[i] = derive_seed(seed, "validation", i);
    }
    double total = 0.0;
    for (double snr : snr_grid_db) {
        const std::vector<double> sigma2(images.size(), channel::snr_to_sigma2(snr, model.config().p_avg));
        const auto link = codec::simulate_link(model, b.x, b.x_side, sigma2, seeds);
        double acc = 0.0;
        for (std::size_t i = 0; i < images.size(); ++i) {
            acc += metrics::psnr(images[i].x, from_batch(link.reconstruction, static_cast<int>(i)));
        }
        total += acc / static_cast<double>(images.size());
    }
    return total / static_cast<double>(snr_grid_db.size());
}

FitResult fit(const codec::VariantModel& initial, std::span<const data::StereoPair> train_set,
              std::span<const data::StereoPair> val_set, const TrainConfig& config, const LossFn& loss,
              const FitOptions& options) {
    config.validate();
    if (train_set.empty()) {
        throw InvalidArgument("training set is empty");
    }
    if (val_set.empty()) {
        throw InvalidArgument("validation set is empty");
    }
    codec::VariantModel model = initial.clone();
    Trainer trainer(model, config, loss);
    Rng shuffle_rng = make_stream(config.seed, "shuffle");

    // Full batches only, unless the whole set is smaller than one batch.
    const std::size_t batch = std::min(static_cast<std::size_t>(config.batch_size), train_set.size());
    const std::size_t per_epoch = train_set.size() / batch;

    FitResult result{model.clone(), {}};
    TrainLog& log = result.log;
    double best = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<std::size_t> order(train_set.size());
    std::vector<data::StereoPair> chunk;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        bool budget_hit = false;
        for (std::size_t bi = 0; bi < per_epoch; ++bi) {
            chunk.clear();
            for (std::size_t j = 0; j < batch; ++j) {
                chunk.push_back(train_set[order[bi * batch + j]]);
            }
            const StepResult step = trainer.train_step(chunk);
            const StepRecord record{trainer.steps(), epoch, step.loss};
            log.steps.push_back(record);
            if (options.on_step) {
                options.on_step(record);
            }
            if (config.max_steps > 0 && trainer.steps() >= config.max_steps) {
                budget_hit = true;
                break;
            }
        }

        const double val = options.validation_override
                               ? options.validation_override(model, epoch)
                               : validation_psnr(model, val_set, config.val_snr_grid, config.seed);
        const EpochRecord record{epoch, trainer.steps(), val};
        log.epochs.push_back(record);
        if (options.on_epoch) {
            options.on_epoch(record);
        }
        if (val > best) {
            best = val;
            since_best = 0;
            log.best_epoch = epoch;
            result.model.load_parameters_from(model);
        } else {
            ++since_best;
        }

        if (since_best >= config.patience) {
            log.stop_reason = StopReason::patience_exhausted;
            break;
        }
        if (budget_hit) {
            log.stop_reason = StopReason::max_steps;
            break;
        }
        if (epoch == config.max_epochs) {
            log.stop_reason = StopReason::max_epochs;
        }
    }
    return result;
}

FitResult fit(const codec::VariantModel& initial, std::span<const data::StereoPair> train_set,
              std::span<const data::StereoPair> val_set, const TrainConfig& config, const metrics::FeatureNet* net) {
    return fit(initial, train_set, val_set, config, make_composite_loss(config.lambda_lpips, net));
}

} // namespace wzjscc::train
