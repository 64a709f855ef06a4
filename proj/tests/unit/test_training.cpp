#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"
#include "wzjscc/training.hpp"

using namespace wzjscc;
using namespace wzjscc::train;
using nn::Shape;
using nn::Tensor;

namespace {

codec::ModelConfig toy(codec::VariantKind v, std::uint64_t seed = 0) {
    codec::ModelConfig c;
    c.variant = v;
    c.rho = 1.0 / 8.0;
    c.base_width = 4;
    c.image = {3, 16, 32};
    c.seed = seed;
    return c;
}

std::vector<data::StereoPair> pairs(std::size_t n, std::uint64_t seed = 1) {
    data::SyntheticConfig cfg;
    cfg.counts = {n, 0, 0};
    cfg.seed = seed;
    return data::generate_synthetic(cfg, data::Split::train);
}

TrainConfig fast(std::uint64_t seed = 0) {
    TrainConfig c;
    c.learning_rate = 1e-3;
    c.batch_size = 4;
    c.lambda_lpips = 0.0;
    c.seed = seed;
    c.val_snr_grid = {0.0};
    return c;
}

} // namespace

TEST(CompositeLoss, ReferenceValues) {
    const ImageTensor a(3, 4, 4, std::vector<double>(48, 0.5));
    const ImageTensor b(3, 4, 4, std::vector<double>(48, 0.6));
    EXPECT_NEAR(composite_loss(a, b, 0.0, nullptr), 0.01, 1e-15);
    const auto net = metrics::FeatureNet::surrogate();
    EXPECT_EQ(composite_loss(a, a, 0.0, nullptr), 0.0);
    EXPECT_NEAR(composite_loss(a, a, 0.7, &net), 0.0, 1e-15);
    const ImageTensor c(3, 4, 4, oracle::uniform(48, 0, 1, 3));
    EXPECT_NEAR(composite_loss(a, c, 0.5, &net),
                composite_loss(a, c, 0.0, nullptr) + 0.5 * metrics::lpips(a, c, net), 1e-12);
}

TEST(CompositeLoss, Errors) {
    const ImageTensor a(3, 4, 4);
    const ImageTensor b(3, 4, 8);
    EXPECT_THROW(composite_loss(a, b, 0.0, nullptr), InvalidArgument);
    EXPECT_THROW(composite_loss(a, a, 0.5, nullptr), InvalidArgument);
    EXPECT_THROW(composite_loss(a, a, -1.0, nullptr), InvalidArgument);
}

TEST(CompositeLoss, GradientMatchesFiniteDifferences) {
    const auto net = metrics::FeatureNet::surrogate();
    const Shape s{1, 3, 4, 4};
    const auto xv = oracle::uniform(48, 0, 1, 1);
    const auto hv = oracle::uniform(48, 0, 1, 2);
    for (double lambda : {0.0, 0.5}) {
        const Tensor x = Tensor::constant(s, xv);
        const Tensor h = Tensor::parameter(s, hv);
        composite_loss(x, h, lambda, &net).backward();
        const auto f = [&](const std::vector<double>& v) {
            nn::NoGradGuard g;
            return composite_loss(x, Tensor::constant(s, v), lambda, &net).item();
        };
        const auto numeric = oracle::finite_difference(f, hv, 1e-6);
        const std::vector<double> analytic(h.grad().begin(), h.grad().end());
        EXPECT_LT(oracle::max_relative_error(analytic, numeric), lambda == 0.0 ? 1e-3 : 1e-2) << lambda;
    }
}

TEST(SnrSampling, UniformOnTheTrainingRange) {
    Rng rng = make_stream(3, "train-snr");
    TrainConfig c;
    std::vector<double> s(10'000);
    for (double& v : s) {
        v = sample_snr_db(rng, c);
        ASSERT_GE(v, -5.0);
        ASSERT_LE(v, 5.0);
    }
    EXPECT_LT(oracle::ks_uniform(s, -5.0, 5.0), 0.02);
}

TEST(TrainConfig, ValidationAndJson) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.learning_rate, 1e-4);
    EXPECT_EQ(c.batch_size, 32);
    EXPECT_EQ(c.snr_min_db, -5.0);
    EXPECT_EQ(c.snr_max_db, 5.0);
    EXPECT_EQ(nlohmann::json(c).get<TrainConfig>(), c);
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.snr_min_db = 6.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.lambda_lpips = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Tensor p = Tensor::parameter(Shape{1, 2, 1, 1}, {1.0, -2.0});
    Adam opt({{"p", p}}, 0.01);
    nn::mse(p, Tensor::constant(Shape{1, 2, 1, 1}, {0.0, 0.0})).backward();
    opt.step(0.0);
    // The bias-corrected first step is lr · g/(|g| + eps).
    EXPECT_NEAR(p.data()[0], 1.0 - 0.01, 1e-9);
    EXPECT_NEAR(p.data()[1], -2.0 + 0.01, 1e-9);
}

TEST(Adam, ClippingReportsTheRawNorm) {
    Tensor p = Tensor::parameter(Shape{1, 1, 1, 1}, {10.0});
    Adam opt({{"p", p}}, 0.1);
    nn::scale(nn::mul(p, p), 0.5).backward();
    EXPECT_NEAR(opt.step(1.0), 10.0, 1e-12);
}

TEST(TrainStep, DeterministicUnderSeed) {
    const auto data = pairs(4);
    std::vector<double> runs[2];
    for (auto& losses : runs) {
        codec::VariantModel m = codec::build_model(toy(codec::VariantKind::wz));
        Trainer t(m, fast(7), mse_loss());
        for (int i = 0; i < 3; ++i) {
            losses.push_back(t.train_step(data).loss);
        }
    }
    EXPECT_EQ(runs[0], runs[1]);
}

TEST(TrainStep, OneSnrPerImageWithinRange) {
    const auto data = pairs(4);
    codec::VariantModel m = codec::build_model(toy(codec::VariantKind::point2point));
    Trainer t(m, fast(), mse_loss());
    const auto r = t.train_step(data);
    ASSERT_EQ(r.snr_db.size(), 4u);
    EXPECT_NE(r.snr_db[0], r.snr_db[1]);
    for (double s : r.snr_db) {
        EXPECT_GE(s, -5.0);
        EXPECT_LE(s, 5.0);
    }
}

TEST(TrainStep, OverfitsASmallSet) {
    const auto data = pairs(4);
    codec::VariantModel m = codec::build_model(toy(codec::VariantKind::wz));
    TrainConfig c = fast();
    c.check_power = true;
    Trainer t(m, c, mse_loss());
    const double first = t.train_step(data).loss;
    double last = first;
    for (int i = 1; i < 50; ++i) {
        last = t.train_step(data).loss;
    }
    EXPECT_LT(last, first);
}

TEST(TrainStep, LambdaZeroEqualsPureMse) {
    const auto data = pairs(4);
    const auto net = metrics::FeatureNet::surrogate();
    codec::VariantModel a = codec::build_model(toy(codec::VariantKind::wz));
    codec::VariantModel b = codec::build_model(toy(codec::VariantKind::wz));
    Trainer ta(a, fast(3), make_composite_loss(0.0, &net));
    Trainer tb(b, fast(3), mse_loss());
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(ta.train_step(data).loss, tb.train_step(data).loss) << i;
    }
    // Interleaved updates on differently placed buffers must still agree bit for bit.
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::ranges::equal(pa[i].tensor.data(), pb[i].tensor.data())) << pa[i].name;
    }
}

TEST(TrainStep, NanLossAbortsWithDiagnostics) {
    auto data = pairs(2);
    data[1].x.pixels()[0] = std::numeric_limits<double>::quiet_NaN();
    codec::VariantModel m = codec::build_model(toy(codec::VariantKind::point2point));
    Trainer t(m, fast(), mse_loss());
    try {
        t.train_step(data);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("SNR"), std::string::npos) << msg;
        EXPECT_NE(msg.find(data[1].pair_id), std::string::npos) << msg;
    }
}

TEST(TrainStep, PowerBudgetMustMatchTheModel) {
    codec::VariantModel m = codec::build_model(toy(codec::VariantKind::point2point));
    TrainConfig c = fast();
    c.p_avg = 2.0;
    EXPECT_THROW(Trainer(m, c, mse_loss()), ConfigError);
}

TEST(Fit, PatienceWithConstantMetricStopsAfterPatiencePlusOneEpochs) {
    const auto train = pairs(4);
    const auto val = pairs(2, 9);
    for (int patience : {1, 3}) {
        TrainConfig c = fast();
        c.patience = patience;
        FitOptions opts;
        opts.validation_override = [](const codec::VariantModel&, int) { return 12.0; };
        const auto r = fit(codec::build_model(toy(codec::VariantKind::point2point)), train, val, c, mse_loss(), opts);
        EXPECT_EQ(r.log.epochs.size(), static_cast<std::size_t>(patience + 1));
        EXPECT_EQ(r.log.stop_reason, StopReason::patience_exhausted);
        EXPECT_EQ(r.log.best_epoch, 1);
    }
}

TEST(Fit, RestoresTheBestEpoch) {
    const auto train = pairs(4);
    const auto val = pairs(2, 9);
    TrainConfig c = fast();
    c.patience = 2;
    c.max_epochs = 6;
    const std::vector<double> script{10.0, 14.0, 13.0, 12.0, 20.0, 1.0};
    std::vector<std::vector<double>> snapshots;
    FitOptions opts;
    opts.validation_override = [&](const codec::VariantModel& m, int epoch) {
        const auto p = m.parameters().front().tensor.data();
        snapshots.emplace_back(p.begin(), p.end());
        return script[static_cast<std::size_t>(epoch - 1)];
    };
    const auto r = fit(codec::build_model(toy(codec::VariantKind::point2point)), train, val, c, mse_loss(), opts);
    EXPECT_EQ(r.log.epochs.size(), 4u);
    EXPECT_EQ(r.log.best_epoch, 2);
    const auto p = r.model.parameters().front().tensor.data();
    EXPECT_EQ(std::vector<double>(p.begin(), p.end()), snapshots[1]);
    for (const auto& e : r.log.epochs) {
        EXPECT_GE(14.0, e.val_psnr - 1e-9);
    }
}

TEST(Fit, ReturnedModelScoresTheBestLoggedPsnr) {
    const auto train = pairs(8);
    const auto val = pairs(2, 9);
    TrainConfig c = fast();
    c.max_epochs = 4;
    const auto r = fit(codec::build_model(toy(codec::VariantKind::wz)), train, val, c, mse_loss());
    double best = -1e300;
    for (const auto& e : r.log.epochs) {
        best = std::max(best, e.val_psnr);
    }
    const double got = validation_psnr(r.model, val, c.val_snr_grid, c.seed);
    EXPECT_NEAR(got, best, 1e-9);
    for (const auto& e : r.log.epochs) {
        EXPECT_GE(got, e.val_psnr - 1e-9);
    }
    EXPECT_EQ(r.log.stop_reason, StopReason::max_epochs);
}

TEST(Fit, StepBudgetAndMonotoneLog) {
    const auto train = pairs(8);
    const auto val = pairs(2, 9);
    TrainConfig c = fast();
    c.max_steps = 5;
    const auto r = fit(codec::build_model(toy(codec::VariantKind::point2point)), train, val, c, mse_loss());
    ASSERT_EQ(r.log.steps.size(), 5u);
    for (std::size_t i = 0; i < r.log.steps.size(); ++i) {
        EXPECT_EQ(r.log.steps[i].step, i + 1);
    }
    EXPECT_EQ(r.log.stop_reason, StopReason::max_steps);
    EXPECT_EQ(r.log.epochs.back().step, 5u);
    const std::string text = r.log.to_jsonl();
    EXPECT_NE(text.find("\"val_psnr\""), std::string::npos);
    EXPECT_NE(text.find("max_steps"), std::string::npos);
}

TEST(Fit, EmptySetsAreRejected) {
    const auto train = pairs(4);
    const std::vector<data::StereoPair> none;
    const auto m = codec::build_model(toy(codec::VariantKind::point2point));
    EXPECT_THROW(fit(m, train, none, fast(), mse_loss()), InvalidArgument);
    EXPECT_THROW(fit(m, none, train, fast(), mse_loss()), InvalidArgument);
}
