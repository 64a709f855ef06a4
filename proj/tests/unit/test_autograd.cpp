#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wzjscc/channel.hpp"
#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"
#include "wzjscc/tensor.hpp"

using namespace wzjscc;
using namespace wzjscc::nn;

namespace {

// Reduces an op output to a scalar with fixed random weights so every
// output element contributes a distinct amount to the gradient.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed = 77) {
    const Tensor w = Tensor::constant(y.shape(), oracle::uniform(y.numel(), -1.0, 1.0, seed));
    return scale(mean(mul(y, w)), static_cast<double>(y.numel()));
}

using Op = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares the analytic gradient of every input against central differences.
void check_gradients(const Op& op, const std::vector<Shape>& shapes, std::uint64_t seed, double tol = 1e-6,
                     double lo = -1.0, double hi = 1.0) {
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        values.push_back(oracle::uniform(shapes[i].numel(), lo, hi, seed + i));
    }
    std::vector<Tensor> params;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        params.push_back(Tensor::parameter(shapes[i], values[i]));
    }
    weighted_sum(op(params)).backward();

    for (std::size_t i = 0; i < shapes.size(); ++i) {
        auto f = [&](const std::vector<double>& v) {
            NoGradGuard guard;
            std::vector<Tensor> in;
            for (std::size_t j = 0; j < shapes.size(); ++j) {
                in.push_back(Tensor::constant(shapes[j], j == i ? v : values[j]));
            }
            return weighted_sum(op(in)).item();
        };
        const auto numeric = oracle::finite_difference(f, values[i], 1e-6);
        const auto g = params[i].grad();
        ASSERT_EQ(g.size(), numeric.size()) << "input " << i;
        const std::vector<double> analytic(g.begin(), g.end());
        EXPECT_LT(oracle::max_relative_error(analytic, numeric, 1e-8), tol) << "input " << i;
    }
}

} // namespace

TEST(Tensor, FactoriesAndShape) {
    const Shape s{2, 3, 4, 5};
    EXPECT_EQ(s.numel(), 120u);
    EXPECT_EQ(s.item_size(), 60u);
    const Tensor z = Tensor::zeros(s);
    EXPECT_EQ(z.numel(), 120u);
    EXPECT_FALSE(z.requires_grad());
    EXPECT_TRUE(Tensor::parameter(Shape{1, 1, 1, 2}, {1.0, 2.0}).requires_grad());
    EXPECT_THROW(Tensor::constant(s, std::vector<double>(3)), InvalidArgument);
}

TEST(Tensor, BackwardNeedsScalar) {
    const Tensor p = Tensor::parameter(Shape{1, 2, 1, 1}, {1.0, 2.0});
    EXPECT_THROW(scale(p, 2.0).backward(), InvalidArgument);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
    const Tensor p = Tensor::parameter(Shape{1, 1, 1, 1}, {3.0});
    {
        NoGradGuard guard;
        EXPECT_FALSE(grad_enabled());
        EXPECT_FALSE(scale(p, 2.0).requires_grad());
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_TRUE(scale(p, 2.0).requires_grad());
}

TEST(Tensor, GradientsAccumulateUntilCleared) {
    Tensor p = Tensor::parameter(Shape{1, 1, 1, 1}, {3.0});
    mul(p, p).backward();
    mul(p, p).backward();
    EXPECT_DOUBLE_EQ(p.grad()[0], 12.0);
    p.zero_grad();
    mul(p, p).backward();
    EXPECT_DOUBLE_EQ(p.grad()[0], 6.0);
}

TEST(Tensor, SharedSubexpressionGetsBothPaths) {
    const Tensor p = Tensor::parameter(Shape{1, 1, 1, 1}, {2.0});
    const Tensor q = sigmoid(p);
    add(q, mul(q, q)).backward();
    const double s = 1.0 / (1.0 + std::exp(-2.0));
    EXPECT_NEAR(p.grad()[0], (1.0 + 2.0 * s) * s * (1.0 - s), 1e-14);
}

TEST(Conv2d, MatchesDirectConvolution) {
    struct Case {
        int n, c, h, w, out, k, stride;
    };
    for (const Case cs : {Case{1, 1, 5, 5, 1, 3, 1}, Case{2, 3, 8, 6, 4, 3, 2}, Case{1, 4, 4, 4, 2, 1, 1},
                          Case{3, 2, 7, 9, 5, 3, 1}, Case{1, 3, 16, 32, 8, 3, 2}}) {
        const int pad = cs.k / 2;
        const auto x = oracle::uniform(static_cast<std::size_t>(cs.n) * cs.c * cs.h * cs.w, -1, 1, 1);
        const auto k = oracle::uniform(static_cast<std::size_t>(cs.out) * cs.c * cs.k * cs.k, -1, 1, 2);
        const auto b = oracle::uniform(static_cast<std::size_t>(cs.out), -1, 1, 3);
        int oh = 0;
        int ow = 0;
        const auto ref = oracle::conv2d(x, cs.n, cs.c, cs.h, cs.w, k, cs.out, cs.k, b, cs.stride, pad, oh, ow);
        const Tensor y = conv2d(Tensor::constant(Shape{cs.n, cs.c, cs.h, cs.w}, x),
                                Tensor::constant(Shape{cs.out, cs.c, cs.k, cs.k}, k),
                                Tensor::constant(Shape{cs.out, 1, 1, 1}, b), cs.stride, pad);
        ASSERT_EQ(y.shape(), (Shape{cs.n, cs.out, oh, ow}));
        const std::vector<double> got(y.data().begin(), y.data().end());
        EXPECT_LT(oracle::max_relative_error(got, ref), 1e-12);
    }
}

TEST(Conv2d, RejectsChannelMismatch) {
    EXPECT_THROW(conv2d(Tensor::zeros(Shape{1, 2, 4, 4}), Tensor::zeros(Shape{1, 3, 3, 3}), Tensor(), 1, 1),
                 InvalidArgument);
}

TEST(Gradients, Conv2dStride1And2) {
    for (int stride : {1, 2}) {
        check_gradients([stride](const std::vector<Tensor>& t) { return conv2d(t[0], t[1], t[2], stride, 1); },
                        {Shape{2, 3, 6, 6}, Shape{4, 3, 3, 3}, Shape{4, 1, 1, 1}}, 10 + stride);
    }
    check_gradients([](const std::vector<Tensor>& t) { return conv2d(t[0], t[1], t[2], 1, 0); },
                    {Shape{2, 3, 3, 2}, Shape{5, 3, 1, 1}, Shape{5, 1, 1, 1}}, 13);
}

TEST(Gradients, Linear) {
    check_gradients([](const std::vector<Tensor>& t) { return linear(t[0], t[1], t[2]); },
                    {Shape{3, 5, 1, 1}, Shape{4, 5, 1, 1}, Shape{4, 1, 1, 1}}, 20);
}

TEST(Gradients, ElementwiseOps) {
    const Shape s{2, 2, 3, 3};
    check_gradients([](const std::vector<Tensor>& t) { return add(t[0], t[1]); }, {s, s}, 30);
    check_gradients([](const std::vector<Tensor>& t) { return sub(t[0], t[1]); }, {s, s}, 31);
    check_gradients([](const std::vector<Tensor>& t) { return mul(t[0], t[1]); }, {s, s}, 32);
    check_gradients([](const std::vector<Tensor>& t) { return sigmoid(t[0]); }, {s}, 33);
    check_gradients([](const std::vector<Tensor>& t) { return leaky_relu(t[0], 0.1); }, {s}, 34);
    check_gradients([](const std::vector<Tensor>& t) { return relu(t[0]); }, {s}, 35);
    check_gradients([](const std::vector<Tensor>& t) { return scale(t[0], -2.5); }, {s}, 36);
}

TEST(Gradients, ShapeOps) {
    check_gradients(
        [](const std::vector<Tensor>& t) {
            const std::vector<Tensor> parts{t[0], t[1]};
            return concat_channels(parts);
        },
        {Shape{2, 2, 3, 3}, Shape{2, 3, 3, 3}}, 40);
    check_gradients([](const std::vector<Tensor>& t) { return global_avg_pool(t[0]); }, {Shape{2, 3, 4, 5}}, 41);
    check_gradients([](const std::vector<Tensor>& t) { return channel_gate(t[0], t[1]); },
                    {Shape{2, 3, 4, 4}, Shape{2, 3, 1, 1}}, 42);
    check_gradients([](const std::vector<Tensor>& t) { return upsample_nearest2x(t[0]); }, {Shape{2, 2, 3, 4}}, 43);
    check_gradients([](const std::vector<Tensor>& t) { return reshape(t[0], Shape{2, 12, 1, 1}); },
                    {Shape{2, 3, 2, 2}}, 44);
    check_gradients([](const std::vector<Tensor>& t) { return mean_per_item(t[0]); }, {Shape{3, 2, 2, 2}}, 45);
    check_gradients([](const std::vector<Tensor>& t) { return mse(t[0], t[1]); },
                    {Shape{2, 3, 2, 2}, Shape{2, 3, 2, 2}}, 46);
}

TEST(Gradients, Normalizations) {
    check_gradients([](const std::vector<Tensor>& t) { return power_normalize(t[0], 1.0); }, {Shape{2, 4, 2, 3}}, 50);
    check_gradients([](const std::vector<Tensor>& t) { return power_normalize(t[0], 2.5); }, {Shape{1, 2, 1, 1}}, 51);
    check_gradients([](const std::vector<Tensor>& t) { return unit_normalize_channels(t[0], 1e-10); },
                    {Shape{2, 5, 3, 3}}, 52);
}

TEST(PowerNormalizeOp, AgreesWithChannelModule) {
    const Shape s{3, 6, 2, 4};
    const auto v = oracle::uniform(s.numel(), -2.0, 2.0, 60);
    const Tensor y = power_normalize(Tensor::constant(s, v), 1.7);
    for (int n = 0; n < s.n; ++n) {
        const auto item = y.data().subspan(static_cast<std::size_t>(n) * s.item_size(), s.item_size());
        const auto z = channel::pack_complex(item, 6, 2, 4);
        EXPECT_NEAR(channel::ChannelSymbols{z}.average_power(), 1.7, 1e-12);
    }
}

TEST(PowerNormalizeOp, ZeroItemIsDegenerate) {
    std::vector<double> v(2 * 4, 1.0);
    std::fill(v.begin() + 4, v.end(), 0.0);
    EXPECT_THROW(power_normalize(Tensor::constant(Shape{2, 4, 1, 1}, v), 1.0), DegenerateInput);
}

TEST(Upsample, NearestNeighbourLayout) {
    const Tensor x = Tensor::constant(Shape{1, 1, 1, 2}, {1.0, 2.0});
    const Tensor y = upsample_nearest2x(x);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 4}));
    const std::vector<double> expected{1, 1, 2, 2, 1, 1, 2, 2};
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), expected);
}
