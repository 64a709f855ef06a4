#include "wzjscc/layers.hpp"

#include <array>
#include <cmath>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"
#include "wzjscc/rng.hpp"

namespace wzjscc::nn {

Tensor init_parameter(std::uint64_t seed, const std::string& name, Shape shape, int fan_in) {
    Rng rng = make_stream(seed, name);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(shape.numel());
    for (double& v : values) {
        v = dist(rng);
    }
    return Tensor::parameter(shape, std::move(values));
}

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, std::uint64_t seed)
    : name_(std::move(name)), in_(in_channels), out_(out_channels), stride_(stride), padding_(kernel / 2) {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || kernel % 2 == 0) {
        throw InvalidArgument(fmt::format("{}: invalid conv geometry in={} out={} k={}", name_, in_channels,
                                          out_channels, kernel));
    }
    const int fan_in = in_channels * kernel * kernel;
    weight_ = init_parameter(seed, name_ + ".weight", Shape{out_channels, in_channels, kernel, kernel}, fan_in);
    bias_ = init_parameter(seed, name_ + ".bias", Shape{out_channels, 1, 1, 1}, fan_in);
}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight_, bias_, stride_, padding_); }

void Conv2d::collect(std::vector<NamedTensor>& out) const {
    out.push_back({name_ + ".weight", weight_});
    out.push_back({name_ + ".bias", bias_});
}

Linear::Linear(std::string name, int in_features, int out_features, std::uint64_t seed) : name_(std::move(name)) {
    weight_ = init_parameter(seed, name_ + ".weight", Shape{out_features, in_features, 1, 1}, in_features);
    bias_ = init_parameter(seed, name_ + ".bias", Shape{out_features, 1, 1, 1}, in_features);
}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight_, bias_); }

void Linear::collect(std::vector<NamedTensor>& out) const {
    out.push_back({name_ + ".weight", weight_});
    out.push_back({name_ + ".bias", bias_});
}

ResidualBlock::ResidualBlock(const std::string& name, int channels, std::uint64_t seed)
    : conv1_(name + ".conv1", channels, channels, 3, 1, seed), conv2_(name + ".conv2", channels, channels, 3, 1, seed) {}

Tensor ResidualBlock::forward(const Tensor& x) const {
    const Tensor h = leaky_relu(conv1_.forward(x), kLeakySlope);
    return leaky_relu(add(x, conv2_.forward(h)), kLeakySlope);
}

void ResidualBlock::collect(std::vector<NamedTensor>& out) const {
    conv1_.collect(out);
    conv2_.collect(out);
}

AttentionBlock::AttentionBlock(const std::string& name, int channels, std::uint64_t seed)
    : trunk_(name + ".trunk", channels, seed),
      mask_(name + ".mask", channels, seed),
      mask_out_(name + ".mask_out", channels, channels, 1, 1, seed) {}

Tensor AttentionBlock::forward(const Tensor& x) const {
    const Tensor trunk = trunk_.forward(x);
    const Tensor mask = sigmoid(mask_out_.forward(mask_.forward(x)));
    return add(x, mul(trunk, mask));
}

void AttentionBlock::collect(std::vector<NamedTensor>& out) const {
    trunk_.collect(out);
    mask_.collect(out);
    mask_out_.collect(out);
}

AFModule::AFModule(const std::string& name, int channels, int context_size, std::uint64_t seed)
    : context_size_(context_size),
      fc1_(name + ".fc1", channels + context_size, channels, seed),
      fc2_(name + ".fc2", channels, channels, seed) {}

Tensor AFModule::forward(const Tensor& x, const Tensor& context) const {
    const Shape cs = context.shape();
    if (cs.n != x.shape().n || cs.c != context_size_ || cs.h != 1 || cs.w != 1) {
        throw InvalidArgument(fmt::format("AF module: context {} does not match input {} with {} context values",
                                          cs.str(), x.shape().str(), context_size_));
    }
    const std::array<Tensor, 2> parts{global_avg_pool(x), context};
    const Tensor hidden = relu(fc1_.forward(concat_channels(parts)));
    const Tensor gate = sigmoid(fc2_.forward(hidden));
    return channel_gate(x, gate);
}

void AFModule::collect(std::vector<NamedTensor>& out) const {
    fc1_.collect(out);
    fc2_.collect(out);
}

} // namespace wzjscc::nn
