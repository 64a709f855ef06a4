#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wzjscc/tensor.hpp"

namespace wzjscc::nn {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Negative slope of every hidden LeakyReLU in the codec.
inline constexpr double kLeakySlope = 0.1;

/// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn
/// from a stream keyed by (seed, parameter name). Two models built from the
/// same seed therefore agree on every parameter they have in common.
Tensor init_parameter(std::uint64_t seed, const std::string& name, Shape shape, int fan_in);

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, std::uint64_t seed);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<NamedTensor>& out) const;

    int in_channels() const noexcept { return in_; }
    int out_channels() const noexcept { return out_; }
    Tensor& weight() noexcept { return weight_; }
    Tensor& bias() noexcept { return bias_; }
    const Tensor& weight() const noexcept { return weight_; }
    const Tensor& bias() const noexcept { return bias_; }

private:
    std::string name_;
    int in_ = 0;
    int out_ = 0;
    int stride_ = 1;
    int padding_ = 0;
    Tensor weight_;
    Tensor bias_;
};

class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_features, int out_features, std::uint64_t seed);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<NamedTensor>& out) const;

    Tensor& weight() noexcept { return weight_; }
    Tensor& bias() noexcept { return bias_; }

private:
    std::string name_;
    Tensor weight_;
    Tensor bias_;
};

/// y = act(x + conv2(act(conv1(x)))), 3x3 convolutions, width preserved.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(const std::string& name, int channels, std::uint64_t seed);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<NamedTensor>& out) const;

private:
    Conv2d conv1_;
    Conv2d conv2_;
};

/// Simplified attention: y = x + trunk(x) ⊙ sigmoid(mask(x)), where both
/// branches are residual blocks and the mask ends in a 1x1 convolution.
class AttentionBlock {
public:
    AttentionBlock() = default;
    AttentionBlock(const std::string& name, int channels, std::uint64_t seed);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<NamedTensor>& out) const;

private:
    ResidualBlock trunk_;
    ResidualBlock mask_;
    Conv2d mask_out_;
};

/// SNR-adaptive channel gating. The context tensor (n, m, 1, 1) carries the
/// per-item channel SNR in dB, optionally followed by role flags.
///
///   g = sigmoid(W2 · relu(W1 · [avgpool(x), context] + b1) + b2)
///   y = x ⊙ g   (broadcast over height and width)
class AFModule {
public:
    AFModule() = default;
    AFModule(const std::string& name, int channels, int context_size, std::uint64_t seed);

    Tensor forward(const Tensor& x, const Tensor& context) const;
    void collect(std::vector<NamedTensor>& out) const;

    int context_size() const noexcept { return context_size_; }
    Linear& gate_layer() noexcept { return fc2_; }

private:
    int context_size_ = 1;
    Linear fc1_;
    Linear fc2_;
};

} // namespace wzjscc::nn
