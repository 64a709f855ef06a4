#include "wzjscc/channel.hpp"

#include <cmath>
#include <string>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"

namespace wzjscc::channel {

double ChannelSymbols::average_power() const {
    if (values.empty()) {
        return 0.0;
    }
    double energy = 0.0;
    for (const auto& v : values) {
        energy += std::norm(v);
    }
    return energy / static_cast<double>(values.size());
}

ChannelState::ChannelState(double sigma2, double p_avg, std::uint64_t seed)
    : sigma2_(sigma2), p_avg_(p_avg), seed_(seed), rng_(seed) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw InvalidArgument(fmt::format("ChannelState: sigma2 must be positive and finite, got {}", sigma2));
    }
    if (!(p_avg > 0.0) || !std::isfinite(p_avg)) {
        throw InvalidArgument(fmt::format("ChannelState: p_avg must be positive and finite, got {}", p_avg));
    }
}

Complex ChannelState::draw_noise() {
    const double scale = std::sqrt(sigma2_ / 2.0);
    const double re = normal_(rng_);
    const double im = normal_(rng_);
    return {scale * re, scale * im};
}

void ChannelState::reset() {
    rng_.seed(seed_);
    normal_.reset();
}

double snr_to_sigma2(double snr_db, double p_avg) {
    if (!(p_avg > 0.0)) {
        throw InvalidArgument(fmt::format("snr_to_sigma2: p_avg must be positive, got {}", p_avg));
    }
    if (!std::isfinite(snr_db)) {
        throw InvalidArgument("snr_to_sigma2: SNR must be finite");
    }
    const double sigma2 = p_avg / std::pow(10.0, snr_db / 10.0);
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw InvalidArgument(fmt::format("snr_to_sigma2: SNR {} dB yields a non-representable noise power", snr_db));
    }
    return sigma2;
}

double sigma2_to_snr(double sigma2, double p_avg) {
    if (!(sigma2 > 0.0) || !(p_avg > 0.0)) {
        throw InvalidArgument(fmt::format("sigma2_to_snr: inputs must be positive (sigma2={}, p_avg={})", sigma2, p_avg));
    }
    return 10.0 * std::log10(p_avg / sigma2);
}

ChannelSymbols power_normalize(std::span<const Complex> z_tilde, double p_avg) {
    if (!(p_avg > 0.0)) {
        throw InvalidArgument(fmt::format("power_normalize: p_avg must be positive, got {}", p_avg));
    }
    if (z_tilde.empty()) {
        throw InvalidArgument("power_normalize: empty latent");
    }
    double energy = 0.0;
    for (const auto& v : z_tilde) {
        energy += std::norm(v);
    }
    if (!std::isfinite(energy)) {
        throw NumericalError("power_normalize: encoder output energy is not finite");
    }
    if (energy == 0.0) {
        throw DegenerateInput("power_normalize: encoder output is all zero; normalization is undefined");
    }
    const double k = static_cast<double>(z_tilde.size());
    const double scale = std::sqrt(k * p_avg) / std::sqrt(energy);
    ChannelSymbols out;
    out.values.reserve(z_tilde.size());
    for (const auto& v : z_tilde) {
        out.values.push_back(scale * v);
    }
    return out;
}

std::vector<Complex> awgn_transmit(const ChannelSymbols& z, ChannelState& state, std::size_t expected_k) {
    if (z.k() != expected_k) {
        throw InvalidArgument(
            fmt::format("awgn_transmit: got {} symbols but the channel is configured for k={}", z.k(), expected_k));
    }
    return awgn_transmit(z, state);
}

std::vector<Complex> awgn_transmit(const ChannelSymbols& z, ChannelState& state) {
    std::vector<Complex> received;
    received.reserve(z.k());
    for (const auto& v : z.values) {
        received.push_back(v + state.draw_noise());
    }
    return received;
}

std::vector<Complex> pack_complex(std::span<const double> real, std::size_t channels, std::size_t height,
                                  std::size_t width) {
    if (channels % 2 != 0) {
        throw InvalidArgument(fmt::format("pack_complex: channel count must be even, got {}", channels));
    }
    const std::size_t half = (channels / 2) * height * width;
    if (real.size() != 2 * half) {
        throw InvalidArgument(fmt::format("pack_complex: expected {} values for {}x{}x{}, got {}", 2 * half, channels,
                                          height, width, real.size()));
    }
    std::vector<Complex> out(half);
    for (std::size_t j = 0; j < half; ++j) {
        out[j] = {real[j], real[half + j]};
    }
    return out;
}

std::vector<double> unpack_complex(std::span<const Complex> values) {
    const std::size_t half = values.size();
    std::vector<double> out(2 * half);
    for (std::size_t j = 0; j < half; ++j) {
        out[j] = values[j].real();
        out[half + j] = values[j].imag();
    }
    return out;
}

std::size_t bandwidth_symbols(double rho, std::size_t elements) {
    if (!(rho > 0.0) || !(rho <= 1.0)) {
        throw InvalidArgument(fmt::format("bandwidth ratio must lie in (0, 1], got {}", rho));
    }
    return static_cast<std::size_t>(std::llround(rho * static_cast<double>(elements)));
}

} // namespace wzjscc::channel
