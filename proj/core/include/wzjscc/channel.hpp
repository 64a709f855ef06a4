#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wzjscc/rng.hpp"

namespace wzjscc::channel {

using Complex = std::complex<double>;

/// Channel input after power normalization: (1/k)·Σ|z_i|² equals the
/// power budget it was normalized to.
struct ChannelSymbols {
    std::vector<Complex> values;

    std::size_t k() const noexcept { return values.size(); }
    /// (1/k)·‖z‖².
    double average_power() const;
};

/// Noise power, power budget and the RNG that draws the noise. Each caller
/// owns its own state; one instance must not be shared across threads.
class ChannelState {
public:
    ChannelState(double sigma2, double p_avg, std::uint64_t seed);

    double sigma2() const noexcept { return sigma2_; }
    double p_avg() const noexcept { return p_avg_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// One CN(0, sigma2) draw: real and imaginary parts each have variance sigma2/2.
    Complex draw_noise();
    /// Restarts the noise sequence from the construction seed.
    void reset();

private:
    double sigma2_;
    double p_avg_;
    std::uint64_t seed_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// sigma2 = p_avg / 10^(snr_db/10).
double snr_to_sigma2(double snr_db, double p_avg);
/// snr_db = 10·log10(p_avg / sigma2).
double sigma2_to_snr(double sigma2, double p_avg);

/// z = sqrt(k·p_avg) · z̃ / sqrt(z̃ᴴz̃). Throws DegenerateInput for an
/// all-zero input.
ChannelSymbols power_normalize(std::span<const Complex> z_tilde, double p_avg);

/// y = z + n with n ~ CN(0, sigma2·I). `expected_k` guards against a
/// latent/bandwidth mismatch.
std::vector<Complex> awgn_transmit(const ChannelSymbols& z, ChannelState& state, std::size_t expected_k);
std::vector<Complex> awgn_transmit(const ChannelSymbols& z, ChannelState& state);

/// Split-half packing of a real (2c × h × w) array in row-major
/// (channel, height, width) order: channels [0, c) become real parts and
/// channels [c, 2c) the imaginary parts, so element j of the result is
/// real[j] + i·real[c·h·w + j].
std::vector<Complex> pack_complex(std::span<const double> real, std::size_t channels, std::size_t height,
                                  std::size_t width);
/// Inverse of pack_complex; returns 2·values.size() reals.
std::vector<double> unpack_complex(std::span<const Complex> values);

/// k = round(rho · elements).
std::size_t bandwidth_symbols(double rho, std::size_t elements);

} // namespace wzjscc::channel
