#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wzjscc/channel.hpp"
#include "wzjscc/errors.hpp"

using namespace wzjscc;
using namespace wzjscc::channel;

namespace {

std::vector<Complex> random_symbols(std::size_t k, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    std::vector<Complex> z(k);
    for (auto& v : z) {
        v = {d(rng), d(rng)};
    }
    return z;
}

} // namespace

TEST(SnrConversion, KnownValues) {
    EXPECT_DOUBLE_EQ(snr_to_sigma2(0.0, 1.0), 1.0);
    EXPECT_NEAR(snr_to_sigma2(10.0, 1.0), 0.1, 1e-15);
    EXPECT_NEAR(snr_to_sigma2(-10.0, 2.0), 20.0, 1e-12);
    EXPECT_NEAR(sigma2_to_snr(0.5, 1.0), 10.0 * std::log10(2.0), 1e-12);
}

TEST(SnrConversion, RoundTripIsExact) {
    for (double snr = -30.0; snr <= 40.0; snr += 0.37) {
        for (double p : {0.25, 1.0, 7.5}) {
            EXPECT_LT(std::abs(sigma2_to_snr(snr_to_sigma2(snr, p), p) - snr), 1e-9);
        }
    }
}

TEST(SnrConversion, RejectsBadInputs) {
    EXPECT_THROW(snr_to_sigma2(0.0, 0.0), InvalidArgument);
    EXPECT_THROW(snr_to_sigma2(0.0, -1.0), InvalidArgument);
    EXPECT_THROW(snr_to_sigma2(std::nan(""), 1.0), InvalidArgument);
    EXPECT_THROW(snr_to_sigma2(-4000.0, 1.0), InvalidArgument);
    EXPECT_THROW(snr_to_sigma2(4000.0, 1.0), InvalidArgument);
    EXPECT_THROW(sigma2_to_snr(0.0, 1.0), InvalidArgument);
}

TEST(PowerNormalize, MeetsBudgetForManySizes) {
    for (std::size_t k : {1u, 2u, 64u, 1000u, 6144u}) {
        for (double p : {0.5, 1.0, 3.0}) {
            const auto z = power_normalize(random_symbols(k, k, 4.0), p);
            ASSERT_EQ(z.k(), k);
            double energy = 0.0;
            for (const auto& v : z.values) {
                energy += std::norm(v);
            }
            EXPECT_NEAR(energy / static_cast<double>(k), p, 1e-12 * p);
            EXPECT_NEAR(z.average_power(), p, 1e-12 * p);
        }
    }
}

TEST(PowerNormalize, IsScaleInvariantAndKeepsDirection) {
    const auto raw = random_symbols(32, 7);
    std::vector<Complex> scaled(raw);
    for (auto& v : scaled) {
        v *= 123.0;
    }
    const auto a = power_normalize(raw, 1.0);
    const auto b = power_normalize(scaled, 1.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_NEAR(std::abs(a.values[i] - b.values[i]), 0.0, 1e-12);
        // Same phase as the input.
        EXPECT_NEAR(std::arg(a.values[i]), std::arg(raw[i]), 1e-12);
    }
}

TEST(PowerNormalize, AllZeroIsDegenerate) {
    const std::vector<Complex> zero(16);
    EXPECT_THROW(power_normalize(zero, 1.0), DegenerateInput);
    EXPECT_THROW(power_normalize(random_symbols(4, 1), 0.0), InvalidArgument);
}

TEST(ChannelState, RejectsNonPositiveParameters) {
    EXPECT_THROW(ChannelState(0.0, 1.0, 1), InvalidArgument);
    EXPECT_THROW(ChannelState(-1.0, 1.0, 1), InvalidArgument);
    EXPECT_THROW(ChannelState(1.0, 0.0, 1), InvalidArgument);
}

TEST(Awgn, EmpiricalVarianceMatchesSigma2) {
    const double sigma2 = snr_to_sigma2(3.0, 1.0);
    ChannelState state(sigma2, 1.0, 2024);
    const std::size_t n = 1'000'000;
    std::vector<double> re(n);
    std::vector<double> im(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Complex w = state.draw_noise();
        re[i] = w.real();
        im[i] = w.imag();
    }
    // Circularly symmetric: each component carries sigma2/2.
    EXPECT_NEAR(oracle::variance(re), sigma2 / 2.0, 0.02 * sigma2 / 2.0);
    EXPECT_NEAR(oracle::variance(im), sigma2 / 2.0, 0.02 * sigma2 / 2.0);
    EXPECT_NEAR(oracle::mean(re), 0.0, 0.01);
}

TEST(Awgn, TransmitAddsNoiseOfTheStatedPower) {
    const auto z = power_normalize(random_symbols(200'000, 3), 1.0);
    ChannelState state(0.25, 1.0, 99);
    const auto y = awgn_transmit(z, state, z.k());
    double energy = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        energy += std::norm(y[i] - z.values[i]);
    }
    EXPECT_NEAR(energy / static_cast<double>(y.size()), 0.25, 0.02 * 0.25);
}

TEST(Awgn, SeededAndResettable) {
    const auto z = power_normalize(random_symbols(64, 5), 1.0);
    ChannelState a(0.5, 1.0, 11);
    ChannelState b(0.5, 1.0, 11);
    const auto ya = awgn_transmit(z, a, 64);
    EXPECT_EQ(ya, awgn_transmit(z, b, 64));
    a.reset();
    EXPECT_EQ(ya, awgn_transmit(z, a, 64));
    ChannelState c(0.5, 1.0, 12);
    EXPECT_NE(ya, awgn_transmit(z, c, 64));
}

TEST(Awgn, SameSeedGivesProportionalNoiseAcrossSnr) {
    const ChannelSymbols silent{std::vector<Complex>(16)};
    ChannelState lo(1.0, 1.0, 5);
    ChannelState hi(0.01, 1.0, 5);
    const auto a = awgn_transmit(silent, lo, 16);
    const auto b = awgn_transmit(silent, hi, 16);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(std::abs(a[i] * 0.1 - b[i]), 0.0, 1e-14);
    }
}

TEST(Awgn, LengthMismatchIsRejected) {
    const auto z = power_normalize(random_symbols(10, 5), 1.0);
    ChannelState s(1.0, 1.0, 1);
    EXPECT_THROW(awgn_transmit(z, s, 11), InvalidArgument);
}

TEST(Packing, SplitHalfLayout) {
    // Two channels of a 1x2 grid: channel 0 is real, channel 1 imaginary.
    const std::vector<double> real{1.0, 2.0, 3.0, 4.0};
    const auto z = pack_complex(real, 2, 1, 2);
    ASSERT_EQ(z.size(), 2u);
    EXPECT_EQ(z[0], Complex(1.0, 3.0));
    EXPECT_EQ(z[1], Complex(2.0, 4.0));
    EXPECT_EQ(unpack_complex(z), real);
}

TEST(Packing, RoundTripAndValidation) {
    const auto v = oracle::uniform(4 * 3 * 5, -1.0, 1.0, 8);
    EXPECT_EQ(unpack_complex(pack_complex(v, 4, 3, 5)), v);
    EXPECT_THROW(pack_complex(std::vector<double>(3), 3, 1, 1), InvalidArgument);
    EXPECT_THROW(pack_complex(std::vector<double>(5), 2, 1, 2), InvalidArgument);
}

TEST(Bandwidth, MatchesRatio) {
    EXPECT_EQ(bandwidth_symbols(1.0 / 16.0, 3 * 128 * 256), 6144u);
    EXPECT_EQ(bandwidth_symbols(1.0 / 32.0, 3 * 128 * 256), 3072u);
    EXPECT_EQ(bandwidth_symbols(1.0 / 8.0, 3 * 16 * 32), 192u);
    EXPECT_THROW(bandwidth_symbols(0.0, 100), InvalidArgument);
    EXPECT_THROW(bandwidth_symbols(1.5, 100), InvalidArgument);
}
