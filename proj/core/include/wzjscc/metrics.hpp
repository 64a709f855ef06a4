#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wzjscc/image.hpp"
#include "wzjscc/layers.hpp"
#include "wzjscc/tensor.hpp"

namespace wzjscc::metrics {

/// PSNR reported for identical images.
inline constexpr double kPsnrCapDb = 100.0;
/// Smallest spatial side MS-SSIM accepts.
inline constexpr int kMsSsimMinSide = 16;

double psnr_from_mse(double mse, double peak = 1.0);
/// 10·log10(peak² / MSE), capped at kPsnrCapDb.
double psnr(const ImageTensor& x, const ImageTensor& x_hat, double peak = 1.0);

/// Multi-scale SSIM averaged over colour channels. Five scales when the
/// short side is at least 160 pixels, otherwise three; the Gaussian window
/// (sigma 1.5) shrinks from 11 taps to fit the coarsest scale.
double ms_ssim(const ImageTensor& x, const ImageTensor& y);
int ms_ssim_scales(int height, int width);

/// Convolutional feature stack used by LPIPS. Each layer is a 3x3 conv
/// followed by a LeakyReLU; its output is unit-normalized along channels
/// and compared with per-channel weights.
class FeatureNet {
public:
    struct Layer {
        nn::Conv2d conv;
        int stride = 1;
        double slope = 0.2;
        std::vector<double> channel_weights;
    };

    /// Fixed-seed randomly initialised stack, usable without any download.
    static FeatureNet surrogate(std::uint64_t seed = kSurrogateSeed);
    /// Loads a converted backbone asset; throws MissingResource if absent.
    static FeatureNet load(const std::filesystem::path& asset);
    /// $WZJSCC_ASSET_DIR/lpips_backbone.wzfn, or ./assets/... when unset.
    static std::filesystem::path default_asset_path();

    void save(const std::filesystem::path& path) const;

    /// Per-item distance, shape (n, 1, 1, 1). Inputs are [0,1] images.
    nn::Tensor distance(const nn::Tensor& x, const nn::Tensor& y) const;

    const std::string& provenance() const noexcept { return provenance_; }
    /// SHA-256 of the serialized network.
    std::string checksum() const;
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    static constexpr std::uint64_t kSurrogateSeed = 0x4c50495053ull;

private:
    std::vector<Layer> layers_;
    std::string provenance_;
};

double lpips(const ImageTensor& x, const ImageTensor& y, const FeatureNet& net);
/// Batch mean of the LPIPS distance; differentiable in both arguments.
nn::Tensor lpips_loss(const nn::Tensor& x, const nn::Tensor& x_hat, const FeatureNet& net);

struct Summary {
    double mean = 0.0;
    /// Population standard deviation.
    double std = 0.0;
};
Summary summarize(std::span<const double> values);

struct MetricReport {
    std::vector<double> psnr_db;
    std::vector<double> ms_ssim;
    std::vector<double> lpips;

    Summary psnr_summary() const { return summarize(psnr_db); }
    Summary ms_ssim_summary() const { return summarize(ms_ssim); }
    Summary lpips_summary() const { return summarize(lpips); }
};

/// Scores image pairs independently of each other.
MetricReport evaluate(std::span<const ImageTensor> reference, std::span<const ImageTensor> reconstructed,
                      const FeatureNet& net);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace wzjscc::metrics
