#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wzjscc/image.hpp"

namespace wzjscc::data {

/// Left camera view is transmitted (x); the right view is the receiver's
/// side information (x_side).
struct StereoPair {
    ImageTensor x;
    ImageTensor x_side;
    std::string pair_id;
};

/// Interleaved 8-bit RGB as decoded from disk.
struct RgbImage {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// Reads 8-bit PNG or binary PPM (P6).
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage to_rgb8(const ImageTensor& image);
ImageTensor from_rgb8(const RgbImage& image);

struct CropWindow {
    int row = 0;
    int col = 0;
    int rows = 0;
    int cols = 0;
};

inline constexpr int kKittiCropRows = 370;
inline constexpr int kKittiCropCols = 740;
inline constexpr int kTargetHeight = 128;
inline constexpr int kTargetWidth = 256;

/// Centred 370×740 window; the half-margins are floored.
CropWindow kitti_crop_window(int height, int width);
/// Box-filter resampling with fractional pixel coverage.
ImageTensor area_resample(const ImageTensor& image, int height, int width);
ImageTensor crop(const ImageTensor& image, const CropWindow& window);

/// Centre crop to 370×740, then area-resample to 128×256.
ImageTensor preprocess_kitti(const RgbImage& image);
/// Area-resample to 128×256 (or the given size).
ImageTensor preprocess_cityscape(const RgbImage& image, int height = kTargetHeight, int width = kTargetWidth);

enum class Split { train, val, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t of(Split split) const;
    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

inline constexpr SplitSizes kCityscapeSplits{2975, 500, 1525};
inline constexpr SplitSizes kKittiStereoSplits{1576, 790, 790};

enum class CorrelationMode { additive_noise, shift, independent };
std::string_view to_string(CorrelationMode mode);
CorrelationMode parse_correlation_mode(std::string_view name);

struct SyntheticConfig {
    int channels = 3;
    int height = 16;
    int width = 32;
    CorrelationMode mode = CorrelationMode::additive_noise;
    double noise_std = 0.05;
    int shift_px = 2;
    /// Gaussian low-pass width (pixels) applied to the white-noise field.
    double smoothness = 2.0;
    SplitSizes counts{8, 2, 2};
    std::uint64_t seed = 0;

    friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

enum class DatasetName { cityscape, kittistereo, synthetic };
std::string_view to_string(DatasetName name);
DatasetName parse_dataset_name(std::string_view name);

struct DatasetSpec {
    DatasetName name = DatasetName::synthetic;
    /// Directory holding the manifest (real datasets only).
    std::filesystem::path root;
    std::string manifest = "manifest.tsv";
    SplitSizes sizes = SyntheticConfig{}.counts;
    /// Output resolution of the resampling step.
    int height = kTargetHeight;
    int width = kTargetWidth;
    SyntheticConfig synthetic;

    static DatasetSpec cityscape(std::filesystem::path root);
    static DatasetSpec kittistereo(std::filesystem::path root);
    static DatasetSpec synthetic_from(const SyntheticConfig& config);
};

void to_json(nlohmann::json& j, const DatasetSpec& spec);
void from_json(const nlohmann::json& j, DatasetSpec& spec);

/// Pair `index` of the synthetic stream (indices run train, then val, then
/// test). Every pair draws from its own (seed, index) streams.
StereoPair synthesize_pair(const SyntheticConfig& config, std::size_t index);
std::vector<StereoPair> generate_synthetic(const SyntheticConfig& config, Split split);
/// All splits, in train/val/test order.
std::vector<StereoPair> generate_synthetic(const SyntheticConfig& config);

struct ManifestEntry {
    std::string pair_id;
    std::filesystem::path left;
    std::filesystem::path right;
    Split split = Split::train;
};

/// Parses `pair_id<TAB>left_path<TAB>right_path<TAB>split` lines; blank
/// lines and lines starting with '#' are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Pairs of one split in stable manifest order (or generator order).
std::vector<StereoPair> load_split(const DatasetSpec& spec, Split split);

/// Writes a synthetic dataset as PNG pairs plus a manifest under `dir`.
void export_synthetic(const SyntheticConfig& config, const std::filesystem::path& dir);

/// Pearson correlation over all pixel values.
double pearson(std::span<const double> a, std::span<const double> b);

} // namespace wzjscc::data
