#include "wzjscc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <png.h>

#include "wzjscc/errors.hpp"
#include "wzjscc/rng.hpp"

namespace wzjscc::data {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- image I/O

namespace {

RgbImage read_png(const fs::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
        throw InvalidArgument(fmt::format("cannot decode PNG {}: {}", path.string(), image.message));
    }
    RgbImage out;
    out.height = static_cast<int>(image.height);
    out.width = static_cast<int>(image.width);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    out.channels = (color ? 3 : 1) + (alpha ? 1 : 0);
    image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB) : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
        const std::string message = image.message;
        png_image_free(&image);
        throw InvalidArgument(fmt::format("cannot decode PNG {}: {}", path.string(), message));
    }
    return out;
}

RgbImage read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
    in >> magic;
    auto skip_comments = [&] {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
    };
    skip_comments();
    in >> width;
    skip_comments();
    in >> height;
    skip_comments();
    in >> maxval;
    in.get();
    if (!in || magic != "P6" || width <= 0 || height <= 0 || maxval != 255) {
        throw InvalidArgument(fmt::format("{} is not an 8-bit binary PPM", path.string()));
    }
    RgbImage out{height, width, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (!in) {
        throw InvalidArgument(fmt::format("{} is truncated", path.string()));
    }
    return out;
}

} // namespace

RgbImage read_image(const fs::path& path) {
    if (!fs::exists(path)) {
        throw MissingResource(fmt::format("image {} not found", path.string()));
    }
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 8> head{};
    in.read(reinterpret_cast<char*>(head.data()), head.size());
    if (in.gcount() >= 2 && head[0] == 'P' && head[1] == '6') {
        return read_ppm(path);
    }
    return read_png(path);
}

void write_png(const fs::path& path, const RgbImage& image) {
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(image.width);
    out.height = static_cast<png_uint_32>(image.height);
    out.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (png_image_write_to_file(&out, path.string().c_str(), 0, image.pixels.data(), 0, nullptr) == 0) {
        throw ConfigError(fmt::format("cannot write PNG {}: {}", path.string(), out.message));
    }
}

RgbImage to_rgb8(const ImageTensor& image) {
    RgbImage out{image.height(), image.width(), image.channels(), {}};
    out.pixels.resize(image.size());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                out.pixels[(static_cast<std::size_t>(y) * image.width() + x) * image.channels() + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    return out;
}

ImageTensor from_rgb8(const RgbImage& image) {
    ImageTensor out(image.channels, image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                out.at(c, y, x) = image.at(y, x, c) / 255.0;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- preprocessing

CropWindow kitti_crop_window(int height, int width) {
    if (height < kKittiCropRows || width < kKittiCropCols) {
        throw InvalidArgument(fmt::format("KITTI image {}x{} is smaller than the {}x{} crop", height, width,
                                          kKittiCropRows, kKittiCropCols));
    }
    return {(height - kKittiCropRows) / 2, (width - kKittiCropCols) / 2, kKittiCropRows, kKittiCropCols};
}

ImageTensor crop(const ImageTensor& image, const CropWindow& w) {
    if (w.row < 0 || w.col < 0 || w.row + w.rows > image.height() || w.col + w.cols > image.width()) {
        throw InvalidArgument("crop window exceeds the image");
    }
    ImageTensor out(image.channels(), w.rows, w.cols);
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < w.rows; ++y) {
            for (int x = 0; x < w.cols; ++x) {
                out.at(c, y, x) = image.at(c, w.row + y, w.col + x);
            }
        }
    }
    return out;
}

namespace {

struct Tap {
    int index;
    double weight;
};

// For each output cell, the input cells it overlaps and the fraction of the
// output cell each one covers.
std::vector<std::vector<Tap>> area_taps(int in, int out) {
    const double scale = static_cast<double>(in) / out;
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) {
        const double lo = i * scale;
        const double hi = (i + 1) * scale;
        for (int j = static_cast<int>(std::floor(lo)); j < std::min(in, static_cast<int>(std::ceil(hi))); ++j) {
            const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
            if (overlap > 0.0) {
                taps[static_cast<std::size_t>(i)].push_back({j, overlap / scale});
            }
        }
    }
    return taps;
}

} // namespace

ImageTensor area_resample(const ImageTensor& image, int height, int width) {
    if (height <= 0 || width <= 0) {
        throw InvalidArgument("area_resample: target dims must be positive");
    }
    const auto rows = area_taps(image.height(), height);
    const auto cols = area_taps(image.width(), width);
    ImageTensor out(image.channels(), height, width);
    std::vector<double> tmp(static_cast<std::size_t>(image.height()) * width);
    for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (const Tap& t : cols[static_cast<std::size_t>(x)]) {
                    acc += t.weight * image.at(c, y, t.index);
                }
                tmp[static_cast<std::size_t>(y) * width + x] = acc;
            }
        }
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (const Tap& t : rows[static_cast<std::size_t>(y)]) {
                    acc += t.weight * tmp[static_cast<std::size_t>(t.index) * width + x];
                }
                out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
            }
        }
    }
    return out;
}

ImageTensor preprocess_kitti(const RgbImage& image) {
    if (image.channels != 3) {
        throw InvalidArgument(fmt::format("KITTI preprocessing expects RGB, got {} channels", image.channels));
    }
    const CropWindow window = kitti_crop_window(image.height, image.width);
    return area_resample(crop(from_rgb8(image), window), kTargetHeight, kTargetWidth);
}

ImageTensor preprocess_cityscape(const RgbImage& image, int height, int width) {
    if (image.channels != 3) {
        throw InvalidArgument(fmt::format("Cityscapes preprocessing expects RGB, got {} channels", image.channels));
    }
    return area_resample(from_rgb8(image), height, width);
}

// ---------------------------------------------------------------- enums

std::string_view to_string(Split split) {
    switch (split) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    if (name == "train") {
        return Split::train;
    }
    if (name == "val" || name == "validation") {
        return Split::val;
    }
    if (name == "test") {
        return Split::test;
    }
    throw ConfigError(fmt::format("unknown split '{}'", name));
}

std::size_t SplitSizes::of(Split split) const {
    switch (split) {
    case Split::train:
        return train;
    case Split::val:
        return val;
    case Split::test:
        return test;
    }
    return 0;
}

std::string_view to_string(CorrelationMode mode) {
    switch (mode) {
    case CorrelationMode::additive_noise:
        return "additive_noise";
    case CorrelationMode::shift:
        return "shift";
    case CorrelationMode::independent:
        return "independent";
    }
    return "unknown";
}

CorrelationMode parse_correlation_mode(std::string_view name) {
    if (name == "additive_noise") {
        return CorrelationMode::additive_noise;
    }
    if (name == "shift") {
        return CorrelationMode::shift;
    }
    if (name == "independent") {
        return CorrelationMode::independent;
    }
    throw ConfigError(fmt::format("unknown correlation mode '{}'", name));
}

std::string_view to_string(DatasetName name) {
    switch (name) {
    case DatasetName::cityscape:
        return "cityscape";
    case DatasetName::kittistereo:
        return "kittistereo";
    case DatasetName::synthetic:
        return "synthetic";
    }
    return "unknown";
}

DatasetName parse_dataset_name(std::string_view name) {
    if (name == "cityscape" || name == "cityscapes") {
        return DatasetName::cityscape;
    }
    if (name == "kittistereo" || name == "kitti") {
        return DatasetName::kittistereo;
    }
    if (name == "synthetic") {
        return DatasetName::synthetic;
    }
    throw ConfigError(fmt::format("unknown dataset '{}'", name));
}

DatasetSpec DatasetSpec::cityscape(fs::path root) {
    DatasetSpec spec;
    spec.name = DatasetName::cityscape;
    spec.root = std::move(root);
    spec.sizes = kCityscapeSplits;
    return spec;
}

DatasetSpec DatasetSpec::kittistereo(fs::path root) {
    DatasetSpec spec;
    spec.name = DatasetName::kittistereo;
    spec.root = std::move(root);
    spec.sizes = kKittiStereoSplits;
    return spec;
}

DatasetSpec DatasetSpec::synthetic_from(const SyntheticConfig& config) {
    DatasetSpec spec;
    spec.name = DatasetName::synthetic;
    spec.sizes = config.counts;
    spec.height = config.height;
    spec.width = config.width;
    spec.synthetic = config;
    return spec;
}

namespace {

nlohmann::json sizes_json(const SplitSizes& s) { return {{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

SplitSizes sizes_from(const nlohmann::json& j, const SplitSizes& d) {
    return {j.value("train", d.train), j.value("val", d.val), j.value("test", d.test)};
}

} // namespace

void to_json(nlohmann::json& j, const DatasetSpec& spec) {
    const auto& s = spec.synthetic;
    j = nlohmann::json{
        {"name", std::string(to_string(spec.name))},
        {"root", spec.root.string()},
        {"manifest", spec.manifest},
        {"sizes", sizes_json(spec.sizes)},
        {"height", spec.height},
        {"width", spec.width},
        {"synthetic",
         {{"channels", s.channels},
          {"height", s.height},
          {"width", s.width},
          {"mode", std::string(to_string(s.mode))},
          {"noise_std", s.noise_std},
          {"shift_px", s.shift_px},
          {"smoothness", s.smoothness},
          {"counts", sizes_json(s.counts)},
          {"seed", s.seed}}},
    };
}

void from_json(const nlohmann::json& j, DatasetSpec& spec) {
    const DatasetName name = parse_dataset_name(j.value("name", std::string("synthetic")));
    DatasetSpec d = name == DatasetName::cityscape     ? DatasetSpec::cityscape({})
                    : name == DatasetName::kittistereo ? DatasetSpec::kittistereo({})
                                                       : DatasetSpec{};
    SyntheticConfig s;
    if (j.contains("synthetic")) {
        const auto& js = j["synthetic"];
        s.channels = js.value("channels", s.channels);
        s.height = js.value("height", s.height);
        s.width = js.value("width", s.width);
        s.mode = parse_correlation_mode(js.value("mode", std::string(to_string(s.mode))));
        s.noise_std = js.value("noise_std", s.noise_std);
        s.shift_px = js.value("shift_px", s.shift_px);
        s.smoothness = js.value("smoothness", s.smoothness);
        if (js.contains("counts")) {
            s.counts = sizes_from(js["counts"], s.counts);
        }
        s.seed = js.value("seed", s.seed);
    }
    if (name == DatasetName::synthetic) {
        d = DatasetSpec::synthetic_from(s);
    }
    spec = d;
    spec.synthetic = s;
    spec.root = j.value("root", std::string());
    spec.manifest = j.value("manifest", d.manifest);
    if (j.contains("sizes")) {
        spec.sizes = sizes_from(j["sizes"], d.sizes);
    }
    spec.height = j.value("height", d.height);
    spec.width = j.value("width", d.width);
    if (name == DatasetName::synthetic) {
        // The generator defines the effective layout.
        spec.sizes = s.counts;
        spec.height = s.height;
        spec.width = s.width;
    }
}

// ---------------------------------------------------------------- synthetic

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (double& v : k) {
        v /= total;
    }
    return k;
}

// White Gaussian noise, low-passed with edge replication, min-max scaled to [0,1].
ImageTensor smooth_field(const SyntheticConfig& cfg, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int h = cfg.height;
    const int w = cfg.width;
    ImageTensor img(cfg.channels, h, w);
    for (double& v : img.pixels()) {
        v = normal(rng);
    }
    if (cfg.smoothness > 0.0) {
        const auto k = gaussian_kernel(cfg.smoothness);
        const int r = static_cast<int>(k.size() / 2);
        std::vector<double> tmp(static_cast<std::size_t>(h) * w);
        for (int c = 0; c < cfg.channels; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i) {
                        acc += k[static_cast<std::size_t>(i + r)] * img.at(c, y, std::clamp(x + i, 0, w - 1));
                    }
                    tmp[static_cast<std::size_t>(y) * w + x] = acc;
                }
            }
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i) {
                        acc += k[static_cast<std::size_t>(i + r)] *
                               tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
                    }
                    img.at(c, y, x) = acc;
                }
            }
        }
    }
    const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    const double min = *lo;
    const double range = *hi - *lo;
    for (double& v : img.pixels()) {
        v = range > 0.0 ? (v - min) / range : 0.5;
    }
    return img;
}

} // namespace

StereoPair synthesize_pair(const SyntheticConfig& cfg, std::size_t index) {
    if (cfg.channels <= 0 || cfg.height <= 0 || cfg.width <= 0) {
        throw InvalidArgument("synthetic: invalid image dims");
    }
    Rng source_rng = make_stream(cfg.seed, "synthetic-source", index);
    StereoPair pair;
    pair.pair_id = fmt::format("synthetic-{:06d}", index);
    pair.x = smooth_field(cfg, source_rng);
    switch (cfg.mode) {
    case CorrelationMode::additive_noise: {
        Rng noise_rng = make_stream(cfg.seed, "synthetic-side-noise", index);
        std::normal_distribution<double> normal(0.0, 1.0);
        pair.x_side = pair.x;
        for (double& v : pair.x_side.pixels()) {
            v = std::clamp(v + cfg.noise_std * normal(noise_rng), 0.0, 1.0);
        }
        break;
    }
    case CorrelationMode::shift: {
        pair.x_side = ImageTensor(cfg.channels, cfg.height, cfg.width);
        for (int c = 0; c < cfg.channels; ++c) {
            for (int y = 0; y < cfg.height; ++y) {
                for (int x = 0; x < cfg.width; ++x) {
                    pair.x_side.at(c, y, x) = pair.x.at(c, y, std::clamp(x - cfg.shift_px, 0, cfg.width - 1));
                }
            }
        }
        break;
    }
    case CorrelationMode::independent: {
        Rng side_rng = make_stream(cfg.seed, "synthetic-independent-side", index);
        pair.x_side = smooth_field(cfg, side_rng);
        break;
    }
    }
    return pair;
}

std::vector<StereoPair> generate_synthetic(const SyntheticConfig& cfg, Split split) {
    std::size_t first = 0;
    if (split != Split::train) {
        first += cfg.counts.train;
    }
    if (split == Split::test) {
        first += cfg.counts.val;
    }
    std::vector<StereoPair> pairs;
    const std::size_t count = cfg.counts.of(split);
    pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        pairs.push_back(synthesize_pair(cfg, first + i));
    }
    return pairs;
}

std::vector<StereoPair> generate_synthetic(const SyntheticConfig& cfg) {
    std::vector<StereoPair> all;
    for (Split s : {Split::train, Split::val, Split::test}) {
        auto part = generate_synthetic(cfg, s);
        std::move(part.begin(), part.end(), std::back_inserter(all));
    }
    return all;
}

// ---------------------------------------------------------------- manifests

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingResource(fmt::format("dataset manifest {} not found", path.string()));
    }
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) {
            fields.push_back(field);
        }
        if (fields.size() != 4) {
            throw ConfigError(fmt::format("{}:{}: expected 4 tab-separated fields, got {}", path.string(), line_no,
                                          fields.size()));
        }
        entries.push_back({fields[0], fields[1], fields[2], parse_split(fields[3])});
    }
    return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    out << "# pair_id\tleft_path\tright_path\tsplit\n";
    for (const auto& e : entries) {
        out << e.pair_id << '\t' << e.left.generic_string() << '\t' << e.right.generic_string() << '\t'
            << to_string(e.split) << '\n';
    }
    if (!out) {
        throw ConfigError(fmt::format("cannot write manifest {}", path.string()));
    }
}

std::vector<StereoPair> load_split(const DatasetSpec& spec, Split split) {
    if (spec.name == DatasetName::synthetic) {
        return generate_synthetic(spec.synthetic, split);
    }
    if (!fs::is_directory(spec.root)) {
        throw MissingResource(fmt::format("dataset root {} does not exist", spec.root.string()));
    }
    const auto entries = read_manifest(spec.root / spec.manifest);

    std::map<std::string, Split> seen;
    for (const auto& e : entries) {
        const auto [it, inserted] = seen.emplace(e.pair_id, e.split);
        if (!inserted) {
            throw ConfigError(fmt::format("pair_id '{}' is listed more than once ({} and {})", e.pair_id,
                                          to_string(it->second), to_string(e.split)));
        }
    }

    std::vector<const ManifestEntry*> selected;
    std::vector<std::string> missing;
    for (const auto& e : entries) {
        if (e.split != split) {
            continue;
        }
        selected.push_back(&e);
        if (!fs::exists(spec.root / e.left) || !fs::exists(spec.root / e.right)) {
            missing.push_back(e.pair_id);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) {
            list += (list.empty() ? "" : ", ") + id;
        }
        throw MissingResource(fmt::format("{} split '{}': image files missing for pair_ids: {}", to_string(spec.name),
                                          to_string(split), list));
    }
    const std::size_t expected = spec.sizes.of(split);
    if (selected.size() != expected) {
        throw MissingResource(fmt::format("{} split '{}' lists {} pairs, expected {}", to_string(spec.name),
                                          to_string(split), selected.size(), expected));
    }

    std::vector<StereoPair> pairs;
    pairs.reserve(selected.size());
    for (const ManifestEntry* e : selected) {
        const RgbImage left = read_image(spec.root / e->left);
        const RgbImage right = read_image(spec.root / e->right);
        StereoPair pair;
        pair.pair_id = e->pair_id;
        if (spec.name == DatasetName::kittistereo) {
            pair.x = preprocess_kitti(left);
            pair.x_side = preprocess_kitti(right);
        } else {
            pair.x = preprocess_cityscape(left, spec.height, spec.width);
            pair.x_side = preprocess_cityscape(right, spec.height, spec.width);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

void export_synthetic(const SyntheticConfig& config, const fs::path& dir) {
    fs::create_directories(dir / "left");
    fs::create_directories(dir / "right");
    std::vector<ManifestEntry> entries;
    std::size_t index = 0;
    for (Split split : {Split::train, Split::val, Split::test}) {
        for (std::size_t i = 0; i < config.counts.of(split); ++i, ++index) {
            const StereoPair pair = synthesize_pair(config, index);
            const fs::path left = fs::path("left") / (pair.pair_id + ".png");
            const fs::path right = fs::path("right") / (pair.pair_id + ".png");
            write_png(dir / left, to_rgb8(pair.x));
            write_png(dir / right, to_rgb8(pair.x_side));
            entries.push_back({pair.pair_id, left, right, split});
        }
    }
    write_manifest(dir / "manifest.tsv", entries);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw InvalidArgument("pearson: inputs must be equally sized and nonempty");
    }
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) {
        return 0.0;
    }
    return cov / std::sqrt(va * vb);
}

} // namespace wzjscc::data
