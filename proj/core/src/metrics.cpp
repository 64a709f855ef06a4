#include "wzjscc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/core.h>
#include <openssl/evp.h>

#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"

namespace wzjscc::metrics {

using nn::Tensor;

double psnr_from_mse(double mse, double peak) {
    if (!(peak > 0.0)) {
        throw InvalidArgument(fmt::format("psnr: peak must be positive, got {}", peak));
    }
    if (!(mse > 0.0)) {
        return kPsnrCapDb;
    }
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const ImageTensor& x, const ImageTensor& x_hat, double peak) {
    if (!x.same_dims(x_hat)) {
        throw InvalidArgument("psnr: image dimensions differ");
    }
    const auto a = x.pixels();
    const auto b = x_hat.pixels();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return psnr_from_mse(acc / static_cast<double>(a.size()), peak);
}

// ---------------------------------------------------------------- MS-SSIM

namespace {

struct Plane {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const double centre = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - centre;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[static_cast<std::size_t>(i)];
    }
    for (double& e : g) {
        e /= total;
    }
    return g;
}

// Separable "valid" filtering.
Plane filter_valid(const Plane& p, const std::vector<double>& g) {
    const int k = static_cast<int>(g.size());
    Plane rows{p.h, p.w - k + 1, {}};
    rows.v.resize(static_cast<std::size_t>(rows.h) * rows.w);
    for (int y = 0; y < rows.h; ++y) {
        for (int x = 0; x < rows.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) {
                acc += g[static_cast<std::size_t>(i)] * p.at(y, x + i);
            }
            rows.v[static_cast<std::size_t>(y) * rows.w + x] = acc;
        }
    }
    Plane out{p.h - k + 1, rows.w, {}};
    out.v.resize(static_cast<std::size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) {
                acc += g[static_cast<std::size_t>(i)] * rows.at(y + i, x);
            }
            out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out{a.h, a.w, std::vector<double>(a.v.size())};
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        out.v[i] = a.v[i] * b.v[i];
    }
    return out;
}

Plane avg_pool2(const Plane& p) {
    Plane out{p.h / 2, p.w / 2, {}};
    out.v.resize(static_cast<std::size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            out.v[static_cast<std::size_t>(y) * out.w + x] =
                0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) +
                        p.at(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

// Mean SSIM and mean contrast-structure term over the valid window positions.
std::pair<double, double> ssim_terms(const Plane& a, const Plane& b, const std::vector<double>& g) {
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const Plane mu_a = filter_valid(a, g);
    const Plane mu_b = filter_valid(b, g);
    const Plane aa = filter_valid(product(a, a), g);
    const Plane bb = filter_valid(product(b, b), g);
    const Plane ab = filter_valid(product(a, b), g);
    double ssim_sum = 0.0;
    double cs_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i];
        const double mb = mu_b.v[i];
        const double var_a = aa.v[i] - ma * ma;
        const double var_b = bb.v[i] - mb * mb;
        const double cov = ab.v[i] - ma * mb;
        const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += cs;
        ssim_sum += lum * cs;
    }
    const double count = static_cast<double>(mu_a.v.size());
    return {ssim_sum / count, cs_sum / count};
}

} // namespace

int ms_ssim_scales(int height, int width) { return std::min(height, width) >= 160 ? 5 : 3; }

double ms_ssim(const ImageTensor& x, const ImageTensor& y) {
    if (!x.same_dims(y)) {
        throw InvalidArgument("ms_ssim: image dimensions differ");
    }
    const int min_side = std::min(x.height(), x.width());
    if (min_side < kMsSsimMinSide) {
        throw InvalidArgument(fmt::format("ms_ssim: images must be at least {}x{} pixels, got {}x{}", kMsSsimMinSide,
                                          kMsSsimMinSide, x.height(), x.width()));
    }
    static constexpr std::array<double, 5> kWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    const int scales = ms_ssim_scales(x.height(), x.width());
    std::vector<double> weights(kWeights.begin(), kWeights.begin() + scales);
    // The full five-scale set is used verbatim; a truncated set is rescaled
    // so its exponents still sum to one.
    if (scales < static_cast<int>(kWeights.size())) {
        const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) {
            w /= weight_sum;
        }
    }
    const int coarsest = min_side >> (scales - 1);
    int window = std::min(11, coarsest);
    if (window % 2 == 0) {
        --window;
    }
    const auto g = gaussian_window(window, 1.5);

    const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
    double total = 0.0;
    for (int c = 0; c < x.channels(); ++c) {
        Plane a{x.height(), x.width(),
                std::vector<double>(x.pixels().begin() + c * plane, x.pixels().begin() + (c + 1) * plane)};
        Plane b{y.height(), y.width(),
                std::vector<double>(y.pixels().begin() + c * plane, y.pixels().begin() + (c + 1) * plane)};
        double value = 1.0;
        for (int s = 0; s < scales; ++s) {
            const auto [ssim, cs] = ssim_terms(a, b, g);
            const double term = s + 1 < scales ? cs : ssim;
            value *= std::pow(std::max(term, 0.0), weights[static_cast<std::size_t>(s)]);
            if (s + 1 < scales) {
                a = avg_pool2(a);
                b = avg_pool2(b);
            }
        }
        total += value;
    }
    return std::clamp(total / x.channels(), 0.0, 1.0);
}

// ---------------------------------------------------------------- LPIPS

namespace {

constexpr std::array<char, 8> kNetMagic{'W', 'Z', 'J', 'S', 'F', 'N', 'E', 'T'};
constexpr std::uint32_t kNetVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw ConfigError("feature-net asset is truncated");
    }
    return v;
}

void put_doubles(std::ostream& out, std::span<const double> values) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::span<double> values) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) {
        throw ConfigError("feature-net asset is truncated");
    }
}

std::string serialize(const FeatureNet& net) {
    std::ostringstream out(std::ios::binary);
    out.write(kNetMagic.data(), kNetMagic.size());
    put<std::uint32_t>(out, kNetVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.provenance().size()));
    out.write(net.provenance().data(), static_cast<std::streamsize>(net.provenance().size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
        const auto& conv = layer.conv;
        const nn::Shape ws = conv.weight().shape();
        put<std::int32_t>(out, ws.c);
        put<std::int32_t>(out, ws.n);
        put<std::int32_t>(out, ws.h);
        put<std::int32_t>(out, layer.stride);
        put<double>(out, layer.slope);
        put_doubles(out, conv.weight().data());
        put_doubles(out, conv.bias().data());
        put_doubles(out, layer.channel_weights);
    }
    return std::move(out).str();
}

} // namespace

FeatureNet FeatureNet::surrogate(std::uint64_t seed) {
    FeatureNet net;
    struct Spec {
        int in, out, stride;
    };
    constexpr std::array<Spec, 3> specs{{{3, 16, 1}, {16, 32, 2}, {32, 32, 2}}};
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        net.layers_.push_back(Layer{nn::Conv2d(fmt::format("lpips.layer{}", i), s.in, s.out, 3, s.stride, seed),
                                    s.stride, 0.2, std::vector<double>(static_cast<std::size_t>(s.out), 1.0)});
    }
    net.provenance_ = fmt::format("surrogate:seed={}", seed);
    return net;
}

std::filesystem::path FeatureNet::default_asset_path() {
    const char* dir = std::getenv("WZJSCC_ASSET_DIR");
    const std::filesystem::path base = dir != nullptr && *dir != '\0' ? std::filesystem::path(dir) : "assets";
    return base / "lpips_backbone.wzfn";
}

FeatureNet FeatureNet::load(const std::filesystem::path& asset) {
    std::ifstream in(asset, std::ios::binary);
    if (!in) {
        throw MissingResource(fmt::format(
            "LPIPS feature-net asset not found at '{}'. Convert the pretrained LPIPS backbone (conv weights, "
            "biases and per-channel linear weights) into the wzjscc .wzfn format and place it there, or point "
            "WZJSCC_ASSET_DIR at the directory holding lpips_backbone.wzfn. Use the 'surrogate' feature net for "
            "hermetic runs.",
            asset.string()));
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kNetMagic) {
        throw ConfigError(fmt::format("{} is not a wzjscc feature-net asset", asset.string()));
    }
    if (get<std::uint32_t>(in) != kNetVersion) {
        throw ConfigError(fmt::format("{} has an unsupported feature-net version", asset.string()));
    }
    FeatureNet net;
    net.provenance_.resize(get<std::uint32_t>(in));
    in.read(net.provenance_.data(), static_cast<std::streamsize>(net.provenance_.size()));
    const auto count = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const int in_c = get<std::int32_t>(in);
        const int out_c = get<std::int32_t>(in);
        const int k = get<std::int32_t>(in);
        const int stride = get<std::int32_t>(in);
        const double slope = get<double>(in);
        Layer layer{nn::Conv2d(fmt::format("lpips.layer{}", i), in_c, out_c, k, stride, 0), stride, slope,
                    std::vector<double>(static_cast<std::size_t>(out_c))};
        get_doubles(in, layer.conv.weight().mutable_data());
        get_doubles(in, layer.conv.bias().mutable_data());
        get_doubles(in, layer.channel_weights);
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

void FeatureNet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const std::string bytes = serialize(*this);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ConfigError(fmt::format("cannot write feature-net asset {}", path.string()));
    }
}

std::string FeatureNet::checksum() const {
    const std::string bytes = serialize(*this);
    return sha256_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

Tensor FeatureNet::distance(const Tensor& x, const Tensor& y) const {
    if (x.shape() != y.shape()) {
        throw InvalidArgument(fmt::format("lpips: shapes differ {} vs {}", x.shape().str(), y.shape().str()));
    }
    // [0,1] -> [-1,1]
    const std::vector<double> shift(x.numel(), -1.0);
    Tensor hx = nn::add_constant(nn::scale(x, 2.0), shift);
    Tensor hy = nn::add_constant(nn::scale(y, 2.0), shift);
    Tensor total;
    const int n = x.shape().n;
    for (const auto& layer : layers_) {
        hx = nn::leaky_relu(layer.conv.forward(hx), layer.slope);
        hy = nn::leaky_relu(layer.conv.forward(hy), layer.slope);
        const Tensor diff = nn::sub(nn::unit_normalize_channels(hx, 1e-10), nn::unit_normalize_channels(hy, 1e-10));
        const int c = diff.shape().c;
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(n * c));
        for (int i = 0; i < n; ++i) {
            w.insert(w.end(), layer.channel_weights.begin(), layer.channel_weights.end());
        }
        const Tensor weighted =
            nn::channel_gate(nn::mul(diff, diff), Tensor::constant(nn::Shape{n, c, 1, 1}, std::move(w)));
        // Σ_c mean_hw == C · mean_chw
        const Tensor term = nn::scale(nn::mean_per_item(weighted), static_cast<double>(c));
        total = total.defined() ? nn::add(total, term) : term;
    }
    return total;
}

double lpips(const ImageTensor& x, const ImageTensor& y, const FeatureNet& net) {
    if (!x.same_dims(y)) {
        throw InvalidArgument("lpips: image dimensions differ");
    }
    nn::NoGradGuard guard;
    return net.distance(to_batch(x), to_batch(y)).item();
}

Tensor lpips_loss(const Tensor& x, const Tensor& x_hat, const FeatureNet& net) {
    return nn::mean(net.distance(x, x_hat));
}

Summary summarize(std::span<const double> values) {
    if (values.empty()) {
        return {};
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        var += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

MetricReport evaluate(std::span<const ImageTensor> reference, std::span<const ImageTensor> reconstructed,
                      const FeatureNet& net) {
    if (reference.size() != reconstructed.size()) {
        throw InvalidArgument("evaluate: reference and reconstruction counts differ");
    }
    MetricReport report;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        report.psnr_db.push_back(psnr(reference[i], reconstructed[i]));
        report.ms_ssim.push_back(ms_ssim(reference[i], reconstructed[i]));
        report.lpips.push_back(lpips(reference[i], reconstructed[i], net));
    }
    return report;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingResource(fmt::format("cannot read {}", path.string()));
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

} // namespace wzjscc::metrics
