#include "wzjscc/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"
#include "wzjscc/ops.hpp"

namespace wzjscc::codec {

using nn::Tensor;

std::string_view to_string(VariantKind kind) {
    switch (kind) {
    case VariantKind::point2point:
        return "point2point";
    case VariantKind::wz:
        return "wz";
    case VariantKind::wz_sm:
        return "wz_sm";
    case VariantKind::cond:
        return "cond";
    }
    return "unknown";
}

VariantKind parse_variant(std::string_view name) {
    if (name == "point2point" || name == "deepjscc" || name == "p2p") {
        return VariantKind::point2point;
    }
    if (name == "wz") {
        return VariantKind::wz;
    }
    if (name == "wz_sm" || name == "wz-sm") {
        return VariantKind::wz_sm;
    }
    if (name == "cond" || name == "joint") {
        return VariantKind::cond;
    }
    throw ConfigError(fmt::format("unknown variant '{}' (expected point2point, wz, wz_sm or cond)", name));
}

std::array<int, 4> ModelConfig::widths() const {
    if (width_schedule.empty()) {
        return {base_width, 2 * base_width, 4 * base_width, 4 * base_width};
    }
    return {width_schedule.at(0), width_schedule.at(1), width_schedule.at(2), width_schedule.at(3)};
}

std::size_t ModelConfig::bandwidth() const {
    return channel::bandwidth_symbols(rho, static_cast<std::size_t>(image.channels) * image.height * image.width);
}

int ModelConfig::latent_channels() const {
    const std::size_t grid = static_cast<std::size_t>(latent_height()) * latent_width();
    return grid == 0 ? 0 : static_cast<int>(2 * bandwidth() / grid);
}

bool ModelConfig::has_attention(int stage) const {
    return std::find(attention_stages.begin(), attention_stages.end(), stage) != attention_stages.end();
}

void ModelConfig::validate() const {
    if (image.channels <= 0 || image.height <= 0 || image.width <= 0) {
        throw ConfigError(fmt::format("invalid image dims {}x{}x{}", image.channels, image.height, image.width));
    }
    if (image.height % 16 != 0 || image.width % 16 != 0) {
        throw ConfigError(fmt::format("image {}x{} must be divisible by 16 (four stride-2 stages)", image.height,
                                      image.width));
    }
    if (!(rho > 0.0) || !(rho <= 1.0)) {
        throw ConfigError(fmt::format("bandwidth ratio rho={} outside (0, 1]", rho));
    }
    if (!(p_avg > 0.0)) {
        throw ConfigError(fmt::format("p_avg must be positive, got {}", p_avg));
    }
    if (!width_schedule.empty() && width_schedule.size() != 4) {
        throw ConfigError(fmt::format("width_schedule needs 4 entries, got {}", width_schedule.size()));
    }
    if (width_schedule.empty() && base_width <= 0) {
        throw ConfigError(fmt::format("base_width must be positive, got {}", base_width));
    }
    for (int w : widths()) {
        if (w <= 0) {
            throw ConfigError("stage widths must be positive");
        }
    }
    for (int s : attention_stages) {
        if (s < 1 || s > 4) {
            throw ConfigError(fmt::format("attention stage {} outside 1..4", s));
        }
    }
    const std::size_t k = bandwidth();
    const std::size_t grid = static_cast<std::size_t>(latent_height()) * latent_width();
    if (k == 0 || (2 * k) % grid != 0 || ((2 * k) / grid) % 2 != 0) {
        throw ConfigError(fmt::format(
            "rho={} with a {}x{}x{} image gives k={} symbols, which does not split into an even number of "
            "channels over the {}x{} latent grid",
            rho, image.channels, image.height, image.width, k, latent_height(), latent_width()));
    }
}

double parse_ratio(std::string_view text) {
    auto parse = [&](std::string_view part) {
        double v = 0.0;
        const auto* end = part.data() + part.size();
        const auto [ptr, ec] = std::from_chars(part.data(), end, v);
        if (ec != std::errc() || ptr != end) {
            throw ConfigError(fmt::format("cannot parse ratio '{}'", text));
        }
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        return parse(text);
    }
    const double den = parse(text.substr(slash + 1));
    if (den == 0.0) {
        throw ConfigError(fmt::format("zero denominator in ratio '{}'", text));
    }
    return parse(text.substr(0, slash)) / den;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{
        {"variant", std::string(to_string(c.variant))},
        {"rho", c.rho},
        {"base_width", c.base_width},
        {"width_schedule", c.width_schedule},
        {"attention_stages", c.attention_stages},
        {"image", {{"channels", c.image.channels}, {"height", c.image.height}, {"width", c.image.width}}},
        {"p_avg", c.p_avg},
        {"seed", c.seed},
    };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.variant = parse_variant(j.value("variant", std::string(to_string(d.variant))));
    if (j.contains("rho") && j["rho"].is_string()) {
        c.rho = parse_ratio(j["rho"].get<std::string>());
    } else {
        c.rho = j.value("rho", d.rho);
    }
    c.base_width = j.value("base_width", d.base_width);
    c.width_schedule = j.value("width_schedule", d.width_schedule);
    c.attention_stages = j.value("attention_stages", d.attention_stages);
    if (j.contains("image")) {
        const auto& im = j["image"];
        c.image.channels = im.value("channels", d.image.channels);
        c.image.height = im.value("height", d.image.height);
        c.image.width = im.value("width", d.image.width);
    } else {
        c.image = d.image;
    }
    c.p_avg = j.value("p_avg", d.p_avg);
    c.seed = j.value("seed", d.seed);
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(std::string name, const ModelConfig& config, EncoderLayout layout) : layout_(layout) {
    const auto widths = config.widths();
    int in = layout.in_channels;
    for (int i = 0; i < 4; ++i) {
        const std::string prefix = fmt::format("{}.stage{}", name, i + 1);
        int fused_in = in;
        if (layout.fuse_side) {
            fused_in += i == 0 ? config.image.channels : widths[static_cast<std::size_t>(i - 1)];
        }
        const int out = widths[static_cast<std::size_t>(i)];
        Stage stage{nn::Conv2d(prefix + ".down", fused_in, out, 3, 2, config.seed),
                    nn::ResidualBlock(prefix + ".res", out, config.seed), std::nullopt,
                    nn::AFModule(prefix + ".af", out, layout.context_size, config.seed)};
        if (config.has_attention(i + 1)) {
            stage.attention.emplace(prefix + ".attn", out, config.seed);
        }
        stages_.push_back(std::move(stage));
        in = out;
    }
    if (layout.with_head) {
        const int head_in = in + (layout.fuse_side ? widths[3] : 0);
        head_.emplace(name + ".head", head_in, config.latent_channels(), 3, 1, config.seed);
    }
}

Encoder::Output Encoder::forward(const Tensor& x, const Tensor& context, const FeaturePyramid* side,
                                 const Tensor* side_image) const {
    if (layout_.fuse_side && (side == nullptr || side_image == nullptr)) {
        throw InvalidArgument("encoder with side fusion needs the side pyramid and image");
    }
    Output out;
    Tensor h = x;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const Stage& stage = stages_[i];
        Tensor in = h;
        if (layout_.fuse_side) {
            const std::array<Tensor, 2> parts{h, i == 0 ? *side_image : side->levels[i - 1]};
            in = nn::concat_channels(parts);
        }
        h = nn::leaky_relu(stage.down.forward(in), nn::kLeakySlope);
        h = stage.residual.forward(h);
        if (stage.attention) {
            h = stage.attention->forward(h);
        }
        h = stage.af.forward(h, context);
        out.pyramid.levels[i] = h;
    }
    if (head_) {
        Tensor in = h;
        if (layout_.fuse_side) {
            const std::array<Tensor, 2> parts{h, side->levels[3]};
            in = nn::concat_channels(parts);
        }
        out.latent = head_->forward(in);
    }
    return out;
}

void Encoder::collect(std::vector<nn::NamedTensor>& out) const {
    for (const auto& stage : stages_) {
        stage.down.collect(out);
        stage.residual.collect(out);
        if (stage.attention) {
            stage.attention->collect(out);
        }
        stage.af.collect(out);
    }
    if (head_) {
        head_->collect(out);
    }
}

// ---------------------------------------------------------------- Decoder

Decoder::Decoder(std::string name, const ModelConfig& config, bool fuse_side) : fuse_side_(fuse_side) {
    const auto widths = config.widths();
    const std::uint64_t seed = config.seed;
    const int latent_in = config.latent_channels() + (fuse_side ? widths[3] : 0);
    latent_in_ = nn::Conv2d(name + ".latent.in", latent_in, widths[3], 3, 1, seed);
    latent_residual_ = nn::ResidualBlock(name + ".latent.res", widths[3], seed);
    if (config.has_attention(4)) {
        latent_attention_.emplace(name + ".latent.attn", widths[3], seed);
    }
    latent_af_ = nn::AFModule(name + ".latent.af", widths[3], 1, seed);

    int prev = widths[3];
    // Stages produce scales 3, 2, 1 (pyramid levels) and 0 (full resolution).
    for (int scale = 3; scale >= 0; --scale) {
        const std::string prefix = fmt::format("{}.up{}", name, scale);
        const int out = widths[static_cast<std::size_t>(std::max(scale - 1, 0))];
        const int side_c = scale > 0 ? widths[static_cast<std::size_t>(scale - 1)] : config.image.channels;
        Stage stage{nn::Conv2d(prefix + ".up", prev, out, 3, 1, seed),
                    nn::Conv2d(prefix + ".fuse", out + (fuse_side ? side_c : 0), out, 3, 1, seed),
                    nn::ResidualBlock(prefix + ".res", out, seed), std::nullopt,
                    nn::AFModule(prefix + ".af", out, 1, seed)};
        if (scale > 0 && config.has_attention(scale)) {
            stage.attention.emplace(prefix + ".attn", out, seed);
        }
        stages_.push_back(std::move(stage));
        prev = out;
    }
    out_ = nn::Conv2d(name + ".out", prev, config.image.channels, 3, 1, seed);
}

Tensor Decoder::forward(const Tensor& y, const Tensor& context, const FeaturePyramid* side,
                        const Tensor* side_image) const {
    if (fuse_side_ && (side == nullptr || side_image == nullptr)) {
        throw InvalidArgument("decoder with side fusion needs the side pyramid and image");
    }
    Tensor in = y;
    if (fuse_side_) {
        const std::array<Tensor, 2> parts{y, side->level(4)};
        in = nn::concat_channels(parts);
    }
    Tensor h = nn::leaky_relu(latent_in_.forward(in), nn::kLeakySlope);
    h = latent_residual_.forward(h);
    if (latent_attention_) {
        h = latent_attention_->forward(h);
    }
    h = latent_af_.forward(h, context);

    int scale = 3;
    for (const Stage& stage : stages_) {
        h = nn::leaky_relu(stage.up.forward(nn::upsample_nearest2x(h)), nn::kLeakySlope);
        if (fuse_side_) {
            const std::array<Tensor, 2> parts{h, scale > 0 ? side->level(scale) : *side_image};
            h = nn::concat_channels(parts);
        }
        h = nn::leaky_relu(stage.fuse.forward(h), nn::kLeakySlope);
        h = stage.residual.forward(h);
        if (stage.attention) {
            h = stage.attention->forward(h);
        }
        h = stage.af.forward(h, context);
        --scale;
    }
    return nn::sigmoid(out_.forward(h));
}

void Decoder::collect(std::vector<nn::NamedTensor>& out) const {
    latent_in_.collect(out);
    latent_residual_.collect(out);
    if (latent_attention_) {
        latent_attention_->collect(out);
    }
    latent_af_.collect(out);
    for (const auto& stage : stages_) {
        stage.up.collect(out);
        stage.fuse.collect(out);
        stage.residual.collect(out);
        if (stage.attention) {
            stage.attention->collect(out);
        }
        stage.af.collect(out);
    }
    out_.collect(out);
}

// ---------------------------------------------------------------- VariantModel

VariantModel::VariantModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    k_ = config_.bandwidth();
    const int c = config_.image.channels;
    switch (config_.variant) {
    case VariantKind::point2point:
        encoder_ = std::make_shared<Encoder>("encoder", config_, EncoderLayout{c, 1, true, false});
        decoder_ = std::make_shared<Decoder>("decoder", config_, false);
        break;
    case VariantKind::wz:
        encoder_ = std::make_shared<Encoder>("encoder", config_, EncoderLayout{c, 1, true, false});
        side_encoder_ = std::make_shared<Encoder>("side_encoder", config_, EncoderLayout{c, 1, false, false});
        decoder_ = std::make_shared<Decoder>("decoder", config_, true);
        break;
    case VariantKind::wz_sm:
        encoder_ = std::make_shared<Encoder>("encoder", config_, EncoderLayout{c, 2, true, false});
        side_encoder_ = encoder_;
        decoder_ = std::make_shared<Decoder>("decoder", config_, true);
        break;
    case VariantKind::cond:
        tx_side_encoder_ =
            std::make_shared<Encoder>("tx_side_encoder", config_, EncoderLayout{c, 1, false, false});
        encoder_ = std::make_shared<Encoder>("encoder", config_, EncoderLayout{c, 1, true, true});
        side_encoder_ = std::make_shared<Encoder>("side_encoder", config_, EncoderLayout{c, 1, false, false});
        decoder_ = std::make_shared<Decoder>("decoder", config_, true);
        break;
    }
}

nn::Shape VariantModel::latent_shape(int batch) const {
    return nn::Shape{batch, config_.latent_channels(), config_.latent_height(), config_.latent_width()};
}

void VariantModel::check_batch(const Tensor& x, std::span<const double> sigma2, const char* what) const {
    const nn::Shape s = x.shape();
    const auto& im = config_.image;
    if (s.c != im.channels || s.h != im.height || s.w != im.width) {
        throw InvalidArgument(fmt::format("{}: input {} does not match configured image {}x{}x{}", what, s.str(),
                                          im.channels, im.height, im.width));
    }
    if (sigma2.size() != static_cast<std::size_t>(s.n)) {
        throw InvalidArgument(fmt::format("{}: {} noise powers for a batch of {}", what, sigma2.size(), s.n));
    }
    for (double v : sigma2) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument(fmt::format("{}: noise power must be positive and finite, got {}", what, v));
        }
    }
}

Tensor VariantModel::context(std::span<const double> sigma2, std::optional<SideFlag> flag) const {
    const int n = static_cast<int>(sigma2.size());
    const int m = flag ? 2 : 1;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n * m));
    for (double s2 : sigma2) {
        values.push_back(channel::sigma2_to_snr(s2, config_.p_avg));
        if (flag) {
            values.push_back(static_cast<double>(*flag));
        }
    }
    return Tensor::constant(nn::Shape{n, m, 1, 1}, std::move(values));
}

VariantModel::Encoded VariantModel::encode(const Tensor& x, std::span<const double> sigma2, SideFlag flag,
                                           const Tensor* x_side) const {
    check_batch(x, sigma2, "encode");
    const bool sm = config_.variant == VariantKind::wz_sm;
    const Tensor ctx = context(sigma2, sm ? std::optional<SideFlag>(flag) : std::nullopt);
    if (config_.variant == VariantKind::cond) {
        if (x_side == nullptr) {
            throw InvalidArgument("encode: the cond transmitter needs x_side");
        }
        check_batch(*x_side, sigma2, "encode(x_side)");
        const auto tx_side = tx_side_encoder_->forward(*x_side, ctx);
        auto out = encoder_->forward(x, ctx, &tx_side.pyramid, x_side);
        return {out.latent, out.pyramid};
    }
    if (x_side != nullptr) {
        throw InvalidArgument(fmt::format("encode: variant {} has no side information at the transmitter",
                                          to_string(config_.variant)));
    }
    auto out = encoder_->forward(x, ctx);
    return {out.latent, out.pyramid};
}

FeaturePyramid VariantModel::receiver_pyramid(const Tensor& x_side, std::span<const double> sigma2) const {
    check_batch(x_side, sigma2, "side encoder");
    const bool sm = config_.variant == VariantKind::wz_sm;
    const Tensor ctx = context(sigma2, sm ? std::optional<SideFlag>(SideFlag::side) : std::nullopt);
    return side_encoder_->forward(x_side, ctx).pyramid;
}

FeaturePyramid VariantModel::encode_side(const Tensor& x_side, std::span<const double> sigma2) const {
    if (config_.variant != VariantKind::wz && config_.variant != VariantKind::wz_sm) {
        throw UnsupportedVariant(
            fmt::format("encode_side is defined for wz and wz_sm, not {}", to_string(config_.variant)));
    }
    return receiver_pyramid(x_side, sigma2);
}

Tensor VariantModel::decode(const Tensor& y, const Tensor* x_side, std::span<const double> sigma2) const {
    const nn::Shape expected = latent_shape(y.shape().n);
    if (y.shape() != expected) {
        throw InvalidArgument(fmt::format("decode: received grid {} but expected {}", y.shape().str(),
                                          expected.str()));
    }
    if (sigma2.size() != static_cast<std::size_t>(expected.n)) {
        throw InvalidArgument("decode: one noise power per batch item is required");
    }
    const Tensor ctx = context(sigma2, std::nullopt);
    if (config_.variant == VariantKind::point2point) {
        if (x_side != nullptr) {
            throw InvalidArgument("decode: point2point takes no side information");
        }
        return decoder_->forward(y, ctx, nullptr, nullptr);
    }
    if (x_side == nullptr) {
        throw InvalidArgument(fmt::format("decode: variant {} needs x_side", to_string(config_.variant)));
    }
    if (x_side->shape().n != expected.n) {
        throw InvalidArgument("decode: x_side batch differs from the received batch");
    }
    const FeaturePyramid side = receiver_pyramid(*x_side, sigma2);
    return decoder_->forward(y, ctx, &side, x_side);
}

std::vector<nn::NamedTensor> VariantModel::parameters() const {
    std::vector<nn::NamedTensor> all;
    if (tx_side_encoder_) {
        tx_side_encoder_->collect(all);
    }
    encoder_->collect(all);
    if (side_encoder_ && side_encoder_ != encoder_) {
        side_encoder_->collect(all);
    }
    decoder_->collect(all);
    // Aliased storage is reported once.
    std::unordered_set<const void*> seen;
    std::vector<nn::NamedTensor> unique;
    for (auto& p : all) {
        if (seen.insert(p.tensor.storage_id()).second) {
            unique.push_back(std::move(p));
        }
    }
    return unique;
}

std::size_t VariantModel::count_parameters() const {
    std::size_t total = 0;
    for (const auto& p : parameters()) {
        total += p.tensor.numel();
    }
    return total;
}

VariantModel VariantModel::clone() const {
    VariantModel copy(config_);
    copy.load_parameters_from(*this);
    return copy;
}

void VariantModel::load_parameters_from(const VariantModel& other) {
    if (!(other.config_ == config_)) {
        throw ConfigError("load_parameters_from: model configurations differ");
    }
    auto dst = parameters();
    const auto src = other.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const auto values = src[i].tensor.data();
        std::copy(values.begin(), values.end(), dst[i].tensor.mutable_data().begin());
    }
}

VariantModel build_model(const ModelConfig& config) { return VariantModel(config); }

std::size_t count_parameters(const VariantModel& model) { return model.count_parameters(); }

// ---------------------------------------------------------------- link

LinkOutput simulate_link(const VariantModel& model, const Tensor& x, const Tensor& x_side,
                         std::span<const double> sigma2, std::span<const std::uint64_t> noise_seeds,
                         bool check_power) {
    const int n = x.shape().n;
    if (noise_seeds.size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("simulate_link: one noise seed per batch item is required");
    }
    const auto variant = model.variant();
    const bool uses_side = variant != VariantKind::point2point;
    if (uses_side && !x_side.defined()) {
        throw InvalidArgument(fmt::format("simulate_link: variant {} needs x_side", to_string(variant)));
    }
    const double p_avg = model.config().p_avg;
    const auto encoded = model.encode(x, sigma2, SideFlag::source, variant == VariantKind::cond ? &x_side : nullptr);
    const Tensor z = nn::power_normalize(encoded.latent, p_avg);

    const nn::Shape ls = z.shape();
    const std::size_t item = ls.item_size();
    const std::size_t k = model.bandwidth();
    std::vector<double> noise(z.numel());
    for (int i = 0; i < n; ++i) {
        const auto zi = z.data().subspan(i * item, item);
        if (check_power) {
            const auto sym = channel::pack_complex(zi, static_cast<std::size_t>(ls.c), static_cast<std::size_t>(ls.h),
                                                   static_cast<std::size_t>(ls.w));
            const double p = channel::ChannelSymbols{sym}.average_power();
            if (std::abs(p - p_avg) / p_avg >= 1e-5) {
                throw NumericalError(fmt::format("power constraint violated: {} vs budget {}", p, p_avg));
            }
        }
        // Zero input to the channel returns the noise realization itself.
        channel::ChannelState state(sigma2[static_cast<std::size_t>(i)], p_avg, noise_seeds[static_cast<std::size_t>(i)]);
        const channel::ChannelSymbols silent{std::vector<channel::Complex>(k)};
        const auto n_i = channel::unpack_complex(channel::awgn_transmit(silent, state, k));
        std::copy(n_i.begin(), n_i.end(), noise.begin() + static_cast<std::ptrdiff_t>(i * item));
    }
    const Tensor y = nn::add_constant(z, noise);
    Tensor reconstruction = model.decode(y, uses_side ? &x_side : nullptr, sigma2);
    return {std::move(reconstruction), z};
}

ImageTensor decode_symbols(const VariantModel& model, std::span<const channel::Complex> y,
                           const ImageTensor* x_side, double sigma2) {
    if (y.size() != model.bandwidth()) {
        throw InvalidArgument(
            fmt::format("decode: received {} symbols, the model uses k={}", y.size(), model.bandwidth()));
    }
    const Tensor grid = Tensor::constant(model.latent_shape(1), channel::unpack_complex(y));
    const std::array<double, 1> s2{sigma2};
    Tensor side;
    if (x_side != nullptr) {
        side = to_batch(*x_side);
    }
    const Tensor out = model.decode(grid, x_side != nullptr ? &side : nullptr, s2);
    return from_batch(out, 0);
}

Tensor af_modulate(const nn::AFModule& module, const Tensor& features, std::span<const double> snr_db,
                   std::span<const double> extra_flags) {
    const int n = features.shape().n;
    if (snr_db.size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("af_modulate: one SNR per batch item is required");
    }
    const std::size_t per_item_flags = extra_flags.size() / static_cast<std::size_t>(n);
    if (per_item_flags * static_cast<std::size_t>(n) != extra_flags.size()) {
        throw InvalidArgument("af_modulate: flags do not divide evenly over the batch");
    }
    const int m = 1 + static_cast<int>(per_item_flags);
    std::vector<double> ctx;
    for (int i = 0; i < n; ++i) {
        ctx.push_back(snr_db[static_cast<std::size_t>(i)]);
        for (std::size_t f = 0; f < per_item_flags; ++f) {
            ctx.push_back(extra_flags[i * per_item_flags + f]);
        }
    }
    return module.forward(features, Tensor::constant(nn::Shape{n, m, 1, 1}, std::move(ctx)));
}

} // namespace wzjscc::codec
