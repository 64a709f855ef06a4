#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wzjscc/channel.hpp"
#include "wzjscc/image.hpp"
#include "wzjscc/layers.hpp"
#include "wzjscc/tensor.hpp"

namespace wzjscc::codec {

/// The four compared schemes.
///   point2point  no side information anywhere
///   wz           side information at the decoder, separate side encoder
///   wz_sm        like wz, but the side encoder aliases the transmit encoder
///                and a role flag is fed to its AF modules
///   cond         side information at both ends (upper bound)
enum class VariantKind { point2point, wz, wz_sm, cond };

std::string_view to_string(VariantKind kind);
/// Accepts the canonical names above plus "deepjscc", "wz-sm" and "joint".
VariantKind parse_variant(std::string_view name);

/// Role flag given to the shared encoder's AF modules under wz_sm.
enum class SideFlag { source = 0, side = 1 };

struct ImageDims {
    int channels = 3;
    int height = 128;
    int width = 256;

    friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

struct ModelConfig {
    VariantKind variant = VariantKind::wz;
    /// Channel symbols per source element.
    double rho = 1.0 / 16.0;
    int base_width = 32;
    /// Per-stage channel counts; empty means (b, 2b, 4b, 4b).
    std::vector<int> width_schedule;
    /// 1-based stage indices carrying an attention block.
    std::vector<int> attention_stages{2, 4};
    ImageDims image;
    double p_avg = 1.0;
    std::uint64_t seed = 0;

    std::array<int, 4> widths() const;
    /// k = round(rho · C · H · W).
    std::size_t bandwidth() const;
    int latent_height() const noexcept { return image.height / 16; }
    int latent_width() const noexcept { return image.width / 16; }
    /// 2k spread over the (H/16, W/16) latent grid.
    int latent_channels() const;
    bool has_attention(int stage) const;
    /// Throws ConfigError naming the offending values.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& config);
void from_json(const nlohmann::json& j, ModelConfig& config);

/// Parses "1/16" or a decimal number.
double parse_ratio(std::string_view text);

/// Activations s1..s4 at H/2, H/4, H/8 and H/16.
struct FeaturePyramid {
    std::array<nn::Tensor, 4> levels;

    const nn::Tensor& level(int scale) const { return levels.at(static_cast<std::size_t>(scale - 1)); }
};

struct EncoderLayout {
    int in_channels = 3;
    /// SNR plus optional role flag.
    int context_size = 1;
    /// Emits the latent through a final projection; side encoders only need the taps.
    bool with_head = true;
    /// Concatenates a side pyramid into each stage input (cond transmitter).
    bool fuse_side = false;
};

/// Four stride-2 stages of [conv, residual block, optional attention, AF];
/// each stage output is tapped into the pyramid.
class Encoder {
public:
    struct Output {
        nn::Tensor latent;
        FeaturePyramid pyramid;
    };

    Encoder(std::string name, const ModelConfig& config, EncoderLayout layout);

    Output forward(const nn::Tensor& x, const nn::Tensor& context, const FeaturePyramid* side = nullptr,
                   const nn::Tensor* side_image = nullptr) const;
    void collect(std::vector<nn::NamedTensor>& out) const;
    const EncoderLayout& layout() const noexcept { return layout_; }

private:
    struct Stage {
        nn::Conv2d down;
        nn::ResidualBlock residual;
        std::optional<nn::AttentionBlock> attention;
        nn::AFModule af;
    };

    EncoderLayout layout_;
    std::vector<Stage> stages_;
    std::optional<nn::Conv2d> head_;
};

/// Mirror of the encoder. The received grid (optionally fused with s4) passes
/// a latent stage, then four [upsample, conv, fuse, residual, AF] stages;
/// s3, s2, s1 and finally the raw side image are concatenated after the
/// successive upsampling steps.
class Decoder {
public:
    Decoder(std::string name, const ModelConfig& config, bool fuse_side);

    nn::Tensor forward(const nn::Tensor& y, const nn::Tensor& context, const FeaturePyramid* side,
                       const nn::Tensor* side_image) const;
    void collect(std::vector<nn::NamedTensor>& out) const;
    bool fuses_side() const noexcept { return fuse_side_; }

private:
    struct Stage {
        nn::Conv2d up;
        nn::Conv2d fuse;
        nn::ResidualBlock residual;
        std::optional<nn::AttentionBlock> attention;
        nn::AFModule af;
    };

    bool fuse_side_;
    nn::Conv2d latent_in_;
    nn::ResidualBlock latent_residual_;
    std::optional<nn::AttentionBlock> latent_attention_;
    nn::AFModule latent_af_;
    std::vector<Stage> stages_;
    nn::Conv2d out_;
};

class VariantModel {
public:
    struct Encoded {
        /// Real (n, latent_channels, H/16, W/16) grid; 2k reals per item.
        nn::Tensor latent;
        FeaturePyramid pyramid;
    };

    explicit VariantModel(ModelConfig config);

    const ModelConfig& config() const noexcept { return config_; }
    VariantKind variant() const noexcept { return config_.variant; }
    std::size_t bandwidth() const noexcept { return k_; }
    nn::Shape latent_shape(int batch) const;

    /// Transmitter. `x_side` is required for cond and rejected otherwise;
    /// `flag` is only consulted under wz_sm.
    Encoded encode(const nn::Tensor& x, std::span<const double> sigma2, SideFlag flag = SideFlag::source,
                   const nn::Tensor* x_side = nullptr) const;
    /// Receiver-side pyramid; wz and wz_sm only.
    FeaturePyramid encode_side(const nn::Tensor& x_side, std::span<const double> sigma2) const;
    /// Receiver. `y` has latent_shape(n); `x_side` must be given iff the
    /// variant is not point2point.
    nn::Tensor decode(const nn::Tensor& y, const nn::Tensor* x_side, std::span<const double> sigma2) const;

    /// Unique trainable tensors; an aliased encoder is listed once.
    std::vector<nn::NamedTensor> parameters() const;
    std::size_t count_parameters() const;

    const Encoder& transmit_encoder() const noexcept { return *encoder_; }
    /// Receiver-side encoder (null for point2point).
    const Encoder* receiver_encoder() const noexcept { return side_encoder_.get(); }

    /// Independent copy with identical parameter values.
    VariantModel clone() const;
    /// Copies parameter values from a model with the same configuration.
    void load_parameters_from(const VariantModel& other);

private:
    void check_batch(const nn::Tensor& x, std::span<const double> sigma2, const char* what) const;
    nn::Tensor context(std::span<const double> sigma2, std::optional<SideFlag> flag) const;
    FeaturePyramid receiver_pyramid(const nn::Tensor& x_side, std::span<const double> sigma2) const;

    ModelConfig config_;
    std::size_t k_ = 0;
    std::shared_ptr<Encoder> encoder_;
    std::shared_ptr<Encoder> side_encoder_;
    std::shared_ptr<Encoder> tx_side_encoder_;
    std::shared_ptr<Decoder> decoder_;
};

VariantModel build_model(const ModelConfig& config);
std::size_t count_parameters(const VariantModel& model);

/// One pass through transmitter, power normalization, AWGN and receiver.
struct LinkOutput {
    nn::Tensor reconstruction;
    /// Normalized channel input, latent grid layout.
    nn::Tensor transmitted;
};

/// `noise_seeds[i]` seeds the ChannelState of item i, so a fixed seed gives
/// the same standard-normal draws at every SNR. `x_side` may be undefined
/// for point2point, which never reads it.
LinkOutput simulate_link(const VariantModel& model, const nn::Tensor& x, const nn::Tensor& x_side,
                         std::span<const double> sigma2, std::span<const std::uint64_t> noise_seeds,
                         bool check_power = false);

/// Receiver applied to a single received symbol vector of length k.
ImageTensor decode_symbols(const VariantModel& model, std::span<const channel::Complex> y,
                           const ImageTensor* x_side, double sigma2);

/// AF gate applied to a single activation; exposed for inspection.
nn::Tensor af_modulate(const nn::AFModule& module, const nn::Tensor& features, std::span<const double> snr_db,
                       std::span<const double> extra_flags = {});

} // namespace wzjscc::codec
