#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wzjscc/tensor.hpp"

namespace wzjscc {

/// Planar C×H×W image with values in [0, 1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int channels, int height, int width);
    ImageTensor(int channels, int height, int width, std::vector<double> pixels);

    int channels() const noexcept { return channels_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    bool same_dims(const ImageTensor& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool in_unit_range() const noexcept;
    /// Throws InvalidArgument unless pixels lie in [0,1] and both spatial
    /// dims are divisible by 16.
    void validate_for_codec() const;

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<double> pixels_;
};

/// Stacks equally sized images into an (n, c, h, w) constant tensor.
nn::Tensor to_batch(std::span<const ImageTensor> images);
nn::Tensor to_batch(const ImageTensor& image);
ImageTensor from_batch(const nn::Tensor& batch, int index);

} // namespace wzjscc
