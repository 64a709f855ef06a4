#include "wzjscc/image.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "wzjscc/errors.hpp"

namespace wzjscc {

ImageTensor::ImageTensor(int channels, int height, int width)
    : ImageTensor(channels, height, width,
                  std::vector<double>(static_cast<std::size_t>(channels) * height * width, 0.0)) {}

ImageTensor::ImageTensor(int channels, int height, int width, std::vector<double> pixels)
    : channels_(channels), height_(height), width_(width), pixels_(std::move(pixels)) {
    if (channels <= 0 || height <= 0 || width <= 0) {
        throw InvalidArgument(fmt::format("ImageTensor: invalid dims {}x{}x{}", channels, height, width));
    }
    if (pixels_.size() != static_cast<std::size_t>(channels) * height * width) {
        throw InvalidArgument(fmt::format("ImageTensor: {} pixels for dims {}x{}x{}", pixels_.size(), channels,
                                          height, width));
    }
}

bool ImageTensor::in_unit_range() const noexcept {
    return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

void ImageTensor::validate_for_codec() const {
    if (height_ % 16 != 0 || width_ % 16 != 0) {
        throw InvalidArgument(
            fmt::format("image {}x{} is not divisible by 16 in both spatial dims", height_, width_));
    }
    if (!in_unit_range()) {
        throw InvalidArgument("image pixels must lie in [0, 1]");
    }
}

nn::Tensor to_batch(std::span<const ImageTensor> images) {
    if (images.empty()) {
        throw InvalidArgument("to_batch: empty image list");
    }
    const ImageTensor& first = images.front();
    std::vector<double> values;
    values.reserve(first.size() * images.size());
    for (const auto& img : images) {
        if (!img.same_dims(first)) {
            throw InvalidArgument("to_batch: images differ in dimensions");
        }
        values.insert(values.end(), img.pixels().begin(), img.pixels().end());
    }
    const nn::Shape shape{static_cast<int>(images.size()), first.channels(), first.height(), first.width()};
    return nn::Tensor::constant(shape, std::move(values));
}

nn::Tensor to_batch(const ImageTensor& image) { return to_batch(std::span<const ImageTensor>(&image, 1)); }

ImageTensor from_batch(const nn::Tensor& batch, int index) {
    const nn::Shape s = batch.shape();
    if (index < 0 || index >= s.n) {
        throw InvalidArgument(fmt::format("from_batch: index {} outside batch of {}", index, s.n));
    }
    const auto data = batch.data().subspan(index * s.item_size(), s.item_size());
    return ImageTensor(s.c, s.h, s.w, std::vector<double>(data.begin(), data.end()));
}

} // namespace wzjscc
