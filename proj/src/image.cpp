#include "vesselseg/image.hpp"

#include <algorithm>
#include <cmath>

namespace vesselseg {

GrayImage::GrayImage(int width, int height, double fill) : plane_(width, height, fill) {
    if (!std::isfinite(fill) || fill < 0.0 || fill > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "gray value outside [0,1]");
    }
}

GrayImage::GrayImage(Plane values) : plane_(std::move(values)) {
    for (double v : plane_.data()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw Error(ErrorCode::InvalidArgument, "gray value outside [0,1]");
        }
    }
}

GrayImage GrayImage::clamped(Plane values) {
    for (double& v : values.data()) {
        v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    }
    GrayImage out;
    out.plane_ = std::move(values);
    return out;
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : bits_(width, height, static_cast<std::uint8_t>(fill ? 1 : 0)) {}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.data().begin(), bits_.data().end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_.data()) b = b ? 0 : 1;
    return out;
}

bool BinaryMask::is_subset_of(const BinaryMask& other) const {
    if (!same_shape(other)) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        if ((*this)[i] && !other[i]) return false;
    }
    return true;
}

GrayImage green_channel(const RasterImage& img) {
    Plane out(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i].g / 255.0;
    return GrayImage(std::move(out));
}

GrayImage invert(const GrayImage& img) {
    Plane out = img.plane();
    for (double& v : out.data()) v = 1.0 - v;
    return GrayImage(std::move(out));
}

std::uint8_t to_byte(double v) noexcept {
    const long r = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(r);
}

}  // namespace vesselseg
