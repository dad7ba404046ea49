#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vesselseg/error.hpp"

namespace vesselseg {

struct Point {
    int x = 0;
    int y = 0;

    bool operator==(const Point&) const = default;
};

/// Row-major 2-D array with strictly positive dimensions.
template <typename T>
class Grid {
public:
    Grid() = default;

    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        check_dims(width, height);
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        check_dims(width, height);
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw Error(ErrorCode::InvalidArgument, "pixel count does not match dimensions");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool in_bounds(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    bool same_shape(int w, int h) const noexcept { return w == width_ && h == height_; }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Edge-replicating accessor.
    const T& clamped(int x, int y) const noexcept {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return data_[index(x, y)];
    }

    std::span<const T> data() const noexcept { return data_; }
    std::span<T> data() noexcept { return data_; }

    bool operator==(const Grid&) const = default;

private:
    static void check_dims(int width, int height) {
        if (width <= 0 || height <= 0) {
            throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
        }
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

/// Color input image, 8 bits per channel.
using RasterImage = Grid<Rgb>;

/// Unconstrained real-valued plane used for intermediate quantities
/// (smoothed images, derivatives, scale indices).
using Plane = Grid<double>;

/// Scalar working image; every value is finite and in [0, 1].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0);
    /// Throws InvalidArgument if any value is non-finite or outside [0, 1].
    explicit GrayImage(Plane values);

    /// Clamps into [0, 1]; non-finite values become 0.
    static GrayImage clamped(Plane values);

    int width() const noexcept { return plane_.width(); }
    int height() const noexcept { return plane_.height(); }
    std::size_t size() const noexcept { return plane_.size(); }

    double operator()(int x, int y) const noexcept { return plane_(x, y); }
    double operator[](std::size_t i) const noexcept { return plane_[i]; }

    const Plane& plane() const noexcept { return plane_; }

    bool operator==(const GrayImage&) const = default;

private:
    Plane plane_;
};

/// Vessel segmentation: one bit per pixel, true = vessel.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const noexcept { return bits_.width(); }
    int height() const noexcept { return bits_.height(); }
    std::size_t size() const noexcept { return bits_.size(); }
    bool in_bounds(int x, int y) const noexcept { return bits_.in_bounds(x, y); }
    std::size_t index(int x, int y) const noexcept { return bits_.index(x, y); }

    bool operator()(int x, int y) const noexcept { return bits_(x, y) != 0; }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
    void set(int x, int y, bool vessel = true) noexcept { bits_(x, y) = vessel ? 1 : 0; }
    void set(std::size_t i, bool vessel = true) noexcept { bits_[i] = vessel ? 1 : 0; }

    std::size_t count() const noexcept;
    BinaryMask complement() const;
    /// True when every vessel pixel here is also vessel in `other`.
    bool is_subset_of(const BinaryMask& other) const;
    bool same_shape(const BinaryMask& other) const noexcept {
        return width() == other.width() && height() == other.height();
    }

    std::span<const std::uint8_t> bits() const noexcept { return bits_.data(); }

    bool operator==(const BinaryMask&) const = default;

private:
    Grid<std::uint8_t> bits_;
};

/// g / 255 for every pixel.
GrayImage green_channel(const RasterImage& img);

/// 1 - v for every pixel.
GrayImage invert(const GrayImage& img);

/// 8-bit value stored for a gray level: round(v * 255), halves away from zero.
std::uint8_t to_byte(double v) noexcept;

}  // namespace vesselseg
