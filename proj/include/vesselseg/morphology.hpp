#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg {

enum class ElementShape { Square, Disk };

/// Centered structuring element. Offsets always contain (0,0) and are
/// symmetric under negation.
class StructuringElement {
public:
    /// Default: 3x3 square.
    StructuringElement() : StructuringElement(ElementShape::Square, 1) {}
    StructuringElement(ElementShape shape, int radius);

    ElementShape shape() const noexcept { return shape_; }
    int radius() const noexcept { return radius_; }
    const std::vector<Point>& offsets() const noexcept { return offsets_; }

    bool operator==(const StructuringElement& o) const noexcept {
        return shape_ == o.shape_ && radius_ == o.radius_;
    }

private:
    ElementShape shape_;
    int radius_;
    std::vector<Point> offsets_;
};

std::string_view to_string(ElementShape shape) noexcept;
ElementShape parse_element_shape(std::string_view s);

/// Pixels outside the image count as background.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se = {});
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se = {});

/// erode then dilate
BinaryMask open(const BinaryMask& mask, const StructuringElement& se = {});
/// dilate then erode
BinaryMask close(const BinaryMask& mask, const StructuringElement& se = {});

/// Noise cleanup applied after a segmentation filter.
struct CleanupSpec {
    enum class Order { Opening, Closing };

    Order order = Order::Opening;
    StructuringElement element;

    bool operator==(const CleanupSpec&) const = default;
};

std::string_view to_string(CleanupSpec::Order order) noexcept;
CleanupSpec::Order parse_cleanup_order(std::string_view s);

BinaryMask apply_cleanup(const BinaryMask& mask, const std::optional<CleanupSpec>& spec);

}  // namespace vesselseg
