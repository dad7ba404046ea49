#include "vesselseg/morphology.hpp"

#include <string>

namespace vesselseg {

StructuringElement::StructuringElement(ElementShape shape, int radius) : shape_(shape), radius_(radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidArgument, "structuring element radius must be >= 1");
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (shape == ElementShape::Disk && dx * dx + dy * dy > radius * radius) continue;
            offsets_.push_back({dx, dy});
        }
    }
}

std::string_view to_string(ElementShape shape) noexcept {
    return shape == ElementShape::Disk ? "disk" : "square";
}

ElementShape parse_element_shape(std::string_view s) {
    if (s == "square") return ElementShape::Square;
    if (s == "disk") return ElementShape::Disk;
    throw Error(ErrorCode::InvalidArgument, "unknown structuring element shape '" + std::string(s) + "'");
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            for (const Point& o : se.offsets()) {
                const int sx = x + o.x;
                const int sy = y + o.y;
                if (mask.in_bounds(sx, sy) && mask(sx, sy)) {
                    out.set(x, y);
                    break;
                }
            }
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            bool keep = true;
            for (const Point& o : se.offsets()) {
                const int sx = x + o.x;
                const int sy = y + o.y;
                if (!mask.in_bounds(sx, sy) || !mask(sx, sy)) {
                    keep = false;
                    break;
                }
            }
            if (keep) out.set(x, y);
        }
    }
    return out;
}

BinaryMask open(const BinaryMask& mask, const StructuringElement& se) { return dilate(erode(mask, se), se); }

BinaryMask close(const BinaryMask& mask, const StructuringElement& se) { return erode(dilate(mask, se), se); }

std::string_view to_string(CleanupSpec::Order order) noexcept {
    return order == CleanupSpec::Order::Closing ? "close" : "open";
}

CleanupSpec::Order parse_cleanup_order(std::string_view s) {
    if (s == "open" || s == "opening") return CleanupSpec::Order::Opening;
    if (s == "close" || s == "closing") return CleanupSpec::Order::Closing;
    throw Error(ErrorCode::InvalidArgument, "unknown cleanup order '" + std::string(s) + "'");
}

BinaryMask apply_cleanup(const BinaryMask& mask, const std::optional<CleanupSpec>& spec) {
    if (!spec) return mask;
    return spec->order == CleanupSpec::Order::Opening ? open(mask, spec->element) : close(mask, spec->element);
}

}  // namespace vesselseg
