#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesselseg/image.hpp"

namespace vesselseg {

/// Declares the per-pixel feature vector. Layout, in order:
///   green                      raw green intensity
///   smooth_s<sigma>            Gaussian-smoothed green, one per scale
///   vessel_s<sigma>            single-scale vesselness, one per scale
///   gradmag                    gradient magnitude at the smallest scale
///   lmean_w<window>            local mean over a window x window box
///   lstd_w<window>             local standard deviation, same box
///   xnorm, ynorm               x / width, y / height (optional)
///
/// A config read back from a foreign dataset whose names do not follow this
/// scheme is "raw": it only records the names, and can be trained on but
/// not extracted from images.
struct FeatureConfig {
    std::vector<double> scales{1.0, 2.0, 4.0};
    int window = 5;
    bool include_coordinates = false;
    int schema_version = 1;
    std::vector<std::string> raw_names;

    bool is_raw() const noexcept { return !raw_names.empty(); }
    std::size_t dimension() const noexcept;
    std::vector<std::string> feature_names() const;

    /// Throws InvalidArgument unless window is odd and >= 3 and scales are
    /// nonempty, positive and strictly ascending.
    void validate() const;

    /// Canonical config when `names` follow the layout above, raw otherwise.
    static FeatureConfig from_names(const std::vector<std::string>& names);

    bool operator==(const FeatureConfig&) const = default;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_scale(double v);

using FeatureVector = std::vector<double>;

/// Feature planes of one image, computed once and shared by every pixel
/// lookup. Read-only after construction.
class FeaturePlanes {
public:
    /// Throws InvalidArgument for raw configs and ImageTooSmall when the
    /// largest scale does not fit.
    FeaturePlanes(const RasterImage& img, const FeatureConfig& cfg);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const FeatureConfig& config() const noexcept { return cfg_; }

    /// Throws OutOfBounds.
    FeatureVector at(int x, int y) const;
    /// out.size() must equal config().dimension(); no bounds check.
    void fill(int x, int y, std::span<double> out) const;

private:
    FeatureConfig cfg_;
    int width_;
    int height_;
    std::vector<Plane> planes_;
};

FeatureVector extract_features_pixel(const FeaturePlanes& cache, int x, int y);

}  // namespace vesselseg
