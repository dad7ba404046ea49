#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vesselseg/image.hpp"
#include "vesselseg/morphology.hpp"
#include "vesselseg/vesselness.hpp"

namespace vesselseg {

struct SeedSet {
    std::vector<Point> coords;
    double source_threshold = 0.0;
};

enum class Neighborhood { Four, Eight };
enum class GrowthReference { SeedValue, RegionMean };
enum class GrowthVariant { Immediate, Radial };

/// Acceptance rule for seeded region growing: a candidate joins when
/// |gray(candidate) - reference| <= tolerance.
///
/// With RegionMean, seeds that touch each other (under the variant's
/// adjacency) form one region whose running mean is the reference, and
/// max_pixels caps each such region. With SeedValue every seed grows on its
/// own against its own gray value, max_pixels caps each seed's growth, and
/// the output is the union of the per-seed regions. Seeds are always kept.
struct GrowthParams {
    double tolerance = 0.1;
    Neighborhood neighborhood = Neighborhood::Eight;
    int radius = 3;
    GrowthReference reference = GrowthReference::RegionMean;
    /// nullopt = unbounded
    std::optional<std::size_t> max_pixels;

    void validate() const;

    bool operator==(const GrowthParams&) const = default;
};

std::string_view to_string(Neighborhood n) noexcept;
std::string_view to_string(GrowthReference r) noexcept;
std::string_view to_string(GrowthVariant v) noexcept;
Neighborhood parse_neighborhood(std::string_view s);
GrowthReference parse_reference(std::string_view s);
GrowthVariant parse_variant(std::string_view s);

/// Neighbor offsets in row-major order, (0,0) excluded.
std::vector<Point> neighborhood_offsets(Neighborhood n);
/// Integer offsets with dx^2 + dy^2 <= radius^2, row-major, (0,0) excluded.
std::vector<Point> disk_offsets(int radius);

/// All pixels with vesselness >= seed_threshold, row-major.
SeedSet extract_seeds(const VesselnessMap& v, double seed_threshold);

/// Breadth-first growth over the given candidate offsets. Seeds are sorted
/// row-major and de-duplicated first, so the result does not depend on the
/// order of the seed list. Throws SeedOutOfBounds.
BinaryMask grow_region(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p,
                       std::span<const Point> offsets);

/// Candidates are the 4- or 8-neighbors of each frontier pixel.
BinaryMask grow_immediate(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p);

/// Candidates are every pixel within Euclidean distance p.radius of a
/// frontier pixel, so growth can jump gaps narrower than the radius.
BinaryMask grow_radial(const GrayImage& img, const SeedSet& seeds, const GrowthParams& p);

struct ConnectivityParams {
    FrangiParams frangi;
    double seed_threshold = 0.5;
    GrowthParams growth;
    GrowthVariant variant = GrowthVariant::Immediate;
    std::optional<CleanupSpec> cleanup;

    void validate() const;

    bool operator==(const ConnectivityParams&) const = default;
};

/// green_channel -> frangi_multiscale -> extract_seeds -> grow -> cleanup.
BinaryMask connectivity_filter(const RasterImage& img, const ConnectivityParams& p);

}  // namespace vesselseg
