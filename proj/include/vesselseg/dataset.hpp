#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vesselseg/features.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

enum class Label : std::uint8_t { Background = 0, Vessel = 1 };

std::string_view to_string(Label label) noexcept;

struct SampleOrigin {
    std::string image_id;
    int x = 0;
    int y = 0;

    bool operator==(const SampleOrigin&) const = default;
};

struct Sample {
    FeatureVector features;
    Label label = Label::Background;
    /// Not serialized to ARFF/CSV and ignored by operator==.
    std::optional<SampleOrigin> origin;

    bool operator==(const Sample& o) const { return label == o.label && features == o.features; }
};

struct Dataset {
    FeatureConfig config;
    std::vector<Sample> samples;
    std::string relation = "vessels";

    std::size_t count(Label label) const noexcept;
    /// Throws SchemaError if any sample's length differs from config.dimension().
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

/// One training image with its ground-truth segmentation.
struct LabeledImage {
    RasterImage image;
    BinaryMask truth;
    std::string id;
};

struct Sampling {
    enum class Kind { All, Balanced, Random };

    Kind kind = Kind::All;
    /// Balanced: per class per image. Random: per image.
    std::size_t n = 0;
    std::uint64_t seed = 0;

    static Sampling all() { return {}; }
    static Sampling balanced(std::size_t per_class, std::uint64_t seed) { return {Kind::Balanced, per_class, seed}; }
    static Sampling random(std::size_t n, std::uint64_t seed) { return {Kind::Random, n, seed}; }

    bool operator==(const Sampling&) const = default;
};

std::string_view to_string(Sampling::Kind kind) noexcept;
Sampling::Kind parse_sampling_kind(std::string_view s);

/// One sample per selected pixel, in row-major order within each image.
/// Errors: DimensionMismatch, InsufficientPixels.
Dataset build_dataset(std::span<const LabeledImage> images, const FeatureConfig& cfg, const Sampling& sampling);

/// Deterministic shuffle with `seed`; the first part receives
/// round(fraction * n) samples (per class when stratified). Both parts keep
/// the original relative order. Errors: EmptyDataset, InvalidArgument.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double fraction, std::uint64_t seed, bool stratified);

}  // namespace vesselseg
