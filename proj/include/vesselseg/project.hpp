#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vesselseg/classify.hpp"
#include "vesselseg/connectivity.hpp"
#include "vesselseg/dataset.hpp"
#include "vesselseg/image.hpp"
#include "vesselseg/vesselness.hpp"

namespace vesselseg {

struct ManualProvenance {
    bool operator==(const ManualProvenance&) const = default;
};
struct FrangiProvenance {
    FrangiParams params;
    bool operator==(const FrangiProvenance&) const = default;
};
struct ConnectivityProvenance {
    ConnectivityParams params;
    bool operator==(const ConnectivityProvenance&) const = default;
};
struct ModelProvenance {
    std::string model_id;
    bool operator==(const ModelProvenance&) const = default;
};

using Provenance = std::variant<ManualProvenance, FrangiProvenance, ConnectivityProvenance, ModelProvenance>;

/// "manual", "frangi", "connectivity" or "model".
std::string_view provenance_type(const Provenance& p) noexcept;

struct MaskLayer {
    std::string name;
    BinaryMask mask;
    bool visible = true;
    double opacity = 1.0;
    Provenance provenance;
    bool locked = false;

    bool operator==(const MaskLayer&) const = default;
};

struct PaintOp {
    std::vector<Point> coords;
    int radius = 0;
};
struct EraseOp {
    std::vector<Point> coords;
    int radius = 0;
};
/// Bucket fill: the 4-connected region of equal value around `seed` is set to `vessel`.
struct FillOp {
    Point seed;
    bool vessel = true;
};
struct ReplaceLayerOp {
    BinaryMask mask;
};

struct EditOp {
    std::size_t layer = 0;
    std::variant<PaintOp, EraseOp, FillOp, ReplaceLayerOp> action;
};

inline constexpr std::size_t kUndoDepth = 20;

class Project {
public:
    std::string id;
    std::string name;
    RasterImage base_image;
    std::vector<MaskLayer> layers;
    std::size_t active_layer = 0;
    std::string created;
    std::string modified;

    int width() const noexcept { return base_image.width(); }
    int height() const noexcept { return base_image.height(); }

    /// Throws InvalidArgument when an invariant does not hold.
    void validate() const;

    /// Excludes undo/redo history.
    bool operator==(const Project& o) const;

    struct UndoEntry {
        std::size_t layer;
        BinaryMask mask;
        Provenance provenance;
    };
    const std::deque<UndoEntry>& undo_stack() const noexcept { return undo_; }
    const std::deque<UndoEntry>& redo_stack() const noexcept { return redo_; }

private:
    friend void apply_edit(Project&, const EditOp&);
    friend bool undo(Project&);
    friend bool redo(Project&);
    friend void clear_history(Project&);

    std::deque<UndoEntry> undo_;
    std::deque<UndoEntry> redo_;
};

/// One empty, active manual layer named "manual".
Project create_project(const RasterImage& img, const std::string& name);

/// Paint/erase use a Euclidean disk brush (dx^2 + dy^2 <= r^2). Any edit of
/// a filter or model layer turns its provenance into manual.
/// Errors: OutOfBounds (layer index or coordinates), LayerLocked, DimensionMismatch.
void apply_edit(Project& p, const EditOp& op);
/// Return false when there is nothing to undo/redo.
bool undo(Project& p);
bool redo(Project& p);
void clear_history(Project& p);

/// Appends a layer and makes it active. Errors: DimensionMismatch.
void add_filter_layer(Project& p, const BinaryMask& result, const Provenance& provenance, const std::string& name = "");

/// Errors: OutOfBounds. Clears undo history because layer indices shift.
void remove_layer(Project& p, std::size_t index);

inline constexpr int kProjectFormatVersion = 1;

std::vector<std::uint8_t> project_to_archive(const Project& p);
/// Errors: CorruptProject.
Project project_from_archive(std::span<const std::uint8_t> bytes);
void save_project(const Project& p, const std::filesystem::path& path);
Project load_project(const std::filesystem::path& path);

struct LayerSelector {
    enum class Kind { TopmostManual, Active, Index, Named };

    Kind kind = Kind::TopmostManual;
    std::size_t index = 0;
    std::string name;

    static LayerSelector parse(std::string_view s);
    std::string to_string() const;
    /// Errors: NotFound.
    const MaskLayer& select(const Project& p) const;
};

/// Builds a dataset from (base image, selected layer) of each project and
/// trains on it. training_meta.sources lists the project ids.
/// Errors: InvalidArgument for zero projects, plus dataset/classify errors.
TrainedModel retrain_from_projects(std::span<const Project> projects, const LayerSelector& selector,
                                   const FeatureConfig& cfg, const ModelKind& kind, const Sampling& sampling);

std::string iso_timestamp_now();
std::string generate_id();

}  // namespace vesselseg
