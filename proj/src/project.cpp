#include "vesselseg/project.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>
#include <mutex>
#include <random>

#include "vesselseg/image_io.hpp"
#include "vesselseg/json_io.hpp"
#include "vesselseg/zip.hpp"

namespace vesselseg {

std::string_view provenance_type(const Provenance& p) noexcept {
    switch (p.index()) {
        case 1: return "frangi";
        case 2: return "connectivity";
        case 3: return "model";
        default: return "manual";
    }
}

std::string iso_timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    const std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::snprintf(buf + n, sizeof buf - n, ".%03dZ", static_cast<int>(ms));
    return buf;
}

std::string generate_id() {
    static std::mt19937_64 rng = [] {
        std::random_device rd;
        const auto t = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
        return std::mt19937_64((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ t);
    }();
    static std::mutex mu;
    std::lock_guard lock(mu);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    return buf;
}

void Project::validate() const {
    if (base_image.size() == 0) throw Error(ErrorCode::InvalidArgument, "project has no base image");
    if (layers.empty()) throw Error(ErrorCode::InvalidArgument, "project has no layers");
    if (active_layer >= layers.size()) throw Error(ErrorCode::InvalidArgument, "active layer out of range");
    for (const MaskLayer& l : layers) {
        if (l.mask.width() != width() || l.mask.height() != height()) {
            throw Error(ErrorCode::InvalidArgument, "layer '" + l.name + "' does not match the base image");
        }
        if (!(l.opacity >= 0.0 && l.opacity <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "layer '" + l.name + "' opacity outside [0,1]");
        }
    }
}

bool Project::operator==(const Project& o) const {
    return id == o.id && name == o.name && base_image == o.base_image && layers == o.layers &&
           active_layer == o.active_layer && created == o.created && modified == o.modified;
}

Project create_project(const RasterImage& img, const std::string& name) {
    if (img.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty image");
    Project p;
    p.id = generate_id();
    p.name = name;
    p.base_image = img;
    p.layers.push_back({"manual", BinaryMask(img.width(), img.height()), true, 1.0, ManualProvenance{}, false});
    p.active_layer = 0;
    p.created = iso_timestamp_now();
    p.modified = p.created;
    return p;
}

namespace {

void check_point(const Project& p, Point c) {
    if (c.x < 0 || c.y < 0 || c.x >= p.width() || c.y >= p.height()) {
        throw Error(ErrorCode::OutOfBounds,
                    "coordinate (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") outside the image");
    }
}

void brush(BinaryMask& m, const std::vector<Point>& coords, int radius, bool value) {
    for (Point c : coords)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
                if (dx * dx + dy * dy > radius * radius) continue;
                if (m.in_bounds(c.x + dx, c.y + dy)) m.set(c.x + dx, c.y + dy, value);
            }
}

void bucket_fill(BinaryMask& m, Point seed, bool value) {
    const bool from = m(seed.x, seed.y);
    if (from == value) return;
    std::vector<Point> stack{seed};
    m.set(seed.x, seed.y, value);
    constexpr std::array<Point, 4> kDirs{{{0, -1}, {-1, 0}, {1, 0}, {0, 1}}};
    while (!stack.empty()) {
        const Point c = stack.back();
        stack.pop_back();
        for (Point d : kDirs) {
            const int x = c.x + d.x, y = c.y + d.y;
            if (m.in_bounds(x, y) && m(x, y) == from) {
                m.set(x, y, value);
                stack.push_back({x, y});
            }
        }
    }
}

}  // namespace

void apply_edit(Project& p, const EditOp& op) {
    if (op.layer >= p.layers.size()) throw Error(ErrorCode::OutOfBounds, "layer index out of range");
    MaskLayer& layer = p.layers[op.layer];
    if (layer.locked) throw Error(ErrorCode::LayerLocked, "layer '" + layer.name + "' is locked");

    BinaryMask next = layer.mask;
    std::visit(
        [&](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, PaintOp> || std::is_same_v<A, EraseOp>) {
                if (a.radius < 0) throw Error(ErrorCode::InvalidArgument, "brush radius must be >= 0");
                for (Point c : a.coords) check_point(p, c);
                brush(next, a.coords, a.radius, std::is_same_v<A, PaintOp>);
            } else if constexpr (std::is_same_v<A, FillOp>) {
                check_point(p, a.seed);
                bucket_fill(next, a.seed, a.vessel);
            } else {
                if (!a.mask.same_shape(next)) throw Error(ErrorCode::DimensionMismatch, "replacement mask size differs");
                next = a.mask;
            }
        },
        op.action);

    p.undo_.push_back({op.layer, std::move(layer.mask), layer.provenance});
    if (p.undo_.size() > kUndoDepth) p.undo_.pop_front();
    p.redo_.clear();
    layer.mask = std::move(next);
    layer.provenance = ManualProvenance{};
    p.modified = iso_timestamp_now();
}

namespace {

bool swap_top(Project& p, std::deque<Project::UndoEntry>& from, std::deque<Project::UndoEntry>& to) {
    if (from.empty()) return false;
    Project::UndoEntry e = std::move(from.back());
    from.pop_back();
    MaskLayer& layer = p.layers[e.layer];
    to.push_back({e.layer, std::move(layer.mask), std::move(layer.provenance)});
    if (to.size() > kUndoDepth) to.pop_front();
    layer.mask = std::move(e.mask);
    layer.provenance = std::move(e.provenance);
    p.modified = iso_timestamp_now();
    return true;
}

}  // namespace

bool undo(Project& p) { return swap_top(p, p.undo_, p.redo_); }
bool redo(Project& p) { return swap_top(p, p.redo_, p.undo_); }

void clear_history(Project& p) {
    p.undo_.clear();
    p.redo_.clear();
}

void add_filter_layer(Project& p, const BinaryMask& result, const Provenance& provenance, const std::string& name) {
    if (result.width() != p.width() || result.height() != p.height()) {
        throw Error(ErrorCode::DimensionMismatch, "filter result does not match the base image");
    }
    std::string layer_name = name;
    if (layer_name.empty()) layer_name = std::string(provenance_type(provenance)) + "-" + std::to_string(p.layers.size());
    p.layers.push_back({layer_name, result, true, 1.0, provenance, false});
    p.active_layer = p.layers.size() - 1;
    p.modified = iso_timestamp_now();
}

void remove_layer(Project& p, std::size_t index) {
    if (index >= p.layers.size()) throw Error(ErrorCode::OutOfBounds, "layer index out of range");
    if (p.layers.size() == 1) throw Error(ErrorCode::InvalidArgument, "cannot remove the last layer");
    p.layers.erase(p.layers.begin() + static_cast<std::ptrdiff_t>(index));
    if (p.active_layer > index) {
        --p.active_layer;
    } else if (p.active_layer >= p.layers.size()) {
        p.active_layer = p.layers.size() - 1;
    }
    clear_history(p);
    p.modified = iso_timestamp_now();
}

// ---- archive ----

Json provenance_json(const Provenance& prov) {
    Json j{{"type", provenance_type(prov)}};
    if (const auto* f = std::get_if<FrangiProvenance>(&prov)) j["params"] = f->params;
    if (const auto* c = std::get_if<ConnectivityProvenance>(&prov)) j["params"] = c->params;
    if (const auto* m = std::get_if<ModelProvenance>(&prov)) j["model_id"] = m->model_id;
    return j;
}

Provenance provenance_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "manual") return ManualProvenance{};
    if (type == "frangi") return FrangiProvenance{json_to<FrangiParams>(j.at("params"))};
    if (type == "connectivity") return ConnectivityProvenance{json_to<ConnectivityParams>(j.at("params"))};
    if (type == "model") return ModelProvenance{j.at("model_id").get<std::string>()};
    throw Error(ErrorCode::CorruptProject, "unknown provenance '" + type + "'");
}

namespace {

std::string layer_file(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "layers/%03zu.png", i);
    return buf;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

std::vector<std::uint8_t> project_to_archive(const Project& p) {
    p.validate();
    Json layers = Json::array();
    std::vector<zip::Entry> entries;
    entries.push_back({"manifest.json", {}});
    entries.push_back({"base.png", encode_image(p.base_image, ImageFormat::Png)});
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const MaskLayer& l = p.layers[i];
        layers.push_back({{"name", l.name},
                          {"file", layer_file(i)},
                          {"visible", l.visible},
                          {"opacity", l.opacity},
                          {"locked", l.locked},
                          {"provenance", provenance_json(l.provenance)}});
        entries.push_back({layer_file(i), encode_image(l.mask, ImageFormat::Png)});
    }
    const Json manifest{{"format", "vesselseg-project"},
                        {"version", kProjectFormatVersion},
                        {"id", p.id},
                        {"name", p.name},
                        {"created", p.created},
                        {"modified", p.modified},
                        {"width", p.width()},
                        {"height", p.height()},
                        {"base_image", "base.png"},
                        {"active_layer", p.active_layer},
                        {"layers", layers}};
    entries[0].data = bytes_of(manifest.dump(2) + "\n");
    return zip::write_archive(entries);
}

Project project_from_archive(std::span<const std::uint8_t> bytes) {
    try {
        const auto entries = zip::read_archive(bytes);
        std::map<std::string, const std::vector<std::uint8_t>*> files;
        for (const auto& e : entries) files[e.name] = &e.data;
        auto file = [&](const std::string& name) -> const std::vector<std::uint8_t>& {
            const auto it = files.find(name);
            if (it == files.end()) throw Error(ErrorCode::CorruptProject, "archive has no entry '" + name + "'");
            return *it->second;
        };

        const auto& mbytes = file("manifest.json");
        const Json m = Json::parse(mbytes.begin(), mbytes.end());
        if (m.value("format", "") != "vesselseg-project") throw Error(ErrorCode::CorruptProject, "not a project manifest");
        if (m.at("version").get<int>() != kProjectFormatVersion) {
            throw Error(ErrorCode::CorruptProject, "unsupported project version " + m.at("version").dump());
        }
        Project p;
        p.id = m.at("id").get<std::string>();
        p.name = m.at("name").get<std::string>();
        p.created = m.at("created").get<std::string>();
        p.modified = m.at("modified").get<std::string>();
        p.base_image = decode_image(file(m.at("base_image").get<std::string>()));
        if (p.width() != m.at("width").get<int>() || p.height() != m.at("height").get<int>()) {
            throw Error(ErrorCode::CorruptProject, "base image size disagrees with the manifest");
        }
        for (const Json& jl : m.at("layers")) {
            MaskLayer l;
            l.name = jl.at("name").get<std::string>();
            l.mask = decode_mask(file(jl.at("file").get<std::string>()));
            l.visible = jl.at("visible").get<bool>();
            l.opacity = jl.at("opacity").get<double>();
            l.locked = jl.at("locked").get<bool>();
            l.provenance = provenance_from_json(jl.at("provenance"));
            p.layers.push_back(std::move(l));
        }
        p.active_layer = m.at("active_layer").get<std::size_t>();
        p.validate();
        return p;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptProject, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptProject) throw;
        throw Error(ErrorCode::CorruptProject, e.what());
    }
}

void save_project(const Project& p, const std::filesystem::path& path) { write_file(path, project_to_archive(p)); }

Project load_project(const std::filesystem::path& path) { return project_from_archive(read_file(path)); }

// ---- retraining ----

LayerSelector LayerSelector::parse(std::string_view s) {
    LayerSelector sel;
    if (s.empty() || s == "manual" || s == "topmost-manual") return sel;
    if (s == "active") {
        sel.kind = Kind::Active;
        return sel;
    }
    std::string_view digits = s;
    if (digits.starts_with("index:")) digits.remove_prefix(6);
    std::size_t v = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (!digits.empty() && res.ec == std::errc{} && res.ptr == digits.data() + digits.size()) {
        sel.kind = Kind::Index;
        sel.index = v;
        return sel;
    }
    if (s.starts_with("name:")) {
        sel.kind = Kind::Named;
        sel.name = std::string(s.substr(5));
        return sel;
    }
    throw Error(ErrorCode::InvalidArgument, "layer selector must be manual, active, index:N or name:NAME");
}

std::string LayerSelector::to_string() const {
    switch (kind) {
        case Kind::TopmostManual: return "manual";
        case Kind::Active: return "active";
        case Kind::Index: return "index:" + std::to_string(index);
        case Kind::Named: return "name:" + name;
    }
    return "manual";
}

const MaskLayer& LayerSelector::select(const Project& p) const {
    switch (kind) {
        case Kind::TopmostManual:
            for (auto it = p.layers.rbegin(); it != p.layers.rend(); ++it)
                if (std::holds_alternative<ManualProvenance>(it->provenance)) return *it;
            throw Error(ErrorCode::NotFound, "project " + p.id + " has no manual layer");
        case Kind::Active:
            if (p.active_layer < p.layers.size()) return p.layers[p.active_layer];
            break;
        case Kind::Index:
            if (index < p.layers.size()) return p.layers[index];
            break;
        case Kind::Named:
            for (const MaskLayer& l : p.layers)
                if (l.name == name) return l;
            break;
    }
    throw Error(ErrorCode::NotFound, "project " + p.id + " has no layer matching '" + to_string() + "'");
}

TrainedModel retrain_from_projects(std::span<const Project> projects, const LayerSelector& selector,
                                   const FeatureConfig& cfg, const ModelKind& kind, const Sampling& sampling) {
    if (projects.empty()) throw Error(ErrorCode::InvalidArgument, "retraining needs at least one project");
    std::vector<LabeledImage> pairs;
    for (const Project& p : projects) pairs.push_back({p.base_image, selector.select(p).mask, p.id});
    TrainedModel m = train(build_dataset(pairs, cfg, sampling), kind);
    for (const Project& p : projects) m.meta.sources.push_back(p.id);
    return m;
}

}  // namespace vesselseg
