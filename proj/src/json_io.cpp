#include "vesselseg/json_io.hpp"

namespace vesselseg {

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void require_object(const Json& j, const char* what) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a JSON object");
}

}  // namespace

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
}

void to_json(Json& j, const FeatureConfig& v) {
    j = Json{{"scales", v.scales},
             {"window", v.window},
             {"include_coordinates", v.include_coordinates},
             {"schema_version", v.schema_version}};
    if (v.is_raw()) j["raw_names"] = v.raw_names;
}

void from_json(const Json& j, FeatureConfig& v) {
    require_object(j, "feature config");
    read(j, "scales", v.scales);
    read(j, "window", v.window);
    read(j, "include_coordinates", v.include_coordinates);
    read(j, "schema_version", v.schema_version);
    read(j, "raw_names", v.raw_names);
}

void to_json(Json& j, const FrangiParams& v) {
    j = Json{{"sigmas", v.sigmas}, {"beta", v.beta}, {"c", v.c}, {"threshold", v.threshold}};
}

void from_json(const Json& j, FrangiParams& v) {
    require_object(j, "frangi parameters");
    read(j, "sigmas", v.sigmas);
    read(j, "beta", v.beta);
    read(j, "c", v.c);
    read(j, "threshold", v.threshold);
}

void to_json(Json& j, const StructuringElement& v) {
    j = Json{{"shape", to_string(v.shape())}, {"radius", v.radius()}};
}

void from_json(const Json& j, StructuringElement& v) {
    require_object(j, "structuring element");
    ElementShape shape = v.shape();
    int radius = v.radius();
    if (j.contains("shape")) shape = parse_element_shape(j.at("shape").get<std::string>());
    read(j, "radius", radius);
    v = StructuringElement(shape, radius);
}

void to_json(Json& j, const CleanupSpec& v) { j = Json{{"order", to_string(v.order)}, {"element", v.element}}; }

void from_json(const Json& j, CleanupSpec& v) {
    require_object(j, "cleanup");
    if (j.contains("order")) v.order = parse_cleanup_order(j.at("order").get<std::string>());
    read(j, "element", v.element);
}

void to_json(Json& j, const GrowthParams& v) {
    j = Json{{"tolerance", v.tolerance},
             {"neighborhood", to_string(v.neighborhood)},
             {"radius", v.radius},
             {"reference", to_string(v.reference)},
             {"max_pixels", v.max_pixels ? Json(*v.max_pixels) : Json(nullptr)}};
}

void from_json(const Json& j, GrowthParams& v) {
    require_object(j, "growth parameters");
    read(j, "tolerance", v.tolerance);
    if (j.contains("neighborhood")) {
        const Json& n = j.at("neighborhood");
        v.neighborhood = parse_neighborhood(n.is_number() ? std::to_string(n.get<int>()) : n.get<std::string>());
    }
    read(j, "radius", v.radius);
    if (j.contains("reference")) v.reference = parse_reference(j.at("reference").get<std::string>());
    if (j.contains("max_pixels")) {
        const Json& m = j.at("max_pixels");
        if (m.is_null()) {
            v.max_pixels.reset();
        } else {
            v.max_pixels = m.get<std::size_t>();
        }
    }
}

void to_json(Json& j, const ConnectivityParams& v) {
    j = Json{{"frangi", v.frangi},
             {"seed_threshold", v.seed_threshold},
             {"growth", v.growth},
             {"variant", to_string(v.variant)},
             {"cleanup", v.cleanup ? Json(*v.cleanup) : Json(nullptr)}};
}

void from_json(const Json& j, ConnectivityParams& v) {
    require_object(j, "connectivity parameters");
    read(j, "frangi", v.frangi);
    read(j, "seed_threshold", v.seed_threshold);
    read(j, "growth", v.growth);
    if (j.contains("variant")) v.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("cleanup")) {
        const Json& c = j.at("cleanup");
        if (c.is_null()) {
            v.cleanup.reset();
        } else {
            v.cleanup = c.get<CleanupSpec>();
        }
    }
}

void to_json(Json& j, const ModelKind& v) {
    j = Json{{"type", to_string(v.type)}};
    if (v.type == ModelKind::Type::Knn) j["k"] = v.k;
    if (v.type == ModelKind::Type::DecisionTree) {
        j["max_depth"] = v.max_depth;
        j["min_leaf"] = v.min_leaf;
    }
}

void from_json(const Json& j, ModelKind& v) {
    if (j.is_string()) {
        v.type = parse_model_type(j.get<std::string>());
        return;
    }
    require_object(j, "model kind");
    if (j.contains("type")) v.type = parse_model_type(j.at("type").get<std::string>());
    read(j, "k", v.k);
    read(j, "max_depth", v.max_depth);
    read(j, "min_leaf", v.min_leaf);
}

void to_json(Json& j, const Sampling& v) {
    j = Json{{"kind", to_string(v.kind)}};
    if (v.kind != Sampling::Kind::All) {
        j["n"] = v.n;
        j["seed"] = v.seed;
    }
}

void from_json(const Json& j, Sampling& v) {
    require_object(j, "sampling");
    if (j.contains("kind")) v.kind = parse_sampling_kind(j.at("kind").get<std::string>());
    read(j, "n", v.n);
    read(j, "seed", v.seed);
}

void to_json(Json& j, const ConfusionMatrix& v) {
    j = Json{{"tp", v.tp}, {"fp", v.fp}, {"tn", v.tn}, {"fn", v.fn}};
}

void to_json(Json& j, const EvalReport& v) {
    j = Json{{"confusion", v.confusion},     {"accuracy", v.accuracy}, {"sensitivity", v.sensitivity},
             {"specificity", v.specificity}, {"dice", v.dice},         {"jaccard", v.jaccard}};
}

}  // namespace vesselseg
