#pragma once

#include <json.hpp>

#include "vesselseg/classify.hpp"
#include "vesselseg/connectivity.hpp"
#include "vesselseg/dataset.hpp"
#include "vesselseg/features.hpp"
#include "vesselseg/morphology.hpp"
#include "vesselseg/project.hpp"
#include "vesselseg/vesselness.hpp"

namespace vesselseg {

using Json = nlohmann::json;

// Readers start from the type's defaults and override only the keys that
// are present, so partial objects are valid parameter sets. Type errors
// and out-of-range values throw InvalidArgument.

void to_json(Json& j, const FeatureConfig& v);
void from_json(const Json& j, FeatureConfig& v);

void to_json(Json& j, const FrangiParams& v);
void from_json(const Json& j, FrangiParams& v);

void to_json(Json& j, const StructuringElement& v);
void from_json(const Json& j, StructuringElement& v);

void to_json(Json& j, const CleanupSpec& v);
void from_json(const Json& j, CleanupSpec& v);

void to_json(Json& j, const GrowthParams& v);
void from_json(const Json& j, GrowthParams& v);

void to_json(Json& j, const ConnectivityParams& v);
void from_json(const Json& j, ConnectivityParams& v);

void to_json(Json& j, const ModelKind& v);
void from_json(const Json& j, ModelKind& v);

void to_json(Json& j, const Sampling& v);
void from_json(const Json& j, Sampling& v);

void to_json(Json& j, const ConfusionMatrix& v);
void to_json(Json& j, const EvalReport& v);

/// {"type": ..., "params" | "model_id": ...}
Json provenance_json(const Provenance& prov);
/// Errors: CorruptProject for unknown types.
Provenance provenance_from_json(const Json& j);

/// Parses `text`, converting JSON syntax errors to InvalidArgument.
Json parse_json(std::string_view text);

/// Applies from_json and validates, mapping library exceptions to InvalidArgument.
template <typename T>
T json_to(const Json& j) {
    try {
        T v = j.get<T>();
        if constexpr (requires { v.validate(); }) v.validate();
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, e.what());
    }
}

}  // namespace vesselseg
