#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "geosafety/lmm.hpp"

namespace geosafety {

inline constexpr std::string_view kToolName = "geosafety";
inline constexpr std::string_view kToolVersion = GEOSAFETY_VERSION;

/// model.json document. `config` is stored verbatim under "config".
nlohmann::ordered_json model_to_json(const FitResult& fit,
                                     const nlohmann::ordered_json& config = nlohmann::ordered_json::object());

/// Throws SchemaError on missing or ill-typed fields.
FitResult model_from_json(const nlohmann::ordered_json& doc);

std::string dump_model(const FitResult& fit,
                       const nlohmann::ordered_json& config = nlohmann::ordered_json::object());
FitResult load_model(const std::filesystem::path& path);

}  // namespace geosafety
