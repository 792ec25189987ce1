#include "geosafety/model_io.hpp"

#include <fstream>
#include <sstream>

#include "geosafety/error.hpp"

namespace geosafety {

using ordered_json = nlohmann::ordered_json;

ordered_json model_to_json(const FitResult& fit, const ordered_json& config) {
  ordered_json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["method"] = to_string(fit.method);
  doc["converged"] = fit.converged;
  doc["include_interactions"] = fit.spec.include_interactions;
  doc["standardize_features"] = fit.spec.standardize_features;
  doc["columns"] = fit.names;
  ordered_json coefs = ordered_json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    coefs.push_back({{"name", fit.names[i]}, {"estimate", fit.beta[i]}});
  }
  doc["coefficients"] = coefs;
  doc["sigma_u2"] = fit.sigma_u2;
  doc["sigma_e2"] = fit.sigma_e2;
  doc["theta"] = fit.theta;
  doc["criterion"] = fit.criterion_value;
  doc["n_obs"] = fit.n_obs;
  doc["n_groups"] = fit.n_groups;
  doc["rank"] = fit.rank;
  doc["rank_deficient"] = fit.rank_deficient;
  ordered_json scaling = ordered_json::array();
  for (std::size_t k = 0; k < kFeatureColumns.size(); ++k) {
    scaling.push_back({{"feature", kFeatureColumns[k]},
                       {"center", fit.scaling.center[k]},
                       {"scale", fit.scaling.scale[k]}});
  }
  doc["feature_scaling"] = scaling;
  doc["warnings"] = fit.warnings;
  doc["config"] = config;
  return doc;
}

namespace {

template <typename T>
T field(const ordered_json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorKind::SchemaError, std::string("model.json missing '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("model.json field '") + key + "': " + e.what());
  }
}

FitResult parse_model(const ordered_json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::SchemaError, "model.json is not an object");
  FitResult fit;
  fit.method = parse_fit_method(field<std::string>(doc, "method"));
  fit.converged = field<bool>(doc, "converged");
  fit.spec.include_interactions = field<bool>(doc, "include_interactions");
  fit.spec.standardize_features = field<bool>(doc, "standardize_features");
  fit.spec.method = fit.method;
  const auto columns = field<std::vector<std::string>>(doc, "columns");
  const auto& coefs = doc.at("coefficients");
  if (!coefs.is_array() || coefs.size() != columns.size()) {
    throw Error(ErrorKind::SchemaError, "model.json coefficients do not match columns");
  }
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    const auto name = field<std::string>(coefs[i], "name");
    if (name != columns[i]) {
      throw Error(ErrorKind::SchemaError, "coefficient '" + name + "' out of column order");
    }
    fit.names.push_back(name);
    fit.beta.push_back(field<double>(coefs[i], "estimate"));
  }
  fit.sigma_u2 = field<double>(doc, "sigma_u2");
  fit.sigma_e2 = field<double>(doc, "sigma_e2");
  fit.theta = field<double>(doc, "theta");
  fit.criterion_value = field<double>(doc, "criterion");
  fit.n_obs = field<std::size_t>(doc, "n_obs");
  fit.n_groups = field<std::size_t>(doc, "n_groups");
  fit.rank = field<std::size_t>(doc, "rank");
  fit.rank_deficient = field<bool>(doc, "rank_deficient");
  const auto& scaling = doc.at("feature_scaling");
  if (!scaling.is_array() || scaling.size() != kFeatureColumns.size()) {
    throw Error(ErrorKind::SchemaError, "model.json feature_scaling must list six features");
  }
  for (std::size_t k = 0; k < kFeatureColumns.size(); ++k) {
    if (field<std::string>(scaling[k], "feature") != kFeatureColumns[k]) {
      throw Error(ErrorKind::SchemaError, "feature_scaling out of order");
    }
    fit.scaling.center[k] = field<double>(scaling[k], "center");
    fit.scaling.scale[k] = field<double>(scaling[k], "scale");
    if (!(fit.scaling.scale[k] > 0.0)) {
      throw Error(ErrorKind::SchemaError, "feature scale must be positive");
    }
  }
  fit.warnings = field<std::vector<std::string>>(doc, "warnings");
  if (fit.sigma_u2 < 0.0 || fit.sigma_e2 < 0.0) {
    throw Error(ErrorKind::SchemaError, "variance components must be non-negative");
  }
  return fit;
}

}  // namespace

FitResult model_from_json(const ordered_json& doc) {
  try {
    return parse_model(doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("model.json: ") + e.what());
  }
}

std::string dump_model(const FitResult& fit, const ordered_json& config) {
  return model_to_json(fit, config).dump(2) + "\n";
}

FitResult load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open model " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace geosafety
