// pybind11 module geosafety._core: thin wrappers over the C++ core.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "geosafety/bootstrap.hpp"
#include "geosafety/error.hpp"
#include "geosafety/geo.hpp"
#include "geosafety/lmm.hpp"
#include "geosafety/osm.hpp"
#include "geosafety/report.hpp"
#include "geosafety/spatial.hpp"
#include "geosafety/stats.hpp"

namespace py = pybind11;
using namespace geosafety;

namespace {

FeatureRadii radii_from(const py::dict& d) {
  FeatureRadii r;
  for (const auto& [key, value] : d) {
    const auto k = key.cast<std::string>();
    const auto v = value.cast<double>();
    if (k == "lights") r.lights = v;
    else if (k == "bars") r.bars = v;
    else if (k == "bus_stops") r.bus_stops = v;
    else if (k == "water_sources") r.water_sources = v;
    else if (k == "religious") r.religious = v;
    else if (k == "river") r.river = v;
    else throw Error(ErrorKind::ConfigError, "unknown radius key '" + k + "'");
  }
  r.validate();
  return r;
}

Eigen::Matrix<int, Eigen::Dynamic, 6, Eigen::RowMajor> extract_from_osm(
    const std::string& osm_path, const std::vector<std::pair<double, double>>& locations,
    const py::dict& radii, const std::string& tag_mapping_path, unsigned threads) {
  const auto mapping = tag_mapping_path.empty() ? TagMapping::defaults() : TagMapping::load(tag_mapping_path);
  const auto classified = classify_entities(parse_osm_file(osm_path), mapping);
  const FeatureExtractor extractor(classified.entities, radii_from(radii));
  std::vector<GeoPoint> points;
  points.reserve(locations.size());
  for (const auto& [lat, lon] : locations) points.emplace_back(lat, lon);
  py::gil_scoped_release release;
  const auto features = extractor.extract_all(points, threads);
  Eigen::Matrix<int, Eigen::Dynamic, 6, Eigen::RowMajor> out(features.size(), 6);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    out.row(i) << f.lights_150m, f.bars_400m, f.bus_stops_400m, f.water_sources_400m, f.religious_400m,
        f.river_within_50m;
  }
  return out;
}

py::dict fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<long long>& groups,
             std::vector<std::string> names, const std::string& method) {
  if (names.empty())
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  const auto design = DesignMatrices::from_arrays(X, y, groups, names);
  const auto result = fit_lmm(design, parse_fit_method(method));
  py::dict d;
  d["names"] = result.names;
  d["beta"] = result.beta;
  d["sigma_u2"] = result.sigma_u2;
  d["sigma_e2"] = result.sigma_e2;
  d["theta"] = result.theta;
  d["loglik"] = result.criterion_value;
  d["method"] = std::string(to_string(result.method));
  d["converged"] = result.converged;
  d["rank"] = result.rank;
  d["rank_deficient"] = result.rank_deficient;
  d["warnings"] = result.warnings;
  return d;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatial safety-perception analysis core";

  // Error messages start with the ErrorKind name, e.g. "SchemaError: ...".
  py::register_exception<Error>(m, "GeosafetyError", PyExc_ValueError);

  m.attr("EARTH_RADIUS_M") = kEarthRadiusM;
  m.attr("FEATURE_COLUMNS") = std::vector<std::string>(kFeatureColumns.begin(), kFeatureColumns.end());

  m.def("haversine", [](double lat1, double lon1, double lat2, double lon2) {
        return haversine_distance(GeoPoint(lat1, lon1), GeoPoint(lat2, lon2));
      },
      py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"),
      "Great-circle distance in meters.");

  m.def("extract_features", &extract_from_osm, py::arg("osm_path"), py::arg("locations"),
        py::arg("radii") = py::dict(), py::arg("tag_mapping_path") = "", py::arg("threads") = 1u,
        "Count mapped entities around each (lat, lon); returns an n x 6 int array in FEATURE_COLUMNS order.");

  m.def("fit_lmm", &fit, py::arg("X"), py::arg("y"), py::arg("groups"),
        py::arg("names") = std::vector<std::string>{}, py::arg("method") = "REML",
        "Fit y = X beta + u[group] + e by profiled REML or ML.");

  m.def("resample_two_way", [](std::size_t n_participants, std::size_t n_locations, std::uint64_t seed,
                               std::uint64_t stream) {
        Rng rng(seed, stream);
        const auto draw = resample_two_way(n_participants, n_locations, rng);
        return py::make_tuple(draw.participants, draw.locations);
      },
      py::arg("n_participants"), py::arg("n_locations"), py::arg("seed"), py::arg("stream") = 0,
      "One two-way (participant x location) bootstrap draw.");

  m.def("percentile_interval", [](const std::vector<double>& samples, double level) {
        return percentile_interval(samples, level);
      },
      py::arg("samples"), py::arg("level") = 0.95);

  m.def("quintile_groups", [](const std::vector<double>& rates, const std::vector<std::string>& ids,
                              std::size_t k) { return quintile_groups(rates, ids, k); },
        py::arg("rates"), py::arg("ids"), py::arg("k") = 5,
        "Partition indices into k groups by ascending rate (ties broken by id).");

  m.def("ols_baseline", [](const Eigen::MatrixXd& D, const Eigen::VectorXd& y) {
        const auto r = ols_baseline(D, y);
        return py::make_tuple(r.coefficients, r.fitted);
      },
      py::arg("demographics"), py::arg("y"), "Least squares with intercept; returns (coefficients, fitted).");

  m.def("run_cli", &run_cli, py::arg("args"),
        "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
