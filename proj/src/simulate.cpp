#include "geosafety/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "geosafety/csv.hpp"
#include "geosafety/error.hpp"
#include "geosafety/spatial.hpp"

namespace geosafety {

namespace {

// Seed tags keep the generators of different artifacts independent.
constexpr std::uint64_t kSettlementTag = 0x736574746c656d74ull;
constexpr std::uint64_t kFeatureTag = 0x6665617475726573ull;
constexpr std::uint64_t kSchoolTag = 0x7363686f6f6c7321ull;

std::string numbered(char prefix, std::size_t i, std::size_t total) {
  const int width = total >= 1000 ? static_cast<int>(std::to_string(total).size()) : 3;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

void SettlementSpec::validate() const {
  if (!(width_m > 0.0 && height_m > 0.0)) throw Error(ErrorKind::InvalidArgument, "box must have positive size");
  if (std::hypot(width_m, height_m) / 2.0 >= kProjectionGuardM) {
    throw Error(ErrorKind::InvalidArgument, "box exceeds the local projection range");
  }
  for (double v : intensity_per_km2) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "intensities must be >= 0");
  }
  if (!std::isfinite(river_bearing_deg)) throw Error(ErrorKind::InvalidArgument, "river bearing must be finite");
}

Settlement simulate_settlement(const SettlementSpec& spec) {
  spec.validate();
  Settlement out;
  const double area_km2 = spec.width_m * spec.height_m / 1e6;
  const auto uniform_point = [&](Rng& rng) {
    const double x = (rng.uniform() - 0.5) * spec.width_m;
    const double y = (rng.uniform() - 0.5) * spec.height_m;
    return local_unproject(spec.center, {x, y});
  };
  for (std::size_t c = 0; c < kPointCategories.size(); ++c) {
    Rng rng(spec.seed ^ kSettlementTag, c + 1);
    const auto count = rng.poisson(spec.intensity_per_km2[c] * area_km2);
    auto& pts = out.entities.points[c];
    pts.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) pts.push_back(uniform_point(rng));
  }
  if (spec.river) {
    const double half = std::hypot(spec.width_m, spec.height_m) / 2.0;
    const double theta = spec.river_bearing_deg * std::numbers::pi / 180.0;
    const PlanarOffset d{half * std::sin(theta), half * std::cos(theta)};
    out.entities.rivers.emplace_back(std::vector<GeoPoint>{
        local_unproject(spec.center, {-d.x, -d.y}), local_unproject(spec.center, {d.x, d.y})});
  }
  Rng rng(spec.seed ^ kSettlementTag, kPointCategories.size() + 1);
  for (std::size_t i = 0; i < spec.n_locations; ++i) {
    out.locations.push_back({numbered('L', i + 1, spec.n_locations), uniform_point(rng)});
  }
  return out;
}

LocationFeatures simulate_location_features(const FeatureDistribution& dist, Rng& rng) {
  LocationFeatures f;
  f.lights_150m = static_cast<int>(rng.poisson(dist.mean_counts[0]));
  f.bars_400m = static_cast<int>(rng.poisson(dist.mean_counts[1]));
  f.bus_stops_400m = static_cast<int>(rng.poisson(dist.mean_counts[2]));
  f.water_sources_400m = static_cast<int>(rng.poisson(dist.mean_counts[3]));
  f.religious_400m = static_cast<int>(rng.poisson(dist.mean_counts[4]));
  f.river_within_50m = rng.uniform() < dist.river_probability ? 1 : 0;
  return f;
}

std::vector<double> default_true_beta() {
  // intercept, male, alone, night, lights, bars, bus stops, water, religious, river
  return {6.0, 0.1, -2.3, -2.1, 0.3, -0.4, -0.2, 0.15, -0.25, -1.0};
}

void ResponseModel::validate() const {
  const auto expected = design_column_names(include_interactions).size();
  if (beta.size() != expected) {
    throw Error(ErrorKind::ShapeMismatch, "true beta has " + std::to_string(beta.size()) +
                                              " entries, design has " + std::to_string(expected));
  }
  if (!(sigma_u >= 0.0) || !(sigma_e >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "standard deviations must be >= 0");
  }
}

std::vector<Participant> simulate_participants(std::size_t n, double male_fraction) {
  if (!(male_fraction >= 0.0 && male_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "male fraction must lie in [0, 1]");
  }
  std::vector<Participant> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool male = std::floor(static_cast<double>(i + 1) * male_fraction) >
                      std::floor(static_cast<double>(i) * male_fraction);
    out.push_back({numbered('P', i + 1, n), male ? Sex::Male : Sex::Female});
  }
  return out;
}

AnalysisTable simulate_responses(const std::vector<Participant>& participants,
                                 const std::vector<LocatedFeatures>& locations,
                                 const ResponseModel& model, std::uint64_t seed) {
  model.validate();
  const Eigen::Map<const Eigen::VectorXd> beta(model.beta.data(),
                                               static_cast<Eigen::Index>(model.beta.size()));
  AnalysisTable table;
  for (const auto& p : participants) {
    table.participant_ids.push_back(p.id);
    table.participant_male.push_back(p.sex == Sex::Male ? 1 : 0);
  }
  for (const auto& [id, features] : locations) {
    table.location_ids.push_back(id);
    table.features.push_back(features);
  }
  table.rows.reserve(participants.size() * locations.size() * 3);
  for (std::size_t i = 0; i < participants.size(); ++i) {
    Rng rng(seed, i + 1);
    const int male = table.participant_male[i];
    const double u = model.sigma_u * rng.normal();
    for (std::size_t l = 0; l < locations.size(); ++l) {
      for (int q = 0; q < 3; ++q) {
        const int alone = q == 1 ? 1 : 0;
        const int night = q == 2 ? 1 : 0;
        const double mean =
            design_row(table.features[l], male, alone, night, model.include_interactions).dot(beta);
        double score = mean + u + model.sigma_e * rng.normal();
        if (model.likert) score = std::clamp(std::round(score), 1.0, 10.0);
        table.rows.push_back({i, l, i, male, alone, night, score});
      }
    }
  }
  return table;
}

std::vector<ResponseRecord> to_response_records(const AnalysisTable& table) {
  std::vector<ResponseRecord> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    if (r.score != std::round(r.score)) {
      throw Error(ErrorKind::InvalidArgument, "response records need integer (Likert) scores");
    }
    const Question q = r.alone ? Question::Alone : (r.night ? Question::Night : Question::Now);
    out.push_back({table.participant_ids[r.participant], table.location_ids[r.location], q,
                   static_cast<int>(r.score)});
  }
  return out;
}

Study simulate_study(const StudySpec& spec) {
  if (spec.n_participants == 0 || spec.n_locations == 0) {
    throw Error(ErrorKind::InvalidArgument, "study needs at least one participant and location");
  }
  Study study;
  study.participants = simulate_participants(spec.n_participants, spec.male_fraction);
  for (std::size_t l = 0; l < spec.n_locations; ++l) {
    Rng rng(spec.seed ^ kFeatureTag, l + 1);
    study.locations.emplace_back(numbered('L', l + 1, spec.n_locations),
                                 simulate_location_features(spec.features, rng));
  }
  study.table = simulate_responses(study.participants, study.locations, spec.model, spec.seed);
  return study;
}

std::string responses_csv(const std::vector<ResponseRecord>& records) {
  std::ostringstream out;
  out << "participant_id,location_id,question,score\n";
  for (const auto& r : records) {
    out << csv_escape(r.participant_id) << ',' << csv_escape(r.location_id) << ','
        << to_string(r.question) << ',' << r.score << '\n';
  }
  return out.str();
}

std::string participants_csv(const std::vector<Participant>& participants) {
  std::ostringstream out;
  out << "participant_id,sex\n";
  for (const auto& p : participants) {
    out << csv_escape(p.id) << ',' << (p.sex == Sex::Male ? 'M' : 'F') << '\n';
  }
  return out.str();
}

void SchoolSimulation::validate() const {
  if (n_schools == 0) throw Error(ErrorKind::InvalidArgument, "need at least one school");
  if (safety_beta.size() != design_column_names(false).size()) {
    throw Error(ErrorKind::InvalidArgument, "safety_beta must have " +
                                                std::to_string(design_column_names(false).size()) +
                                                " main-effects coefficients");
  }
  for (double v : {rate_intercept, rate_slope, rate_noise_sd}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "school rate parameters must be finite");
  }
  if (rate_noise_sd < 0.0) throw Error(ErrorKind::InvalidArgument, "rate_noise_sd must be >= 0");
}

SchoolTable simulate_schools(const SettlementSpec& settlement, const FeatureEntities& entities,
                             const SchoolSimulation& spec) {
  settlement.validate();
  spec.validate();
  SchoolTable table;
  table.demographic_columns = {"enrollment", "dropout_rate", "teachers_per_student"};
  const FeatureExtractor extractor(entities);
  const Eigen::Map<const Eigen::VectorXd> beta(spec.safety_beta.data(),
                                               static_cast<Eigen::Index>(spec.safety_beta.size()));
  Rng rng(spec.seed ^ kSchoolTag, 1);
  for (std::size_t i = 0; i < spec.n_schools; ++i) {
    SchoolRecord s;
    s.id = numbered('S', i + 1, spec.n_schools);
    const double x = (rng.uniform() - 0.5) * settlement.width_m;
    const double y = (rng.uniform() - 0.5) * settlement.height_m;
    s.point = local_unproject(settlement.center, {x, y});
    const double safety = design_row(extractor.extract(s.point), 0, 0, 0, false).dot(beta);
    const double rate = spec.rate_intercept - spec.rate_slope * safety + spec.rate_noise_sd * rng.normal();
    s.observed_rate = std::clamp(rate, 0.0, 1.0);
    const double enrollment = std::round(150.0 + 450.0 * rng.uniform());
    const double dropout = std::clamp(0.05 + 0.5 * s.observed_rate + 0.02 * rng.normal(), 0.0, 1.0);
    const double teachers = 0.02 + 0.02 * rng.uniform();
    s.demographics = {enrollment, dropout, teachers};
    table.schools.push_back(std::move(s));
  }
  return table;
}

}  // namespace geosafety
