#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geosafety/lmm.hpp"
#include "geosafety/osm.hpp"
#include "geosafety/report.hpp"
#include "geosafety/rng.hpp"
#include "geosafety/survey.hpp"

namespace geosafety {

// ---------------------------------------------------------------------------
// Synthetic settlements

struct SettlementSpec {
  GeoPoint center{-1.313, 36.79};
  double width_m = 2000.0;   // east-west extent of the box
  double height_m = 2000.0;  // north-south extent of the box
  /// Expected points per km^2, indexed like kPointCategories.
  /// Defaults give roughly 3 bars, 2 religious buildings, 2 bus stops, 3 water
  /// sources within 400 m and 3 lights within 150 m of a typical location.
  std::array<double, 5> intensity_per_km2{6.0, 4.0, 4.0, 6.0, 40.0};
  bool river = true;
  double river_bearing_deg = 60.0;  // direction of the straight river through the center
  std::string river_name = "Ngong River";
  std::size_t n_locations = 10;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument (negative intensities, empty box, box beyond the
  /// local-projection guard).
  void validate() const;
};

struct Settlement {
  FeatureEntities entities;
  std::vector<Location> locations;  // ids L001, L002, ...
};

/// Category points are Poisson(intensity x area) in number and uniform in the
/// box; the optional river is a straight two-vertex polyline crossing the box
/// through its center; locations are uniform in the box. Deterministic in seed.
Settlement simulate_settlement(const SettlementSpec& spec);

// ---------------------------------------------------------------------------
// Location-level features without geometry

/// Poisson means for the five counts and the river probability.
struct FeatureDistribution {
  std::array<double, 5> mean_counts{4.0, 3.0, 2.0, 3.0, 2.0};  // lights, bars, bus, water, religious
  double river_probability = 0.3;
};

LocationFeatures simulate_location_features(const FeatureDistribution& dist, Rng& rng);

// ---------------------------------------------------------------------------
// Responses

/// Default planted coefficients (design order, no interactions): intercept 6,
/// male 0.1, alone -2.3, night -2.1, and mixed-sign spatial effects.
std::vector<double> default_true_beta();

struct ResponseModel {
  std::vector<double> beta = default_true_beta();  // design order
  bool include_interactions = false;
  double sigma_u = 1.0;
  double sigma_e = 1.0;
  /// Round to the nearest integer and clamp to 1..10.
  bool likert = false;

  void validate() const;
};

/// `n` participants with ids P001.. and a deterministic sex pattern: the i-th
/// participant (0-based) is male when floor((i+1) f) > floor(i f).
std::vector<Participant> simulate_participants(std::size_t n, double male_fraction = 0.5);

/// Every participant answers all three questions at every location:
/// score = x'beta + u_i + e with u_i ~ N(0, sigma_u^2), e ~ N(0, sigma_e^2).
/// Participant i draws from substream (seed, i + 1): first u_i, then the
/// residuals in (location, question) order.
AnalysisTable simulate_responses(const std::vector<Participant>& participants,
                                 const std::vector<LocatedFeatures>& locations,
                                 const ResponseModel& model, std::uint64_t seed);

/// Converts a Likert-mode table to survey records. Throws InvalidArgument
/// for non-integer scores.
std::vector<ResponseRecord> to_response_records(const AnalysisTable& table);

/// Planted-parameter study: simulated participants and location features plus
/// their responses.
struct StudySpec {
  std::size_t n_participants = 30;
  std::size_t n_locations = 12;
  double male_fraction = 0.5;
  FeatureDistribution features;
  ResponseModel model;
  std::uint64_t seed = 0;
};

struct Study {
  std::vector<Participant> participants;
  std::vector<LocatedFeatures> locations;
  AnalysisTable table;
};

Study simulate_study(const StudySpec& spec);

/// responses.csv text (integer scores) for records.
std::string responses_csv(const std::vector<ResponseRecord>& records);
std::string participants_csv(const std::vector<Participant>& participants);

// ---------------------------------------------------------------------------
// Schools

/// Synthetic schools placed uniformly in a settlement box. The observed rate
/// decreases linearly in the planted safety x'beta (male = alone = night = 0):
/// rate = clamp(rate_intercept - rate_slope * safety + N(0, rate_noise_sd^2), 0, 1).
/// Demographics: enrollment, dropout_rate (correlated with the rate) and
/// teachers_per_student (noise).
struct SchoolSimulation {
  std::size_t n_schools = 23;
  std::vector<double> safety_beta = default_true_beta();  // main-effects design order
  double rate_intercept = 0.35;
  double rate_slope = 0.05;
  double rate_noise_sd = 0.01;
  std::uint64_t seed = 0;
  void validate() const;
};

SchoolTable simulate_schools(const SettlementSpec& settlement, const FeatureEntities& entities,
                             const SchoolSimulation& spec);

}  // namespace geosafety
