#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geosafety/csv.hpp"
#include "geosafety/spatial.hpp"

namespace geosafety {

enum class Sex { Male, Female };
enum class Question { Now, Alone, Night };

std::string_view to_string(Question q);

struct Participant {
  std::string id;
  Sex sex = Sex::Female;
};

struct ResponseRecord {
  std::string participant_id;
  std::string location_id;
  Question question = Question::Now;
  int score = 0;  // Likert 1..10
};

struct SurveyData {
  std::vector<Participant> participants;
  std::vector<ResponseRecord> responses;
};

/// participants.csv: `participant_id,sex` with sex in {M, F}.
std::vector<Participant> load_participants(const CsvTable& table);

/// responses.csv: `participant_id,location_id,question,score`. Unknown
/// location ids are only rejected when `known_locations` is given.
std::vector<ResponseRecord> load_responses(
    const CsvTable& table, std::span<const Participant> participants,
    std::optional<std::span<const std::string>> known_locations = std::nullopt);

SurveyData load_survey(const std::filesystem::path& responses_csv,
                       const std::filesystem::path& participants_csv,
                       std::optional<std::span<const std::string>> known_locations = std::nullopt);

/// One response in model-ready form. Indices refer into the owning
/// AnalysisTable; `group` is the random-intercept group of the row.
struct AnalysisRow {
  std::size_t participant = 0;
  std::size_t location = 0;
  std::size_t group = 0;
  int male = 0;
  int alone = 0;
  int night = 0;
  double score = 0.0;
};

/// Long-format responses joined with per-location features.
struct AnalysisTable {
  std::vector<std::string> participant_ids;
  std::vector<int> participant_male;
  std::vector<std::string> location_ids;
  std::vector<LocationFeatures> features;  // indexed by location
  std::vector<AnalysisRow> rows;
  std::vector<std::string> warnings;

  const LocationFeatures& features_of(const AnalysisRow& row) const {
    return features[row.location];
  }
};

using LocatedFeatures = std::pair<std::string, LocationFeatures>;

/// Question flags: Now -> (0,0), Alone -> (1,0), Night -> (0,1). Only
/// participants and locations that have responses are kept, in input order.
/// Throws MissingFeatures when a response's location has no feature row.
AnalysisTable build_analysis_table(const SurveyData& survey,
                                   std::span<const LocatedFeatures> features);

// ---------------------------------------------------------------------------
// locations.csv / features.csv

struct Location {
  std::string id;
  GeoPoint point;
};

/// `location_id,lat,lon` (also accepts extra trailing columns).
std::vector<Location> load_locations(const CsvTable& table, std::string_view id_column = "location_id");

std::vector<LocatedFeatures> load_features(const CsvTable& table);
/// `<id_column>,lat,lon` text for locations.
std::string locations_csv(std::span<const Location> locations, std::string_view id_column = "location_id");
std::string features_csv_header();
std::string features_csv_row(const std::string& id, const LocationFeatures& f);

}  // namespace geosafety
