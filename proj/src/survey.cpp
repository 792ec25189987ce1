#include "geosafety/survey.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "geosafety/error.hpp"

namespace geosafety {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string row_ref(const CsvTable& t, const CsvRow& r) {
  return t.source + " line " + std::to_string(r.line);
}

}  // namespace

std::string_view to_string(Question q) {
  switch (q) {
    case Question::Now: return "now";
    case Question::Alone: return "alone";
    case Question::Night: return "night";
  }
  return "";
}

std::vector<Participant> load_participants(const CsvTable& table) {
  table.require_header_prefix({"participant_id", "sex"});
  table.require_uniform_arity();
  std::vector<Participant> out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    Participant p;
    p.id = row.fields[0];
    if (p.id.empty()) table.fail(row, "empty participant_id");
    const auto sex = row.fields[1];
    if (sex == "M" || sex == "m") p.sex = Sex::Male;
    else if (sex == "F" || sex == "f") p.sex = Sex::Female;
    else table.fail(row, "sex must be M or F, found '" + sex + "'");
    if (!seen.insert(p.id).second) table.fail(row, "duplicate participant_id '" + p.id + "'");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ResponseRecord> load_responses(
    const CsvTable& table, std::span<const Participant> participants,
    std::optional<std::span<const std::string>> known_locations) {
  table.require_header_prefix({"participant_id", "location_id", "question", "score"});
  table.require_uniform_arity();

  std::unordered_set<std::string> participant_ids;
  for (const auto& p : participants) participant_ids.insert(p.id);
  std::unordered_set<std::string> location_ids;
  if (known_locations) location_ids.insert(known_locations->begin(), known_locations->end());

  std::set<std::tuple<std::string, std::string, int>> seen;
  std::vector<ResponseRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ResponseRecord r;
    r.participant_id = row.fields[0];
    r.location_id = row.fields[1];
    const auto q = lower(row.fields[2]);
    if (q == "now") r.question = Question::Now;
    else if (q == "alone") r.question = Question::Alone;
    else if (q == "night") r.question = Question::Night;
    else table.fail(row, "question must be now, alone or night, found '" + row.fields[2] + "'");

    long long score = 0;
    try {
      score = parse_int_field(row.fields[3], "score");
    } catch (const Error& e) {
      table.fail(row, e.what());
    }
    if (score < 1 || score > 10) {
      throw Error(ErrorKind::RangeError, row_ref(table, row) + ": score " + row.fields[3] +
                                             " outside 1..10");
    }
    r.score = static_cast<int>(score);

    if (!participant_ids.contains(r.participant_id)) {
      throw Error(ErrorKind::UnknownId,
                  row_ref(table, row) + ": unknown participant_id '" + r.participant_id + "'");
    }
    if (known_locations && !location_ids.contains(r.location_id)) {
      throw Error(ErrorKind::UnknownId,
                  row_ref(table, row) + ": unknown location_id '" + r.location_id + "'");
    }
    if (!seen.emplace(r.participant_id, r.location_id, static_cast<int>(r.question)).second) {
      throw Error(ErrorKind::DuplicateResponse,
                  row_ref(table, row) + ": duplicate response (" + r.participant_id + ", " +
                      r.location_id + ", " + std::string(to_string(r.question)) + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

SurveyData load_survey(const std::filesystem::path& responses_csv,
                       const std::filesystem::path& participants_csv,
                       std::optional<std::span<const std::string>> known_locations) {
  SurveyData data;
  data.participants = load_participants(read_csv_file(participants_csv));
  data.responses = load_responses(read_csv_file(responses_csv), data.participants, known_locations);
  return data;
}

AnalysisTable build_analysis_table(const SurveyData& survey,
                                   std::span<const LocatedFeatures> features) {
  AnalysisTable table;

  std::unordered_map<std::string, std::size_t> feature_pos;
  for (std::size_t i = 0; i < features.size(); ++i) feature_pos.emplace(features[i].first, i);

  std::unordered_set<std::string> used_participants;
  std::unordered_set<std::string> used_locations;
  for (const auto& r : survey.responses) {
    if (!feature_pos.contains(r.location_id)) {
      throw Error(ErrorKind::MissingFeatures, "no features for location '" + r.location_id + "'");
    }
    used_participants.insert(r.participant_id);
    used_locations.insert(r.location_id);
  }

  std::unordered_map<std::string, std::size_t> participant_index;
  for (const auto& p : survey.participants) {
    if (!used_participants.contains(p.id)) continue;
    participant_index.emplace(p.id, table.participant_ids.size());
    table.participant_ids.push_back(p.id);
    table.participant_male.push_back(p.sex == Sex::Male ? 1 : 0);
  }
  std::unordered_map<std::string, std::size_t> location_index;
  for (const auto& [id, f] : features) {
    if (!used_locations.contains(id) || location_index.contains(id)) continue;
    location_index.emplace(id, table.location_ids.size());
    table.location_ids.push_back(id);
    table.features.push_back(f);
  }

  table.rows.reserve(survey.responses.size());
  for (const auto& r : survey.responses) {
    auto pit = participant_index.find(r.participant_id);
    if (pit == participant_index.end()) {
      throw Error(ErrorKind::UnknownId, "unknown participant_id '" + r.participant_id + "'");
    }
    AnalysisRow row;
    row.participant = pit->second;
    row.group = pit->second;
    row.location = location_index.at(r.location_id);
    row.male = table.participant_male[row.participant];
    row.alone = r.question == Question::Alone ? 1 : 0;
    row.night = r.question == Question::Night ? 1 : 0;
    row.score = static_cast<double>(r.score);
    table.rows.push_back(row);
  }

  // Report incomplete designs: per participant, the location sets of the
  // three questions should coincide.
  std::vector<std::array<std::set<std::size_t>, 3>> cells(table.participant_ids.size());
  for (const auto& row : table.rows) {
    const int q = row.alone ? 1 : row.night ? 2 : 0;
    cells[row.participant][static_cast<std::size_t>(q)].insert(row.location);
  }
  for (std::size_t p = 0; p < cells.size(); ++p) {
    if (cells[p][0] != cells[p][1] || cells[p][0] != cells[p][2]) {
      table.warnings.push_back("participant " + table.participant_ids[p] +
                               ": questions cover different location sets (now " +
                               std::to_string(cells[p][0].size()) + ", alone " +
                               std::to_string(cells[p][1].size()) + ", night " +
                               std::to_string(cells[p][2].size()) + ")");
    }
  }
  return table;
}

std::vector<Location> load_locations(const CsvTable& table, std::string_view id_column) {
  table.require_header_prefix({std::string(id_column), "lat", "lon"});
  table.require_uniform_arity();
  std::vector<Location> out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    GeoPoint point;
    try {
      point = GeoPoint(parse_double_field(row.fields[1], "lat"),
                       parse_double_field(row.fields[2], "lon"));
    } catch (const Error& e) {
      table.fail(row, e.what());
    }
    if (row.fields[0].empty()) table.fail(row, "empty " + std::string(id_column));
    if (!seen.insert(row.fields[0]).second) table.fail(row, "duplicate id '" + row.fields[0] + "'");
    out.push_back({row.fields[0], point});
  }
  return out;
}

std::string features_csv_header() {
  std::string h = "location_id";
  for (const char* c : kFeatureColumns) h += std::string(",") + c;
  return h;
}

std::string features_csv_row(const std::string& id, const LocationFeatures& f) {
  return csv_escape(id) + "," + std::to_string(f.lights_150m) + "," + std::to_string(f.bars_400m) +
         "," + std::to_string(f.bus_stops_400m) + "," + std::to_string(f.water_sources_400m) +
         "," + std::to_string(f.religious_400m) + "," + std::to_string(f.river_within_50m);
}

std::string locations_csv(std::span<const Location> locations, std::string_view id_column) {
  std::string out = csv_escape(id_column) + ",lat,lon\n";
  for (const auto& l : locations) {
    out += csv_escape(l.id) + "," + format_double(l.point.lat()) + "," + format_double(l.point.lon()) + "\n";
  }
  return out;
}

std::vector<LocatedFeatures> load_features(const CsvTable& table) {
  std::vector<std::string> expected = {"location_id"};
  for (const char* c : kFeatureColumns) expected.emplace_back(c);
  table.require_header_prefix(expected);
  table.require_uniform_arity();
  std::vector<LocatedFeatures> out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    std::array<int, 6> v{};
    for (std::size_t i = 0; i < v.size(); ++i) {
      long long x = 0;
      try {
        x = parse_int_field(row.fields[i + 1], kFeatureColumns[i]);
      } catch (const Error& e) {
        table.fail(row, e.what());
      }
      if (x < 0) table.fail(row, std::string(kFeatureColumns[i]) + " must be non-negative");
      v[i] = static_cast<int>(x);
    }
    if (v[5] > 1) table.fail(row, "river_within_50m must be 0 or 1");
    if (!seen.insert(row.fields[0]).second) {
      table.fail(row, "duplicate location_id '" + row.fields[0] + "'");
    }
    out.emplace_back(row.fields[0], LocationFeatures{v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  return out;
}

}  // namespace geosafety
