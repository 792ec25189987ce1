#include "geosafety/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "geosafety/csv.hpp"
#include "geosafety/error.hpp"
#include "geosafety/parallel.hpp"
#include "geosafety/stats.hpp"

namespace geosafety {

void BootstrapConfig::validate() const {
  if (replications == 0) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "confidence level must lie in (0, 1)");
  }
}

TwoWayDraw resample_two_way(std::size_t n_participants, std::size_t n_locations, Rng& rng) {
  TwoWayDraw draw;
  draw.participants.resize(n_participants);
  draw.locations.resize(n_locations);
  for (auto& p : draw.participants) p = rng.uniform_index(n_participants);
  for (auto& l : draw.locations) l = rng.uniform_index(n_locations);
  return draw;
}

CellIndex::CellIndex(const AnalysisTable& table)
    : n_locations_(table.location_ids.size()),
      cells_(table.participant_ids.size() * table.location_ids.size()) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    cells_[r.participant * n_locations_ + r.location].push_back(i);
  }
}

AnalysisTable materialize(const AnalysisTable& table, const CellIndex& cells, const TwoWayDraw& draw) {
  AnalysisTable out;
  out.participant_ids.reserve(draw.participants.size());
  out.participant_male.reserve(draw.participants.size());
  for (auto p : draw.participants) {
    out.participant_ids.push_back(table.participant_ids[p]);
    out.participant_male.push_back(table.participant_male[p]);
  }
  out.location_ids.reserve(draw.locations.size());
  out.features.reserve(draw.locations.size());
  for (auto l : draw.locations) {
    out.location_ids.push_back(table.location_ids[l]);
    out.features.push_back(table.features[l]);
  }
  for (std::size_t i = 0; i < draw.participants.size(); ++i) {
    for (std::size_t j = 0; j < draw.locations.size(); ++j) {
      for (auto idx : cells.rows(draw.participants[i], draw.locations[j])) {
        AnalysisRow row = table.rows[idx];
        row.participant = i;
        row.location = j;
        row.group = i;
        out.rows.push_back(row);
      }
    }
  }
  return out;
}

AnalysisTable materialize(const AnalysisTable& table, const TwoWayDraw& draw) {
  return materialize(table, CellIndex(table), draw);
}

namespace {

std::size_t distinct_count(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

struct Replicate {
  std::vector<double> beta;
  std::size_t redraws = 0;
  bool converged = true;
  bool pseudo_inverse = false;
};

}  // namespace

void summarize_replicates(BootstrapResult& result) {
  const auto p = static_cast<std::size_t>(result.replicates.cols());
  result.ci_low.assign(p, 0.0);
  result.ci_high.assign(p, 0.0);
  result.se.assign(p, 0.0);
  std::vector<double> column(static_cast<std::size_t>(result.replicates.rows()));
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t b = 0; b < column.size(); ++b) {
      column[b] = result.replicates(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
    }
    const auto [lo, hi] = percentile_interval(column, result.level);
    result.ci_low[k] = lo;
    result.ci_high[k] = hi;
    result.se[k] = sample_sd(column);
  }
}

BootstrapResult bootstrap_lmm(const AnalysisTable& table, const ModelSpec& spec,
                              const BootstrapConfig& config, unsigned threads,
                              const FitOptions& fit_options) {
  config.validate();
  const auto full_design = build_design(table, spec);
  const auto full_fit = fit_lmm(full_design, spec.method, fit_options);

  const auto names = design_column_names(spec.include_interactions);
  std::set<std::string> within;
  for (auto j : within_location_columns(spec.include_interactions)) within.insert(names[j]);

  const CellIndex cells(table);
  const std::size_t P = table.participant_ids.size();
  const std::size_t L = table.location_ids.size();
  const std::size_t B = config.replications;

  std::vector<Replicate> reps(B);
  parallel_for(B, threads, [&](std::size_t index) {
    Rng rng(config.seed, index + 1);
    Replicate& rep = reps[index];
    for (;;) {
      const auto draw = resample_two_way(P, L, rng);
      bool degenerate = distinct_count(draw.locations) < 2;
      std::optional<DesignMatrices> design;
      if (!degenerate) {
        const auto sample = materialize(table, cells, draw);
        degenerate = sample.rows.empty();
        if (!degenerate) {
          design = build_design(sample, spec, full_design.scaling);
          for (const auto& name : design->rank_deficient_columns) {
            degenerate = degenerate || within.contains(name);
          }
        }
      }
      if (degenerate) {
        if (rep.redraws == config.max_redraws_per_replication) {
          throw Error(ErrorKind::TooManyDegenerateResamples,
                      "replication " + std::to_string(index + 1) + " exhausted " +
                          std::to_string(config.max_redraws_per_replication) + " redraws");
        }
        ++rep.redraws;
        continue;
      }
      FitOptions options = fit_options;
      options.allow_rank_deficient = true;
      const auto fit = fit_lmm(*design, spec.method, options);
      rep.beta = fit.beta;
      rep.converged = fit.converged;
      rep.pseudo_inverse = fit.rank_deficient;
      return;
    }
  });

  BootstrapResult result;
  result.names = names;
  result.estimate = full_fit.beta;
  result.level = config.level;
  result.replicates.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(names.size()));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      result.replicates(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = reps[b].beta[k];
    }
    result.redraws += reps[b].redraws;
    result.nonconverged += reps[b].converged ? 0 : 1;
    result.pseudo_inverse += reps[b].pseudo_inverse ? 1 : 0;
  }
  summarize_replicates(result);
  return result;
}

MeanInterval bootstrap_mean(std::span<const double> values, std::size_t replications, double level,
                            std::uint64_t seed) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "bootstrap_mean of empty sample");
  if (replications == 0) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
  const std::size_t n = values.size();
  std::vector<double> means(replications);
  for (std::size_t b = 0; b < replications; ++b) {
    Rng rng(seed, b + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.uniform_index(n)];
    means[b] = sum / static_cast<double>(n);
  }
  const auto [lo, hi] = percentile_interval(means, level);
  return {mean(values), lo, hi};
}

std::string bootstrap_csv(const BootstrapResult& result, const std::string& header_comment) {
  std::ostringstream out;
  out << header_comment;
  out << "coefficient,estimate,ci_low,ci_high,se\n";
  for (std::size_t k = 0; k < result.names.size(); ++k) {
    out << csv_escape(result.names[k]) << ',' << format_double(result.estimate[k]) << ','
        << format_double(result.ci_low[k]) << ',' << format_double(result.ci_high[k]) << ','
        << format_double(result.se[k]) << '\n';
  }
  out << "# redraws=" << result.redraws << '\n';
  out << "# nonconverged=" << result.nonconverged << '\n';
  out << "# pseudo_inverse=" << result.pseudo_inverse << '\n';
  return out.str();
}

}  // namespace geosafety
