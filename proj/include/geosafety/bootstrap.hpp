#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosafety/lmm.hpp"
#include "geosafety/rng.hpp"
#include "geosafety/survey.hpp"

namespace geosafety {

struct BootstrapConfig {
  std::size_t replications = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t max_redraws_per_replication = 100;

  /// Throws InvalidArgument when replications == 0 or level is outside (0, 1).
  void validate() const;
};

/// One two-way resample: indices of the drawn participants and locations
/// (with replacement, in draw order).
struct TwoWayDraw {
  std::vector<std::size_t> participants;
  std::vector<std::size_t> locations;
};

/// Draws P participant indices, then L location indices, uniformly with
/// replacement.
TwoWayDraw resample_two_way(std::size_t n_participants, std::size_t n_locations, Rng& rng);

/// Precomputed (participant, location) -> response rows lookup used to
/// materialize resamples quickly.
class CellIndex {
 public:
  explicit CellIndex(const AnalysisTable& table);
  const std::vector<std::size_t>& rows(std::size_t participant, std::size_t location) const {
    return cells_[participant * n_locations_ + location];
  }

 private:
  std::size_t n_locations_ = 0;
  std::vector<std::vector<std::size_t>> cells_;
};

/// Builds the resampled table: for every (drawn participant instance i,
/// drawn location instance j) pair, copies of all of the participant's rows
/// at that location. Participant instance i becomes participant and group i;
/// location instance j becomes location j with a copy of its feature row.
AnalysisTable materialize(const AnalysisTable& table, const CellIndex& cells, const TwoWayDraw& draw);
AnalysisTable materialize(const AnalysisTable& table, const TwoWayDraw& draw);

struct BootstrapResult {
  std::vector<std::string> names;
  std::vector<double> estimate;  // full-data fit
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::vector<double> se;
  Eigen::MatrixXd replicates;  // B x p, row b = replication b + 1
  double level = 0.95;
  std::size_t redraws = 0;
  std::size_t nonconverged = 0;
  std::size_t pseudo_inverse = 0;  // replications fitted with the minimum-norm solution
};

/// Two-way bootstrap of the LMM. Replication b (1-based) uses the substream
/// Rng(seed, b). A resample is redrawn when it covers fewer than two distinct
/// locations or when a column that does not vary by location (intercept,
/// male, alone, night and their male interactions) is collinear; other rank
/// deficiency (location-level features) is fitted with the minimum-norm
/// solution and counted in `pseudo_inverse`. Results do not depend on
/// `threads`. Throws TooManyDegenerateResamples.
BootstrapResult bootstrap_lmm(const AnalysisTable& table, const ModelSpec& spec,
                              const BootstrapConfig& config, unsigned threads = 1,
                              const FitOptions& fit_options = {});

/// Summaries (percentile CI, SE) recomputed from stored replicates.
void summarize_replicates(BootstrapResult& result);

struct MeanInterval {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// One-sample percentile bootstrap of the mean; replication b uses
/// Rng(seed, b). Throws EmptyInput.
MeanInterval bootstrap_mean(std::span<const double> values, std::size_t replications, double level,
                            std::uint64_t seed);

/// `coefficient,estimate,ci_low,ci_high,se` rows followed by the
/// `# redraws=` / `# nonconverged=` / `# pseudo_inverse=` diagnostics.
std::string bootstrap_csv(const BootstrapResult& result, const std::string& header_comment = {});

}  // namespace geosafety
