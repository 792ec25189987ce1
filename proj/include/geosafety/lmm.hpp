#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geosafety/spatial.hpp"
#include "geosafety/survey.hpp"

namespace geosafety {

enum class FitMethod { REML, ML };

std::string_view to_string(FitMethod m);
FitMethod parse_fit_method(std::string_view text);

struct ModelSpec {
  bool include_interactions = false;
  bool standardize_features = false;
  FitMethod method = FitMethod::REML;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Centering/scaling applied to the six spatial covariates before they enter
/// the design (identity unless standardize_features). The river indicator is
/// never scaled.
struct FeatureScaling {
  std::array<double, 6> center{0, 0, 0, 0, 0, 0};
  std::array<double, 6> scale{1, 1, 1, 1, 1, 1};

  friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

/// Column labels in design order: intercept, male, alone, night, the six
/// spatial covariates, then (with interactions) male x each of the others.
std::vector<std::string> design_column_names(bool include_interactions);

/// Columns that do not vary with location: intercept, male, alone, night and
/// their male interactions.
std::vector<std::size_t> within_location_columns(bool include_interactions);

struct DesignMatrices {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> groups;  // contiguous 0..G-1
  std::vector<std::string> column_names;
  ModelSpec spec;
  FeatureScaling scaling;
  std::size_t rank = 0;
  std::vector<std::string> rank_deficient_columns;
  std::vector<std::string> warnings;

  std::size_t n_groups() const;

  /// Generic design from raw arrays. Group labels are relabeled to 0..G-1
  /// in order of first appearance.
  static DesignMatrices from_arrays(Eigen::MatrixXd X, Eigen::VectorXd y,
                                    std::span<const long long> groups,
                                    std::vector<std::string> column_names);
};

/// Unscaled design row for one observation.
Eigen::VectorXd design_row(const LocationFeatures& features, int male, int alone, int night,
                           bool include_interactions, const FeatureScaling& scaling = {});

/// Scaling is estimated from the table when standardize_features is set,
/// unless `fixed_scaling` supplies it (used to keep bootstrap replicates on
/// the full-data scale).
DesignMatrices build_design(const AnalysisTable& table, const ModelSpec& spec,
                            const std::optional<FeatureScaling>& fixed_scaling = std::nullopt);

/// Numerical rank of X (relative singular-value tolerance) and the columns
/// that are linear combinations of earlier columns in design order.
struct RankReport {
  std::size_t rank = 0;
  std::vector<std::size_t> dependent_columns;
};
RankReport analyze_rank(const Eigen::MatrixXd& X, double rel_tol = 1e-10);

struct FitOptions {
  double rank_tolerance = 1e-10;
  /// When false, a rank-deficient X raises SingularNormalEquations instead of
  /// falling back to the minimum-norm solution.
  bool allow_rank_deficient = true;
  double log_theta_min = -25.0;
  double log_theta_max = 25.0;
  double log_theta_tolerance = 1e-10;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> beta;
  double sigma_u2 = 0.0;
  double sigma_e2 = 0.0;
  double theta = 0.0;
  double criterion_value = 0.0;  // maximized (restricted) log-likelihood
  FitMethod method = FitMethod::REML;
  bool converged = false;
  ModelSpec spec;
  FeatureScaling scaling;
  std::size_t n_obs = 0;
  std::size_t n_groups = 0;
  std::size_t rank = 0;
  bool rank_deficient = false;
  std::vector<std::string> warnings;

  /// Throws InvalidArgument for unknown names.
  double coefficient(std::string_view name) const;
};

/// Profiled (restricted) deviance of the random-intercept model as a function
/// of theta = sigma_u^2 / sigma_e^2. Precomputes within/between-group
/// sufficient statistics over an orthonormal basis of X once; each evaluation
/// is O(G r^2 + r^3).
class ProfiledDeviance {
 public:
  ProfiledDeviance(const DesignMatrices& design, FitMethod method, double rank_tolerance = 1e-10);

  struct Evaluation {
    double deviance = 0.0;       // -2 (restricted) log-likelihood at the profiled sigma_e^2
    double d_deviance = 0.0;     // derivative with respect to theta
    double sigma_e2 = 0.0;
    Eigen::VectorXd beta;        // GLS (minimum-norm when rank deficient)
  };

  Evaluation evaluate(double theta) const;
  double deviance(double theta) const { return evaluate(theta).deviance; }

  std::size_t rank() const noexcept { return rank_; }
  std::size_t n_obs() const noexcept { return n_; }
  std::size_t n_groups() const noexcept { return sizes_.size(); }
  std::size_t n_columns() const noexcept { return p_; }

 private:
  FitMethod method_;
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::size_t rank_ = 0;
  double log_sv_ = 0.0;          // sum of 2 log(singular values) over the retained basis
  Eigen::MatrixXd to_beta_;      // p x r: beta = to_beta_ * gamma
  Eigen::VectorXd ols_gamma_;    // r
  Eigen::MatrixXd within_cross_; // r x r, sum of within-group outer products of the basis
  Eigen::MatrixXd group_mean_basis_;  // G x r
  Eigen::VectorXd group_mean_resid_;  // G, OLS residual group means
  Eigen::VectorXd sizes_;             // G
  double within_ss_resid_ = 0.0;      // within-group SS of OLS residuals
};

FitResult fit_lmm(const DesignMatrices& design, FitMethod method, const FitOptions& options = {});
inline FitResult fit_lmm(const DesignMatrices& design, const FitOptions& options = {}) {
  return fit_lmm(design, design.spec.method, options);
}

/// Fixed-effects prediction x'beta with the random intercept at zero.
/// Throws ShapeMismatch when the fit's coefficient layout does not match its
/// model spec.
double predict_fixed(const FitResult& fit, const LocationFeatures& features, int male, int alone,
                     int night);

}  // namespace geosafety
