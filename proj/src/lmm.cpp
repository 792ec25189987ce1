#include "geosafety/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <unordered_map>

#include "geosafety/error.hpp"
#include "geosafety/optimize.hpp"

namespace geosafety {

namespace {

constexpr std::size_t kBaseColumns = 10;
constexpr std::size_t kInteractionColumns = 18;
constexpr std::size_t kFirstSpatial = 4;
constexpr std::size_t kScaledFeatures = 5;  // river indicator is left alone

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// Rows are reordered into a content-defined canonical order before any
// floating-point reduction, so fits do not depend on the input row order or
// on group labels. Groups are sorted by their (sorted) row contents; groups
// with identical contents are interchangeable, so ties are harmless.
struct CanonicalRows {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> groups;
};

CanonicalRows canonicalize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<std::size_t>& groups) {
  const auto n = X.rows();
  const auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    if (y(a) != y(b)) return y(a) < y(b);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (X(a, j) != X(b, j)) return X(a, j) < X(b, j);
    }
    return false;
  };
  std::map<std::size_t, std::vector<Eigen::Index>> by_group;
  for (Eigen::Index i = 0; i < n; ++i) by_group[groups[static_cast<std::size_t>(i)]].push_back(i);
  std::vector<std::vector<Eigen::Index>> buckets;
  buckets.reserve(by_group.size());
  for (auto& [label, rows] : by_group) {
    std::stable_sort(rows.begin(), rows.end(), row_less);
    buckets.push_back(std::move(rows));
  }
  std::stable_sort(buckets.begin(), buckets.end(), [&](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), row_less);
  });
  CanonicalRows out{Eigen::MatrixXd(n, X.cols()), Eigen::VectorXd(n), {}};
  out.groups.reserve(static_cast<std::size_t>(n));
  Eigen::Index k = 0;
  for (std::size_t g = 0; g < buckets.size(); ++g) {
    for (auto i : buckets[g]) {
      out.X.row(k) = X.row(i);
      out.y(k) = y(i);
      out.groups.push_back(g);
      ++k;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(FitMethod m) { return m == FitMethod::REML ? "REML" : "ML"; }

FitMethod parse_fit_method(std::string_view text) {
  if (text == "REML" || text == "reml") return FitMethod::REML;
  if (text == "ML" || text == "ml") return FitMethod::ML;
  throw Error(ErrorKind::ConfigError, "unknown fit method '" + std::string(text) + "'");
}

std::vector<std::string> design_column_names(bool include_interactions) {
  std::vector<std::string> names = {"intercept", "male", "alone", "night"};
  for (const char* c : kFeatureColumns) names.emplace_back(c);
  if (include_interactions) {
    names.emplace_back("male:alone");
    names.emplace_back("male:night");
    for (const char* c : kFeatureColumns) names.push_back(std::string("male:") + c);
  }
  return names;
}

std::vector<std::size_t> within_location_columns(bool include_interactions) {
  std::vector<std::size_t> cols = {0, 1, 2, 3};
  if (include_interactions) {
    cols.push_back(kBaseColumns);
    cols.push_back(kBaseColumns + 1);
  }
  return cols;
}

std::size_t DesignMatrices::n_groups() const {
  std::size_t g = 0;
  for (auto v : groups) g = std::max(g, v + 1);
  return g;
}

DesignMatrices DesignMatrices::from_arrays(Eigen::MatrixXd X, Eigen::VectorXd y,
                                           std::span<const long long> groups,
                                           std::vector<std::string> column_names) {
  if (X.rows() != y.size() || static_cast<std::size_t>(y.size()) != groups.size()) {
    throw Error(ErrorKind::ShapeMismatch, "X, y and groups must have the same number of rows");
  }
  if (column_names.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) column_names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(column_names.size()) != X.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "column name count does not match X");
  }
  DesignMatrices d;
  d.X = std::move(X);
  d.y = std::move(y);
  d.column_names = std::move(column_names);
  std::unordered_map<long long, std::size_t> relabel;
  d.groups.reserve(groups.size());
  for (long long g : groups) {
    auto [it, inserted] = relabel.emplace(g, relabel.size());
    d.groups.push_back(it->second);
  }
  const auto report = analyze_rank(d.X);
  d.rank = report.rank;
  for (auto j : report.dependent_columns) d.rank_deficient_columns.push_back(d.column_names[j]);
  if (d.rank < static_cast<std::size_t>(d.X.cols())) {
    d.warnings.push_back("RankDeficient: design rank " + std::to_string(d.rank) + " < " +
                         std::to_string(d.X.cols()) +
                         " columns; collinear: " + join(d.rank_deficient_columns));
  }
  return d;
}

Eigen::VectorXd design_row(const LocationFeatures& features, int male, int alone, int night,
                           bool include_interactions, const FeatureScaling& scaling) {
  Eigen::VectorXd x(include_interactions ? kInteractionColumns : kBaseColumns);
  x(0) = 1.0;
  x(1) = male;
  x(2) = alone;
  x(3) = night;
  const auto f = feature_values(features);
  for (std::size_t k = 0; k < f.size(); ++k) {
    x(static_cast<Eigen::Index>(kFirstSpatial + k)) = (f[k] - scaling.center[k]) / scaling.scale[k];
  }
  if (include_interactions) {
    x(kBaseColumns) = male * x(2);
    x(kBaseColumns + 1) = male * x(3);
    for (std::size_t k = 0; k < f.size(); ++k) {
      x(static_cast<Eigen::Index>(kBaseColumns + 2 + k)) =
          male * x(static_cast<Eigen::Index>(kFirstSpatial + k));
    }
  }
  return x;
}

RankReport analyze_rank(const Eigen::MatrixXd& X, double rel_tol) {
  RankReport report;
  const auto n = X.rows();
  const auto p = X.cols();
  if (p == 0 || n == 0) return report;

  // Rank from singular values of R (same as those of X).
  Eigen::MatrixXd R;
  if (n >= p) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  } else {
    R = X;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& s = svd.singularValues();
  if (s.size() > 0 && s(0) > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) > rel_tol * s(0)) ++report.rank;
    }
  }

  // Columns that add nothing to the span of earlier columns. X = QR with
  // orthonormal Q, so norms and linear dependencies of the columns of X are
  // those of the (much shorter) columns of R.
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd v = R.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) v -= q.dot(v) * q;
    }
    const double norm = v.norm();
    if (norm0 == 0.0 || norm <= std::max(rel_tol, 1e-9) * norm0) {
      report.dependent_columns.push_back(static_cast<std::size_t>(j));
    } else {
      basis.push_back(v / norm);
    }
  }
  return report;
}

DesignMatrices build_design(const AnalysisTable& table, const ModelSpec& spec,
                            const std::optional<FeatureScaling>& fixed_scaling) {
  if (table.rows.empty()) throw Error(ErrorKind::EmptyInput, "analysis table has no rows");
  const auto n = static_cast<Eigen::Index>(table.rows.size());

  FeatureScaling scaling;
  if (fixed_scaling) {
    scaling = *fixed_scaling;
  } else if (spec.standardize_features) {
    for (std::size_t k = 0; k < kScaledFeatures; ++k) {
      double mean = 0.0;
      for (const auto& r : table.rows) mean += feature_values(table.features_of(r))[k];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (const auto& r : table.rows) {
        const double d = feature_values(table.features_of(r))[k] - mean;
        ss += d * d;
      }
      const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      scaling.center[k] = mean;
      scaling.scale[k] = sd > 0.0 ? sd : 1.0;
    }
  }

  DesignMatrices d;
  d.spec = spec;
  d.scaling = scaling;
  d.column_names = design_column_names(spec.include_interactions);
  d.X.resize(n, static_cast<Eigen::Index>(d.column_names.size()));
  d.y.resize(n);
  d.groups.reserve(table.rows.size());
  std::unordered_map<std::size_t, std::size_t> relabel;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    d.X.row(i) = design_row(table.features_of(r), r.male, r.alone, r.night,
                            spec.include_interactions, scaling)
                     .transpose();
    d.y(i) = r.score;
    auto [it, inserted] = relabel.emplace(r.group, relabel.size());
    d.groups.push_back(it->second);
  }
  if (!all_finite(d.X) || !d.y.allFinite()) {
    throw Error(ErrorKind::NonFinite, "design contains non-finite values");
  }

  const auto report = analyze_rank(d.X);
  d.rank = report.rank;
  for (auto j : report.dependent_columns) d.rank_deficient_columns.push_back(d.column_names[j]);
  if (d.rank < d.column_names.size()) {
    d.warnings.push_back("RankDeficient: design rank " + std::to_string(d.rank) + " < " +
                         std::to_string(d.column_names.size()) +
                         " columns; collinear: " + join(d.rank_deficient_columns));
  }
  return d;
}

// ---------------------------------------------------------------------------

ProfiledDeviance::ProfiledDeviance(const DesignMatrices& design, FitMethod method,
                                   double rank_tolerance)
    : method_(method) {
  n_ = static_cast<std::size_t>(design.X.rows());
  p_ = static_cast<std::size_t>(design.X.cols());
  if (n_ == 0 || p_ == 0) throw Error(ErrorKind::EmptyInput, "empty design");
  if (static_cast<std::size_t>(design.y.size()) != n_ || design.groups.size() != n_) {
    throw Error(ErrorKind::ShapeMismatch, "X, y and groups disagree in length");
  }
  if (p_ > n_) {
    throw Error(ErrorKind::SingularNormalEquations,
                "more columns (" + std::to_string(p_) + ") than observations (" +
                    std::to_string(n_) + ")");
  }
  if (!all_finite(design.X) || !design.y.allFinite()) {
    throw Error(ErrorKind::NonFinite, "design contains non-finite values");
  }
  const CanonicalRows canon = canonicalize(design.X, design.y, design.groups);
  const auto& X = canon.X;
  const auto& y = canon.y;

  const auto n = static_cast<Eigen::Index>(n_);
  const auto p = static_cast<Eigen::Index>(p_);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  if (!(s(0) > 0.0)) throw Error(ErrorKind::SingularNormalEquations, "design matrix is zero");
  Eigen::Index r = 0;
  while (r < p && s(r) > rank_tolerance * s(0)) ++r;
  rank_ = static_cast<std::size_t>(r);

  const std::size_t df = method_ == FitMethod::REML ? n_ - rank_ : n_;
  if (df == 0) {
    throw Error(ErrorKind::SingularNormalEquations,
                "no residual degrees of freedom (n = " + std::to_string(n_) +
                    ", rank = " + std::to_string(rank_) + ")");
  }

  // basis = Q [U_r; 0], applied without forming the thin Q.
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, r);
  basis.topRows(p) = svd.matrixU().leftCols(r);
  basis.applyOnTheLeft(qr.householderQ());
  to_beta_ = svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal();
  log_sv_ = 2.0 * s.head(r).array().log().sum();

  ols_gamma_ = basis.transpose() * y;
  const Eigen::VectorXd resid = y - basis * ols_gamma_;

  std::size_t groups = 0;
  for (auto g : canon.groups) groups = std::max(groups, g + 1);
  const auto G = static_cast<Eigen::Index>(groups);
  sizes_ = Eigen::VectorXd::Zero(G);
  group_mean_basis_ = Eigen::MatrixXd::Zero(G, r);
  group_mean_resid_ = Eigen::VectorXd::Zero(G);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = static_cast<Eigen::Index>(canon.groups[static_cast<std::size_t>(i)]);
    sizes_(g) += 1.0;
    group_mean_basis_.row(g) += basis.row(i);
    group_mean_resid_(g) += resid(i);
  }
  // Unused group labels are dropped.
  std::vector<Eigen::Index> remap(static_cast<std::size_t>(G), -1);
  Eigen::Index kept = 0;
  for (Eigen::Index g = 0; g < G; ++g) {
    if (sizes_(g) == 0.0) continue;
    remap[static_cast<std::size_t>(g)] = kept;
    sizes_(kept) = sizes_(g);
    group_mean_basis_.row(kept) = group_mean_basis_.row(g) / sizes_(g);
    group_mean_resid_(kept) = group_mean_resid_(g) / sizes_(g);
    ++kept;
  }
  sizes_.conservativeResize(kept);
  group_mean_basis_.conservativeResize(kept, r);
  group_mean_resid_.conservativeResize(kept);

  Eigen::MatrixXd centered(n, r);
  within_ss_resid_ = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = remap[canon.groups[static_cast<std::size_t>(i)]];
    centered.row(i) = basis.row(i) - group_mean_basis_.row(g);
    const double d = resid(i) - group_mean_resid_(g);
    within_ss_resid_ += d * d;
  }
  within_cross_ = centered.transpose() * centered;
}

ProfiledDeviance::Evaluation ProfiledDeviance::evaluate(double theta) const {
  const Eigen::ArrayXd m = sizes_.array();
  const Eigen::ArrayXd lambda = 1.0 / (1.0 + theta * m);
  const Eigen::ArrayXd kappa = m * lambda;
  const Eigen::ArrayXd d_kappa = -(m * lambda).square();
  const Eigen::ArrayXd e_bar = group_mean_resid_.array();

  Eigen::MatrixXd M = within_cross_;
  M.noalias() += group_mean_basis_.transpose() * kappa.matrix().asDiagonal() * group_mean_basis_;
  const Eigen::VectorXd h =
      group_mean_basis_.transpose() * ((kappa - m) * e_bar).matrix();
  const double eVe = within_ss_resid_ + (kappa * e_bar.square()).sum();

  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NonFinite, "profiled normal equations not positive definite at theta=" +
                                          std::to_string(theta));
  }
  const Eigen::VectorXd delta = llt.solve(h);
  double q = eVe - h.dot(delta);
  q = std::max(q, std::numeric_limits<double>::min() * static_cast<double>(n_));

  const double df = method_ == FitMethod::REML ? static_cast<double>(n_ - rank_)
                                                : static_cast<double>(n_);
  const double log_det_v = (theta * m).log1p().sum();

  Evaluation out;
  out.sigma_e2 = q / df;
  out.beta = to_beta_ * (ols_gamma_ + delta);
  out.deviance = df * (1.0 + std::log(2.0 * std::numbers::pi * q / df)) + log_det_v;

  const Eigen::ArrayXd r_bar = e_bar - (group_mean_basis_ * delta).array();
  const double d_q = (d_kappa * r_bar.square()).sum();
  out.d_deviance = df * d_q / q + (m * lambda).sum();

  if (method_ == FitMethod::REML) {
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det_m = 2.0 * L.diagonal().array().log().sum();
    out.deviance += log_det_m + log_sv_;
    const Eigen::MatrixXd solved = llt.solve(group_mean_basis_.transpose());
    const Eigen::ArrayXd quad =
        (group_mean_basis_.transpose().array() * solved.array()).colwise().sum().transpose();
    out.d_deviance += (d_kappa * quad).sum();
  }
  if (!std::isfinite(out.deviance) || !out.beta.allFinite()) {
    throw Error(ErrorKind::NonFinite, "non-finite deviance at theta=" + std::to_string(theta));
  }
  return out;
}

// ---------------------------------------------------------------------------

double FitResult::coefficient(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return beta[i];
  }
  throw Error(ErrorKind::InvalidArgument, "no coefficient named '" + std::string(name) + "'");
}

FitResult fit_lmm(const DesignMatrices& design, FitMethod method, const FitOptions& options) {
  ProfiledDeviance profile(design, method, options.rank_tolerance);

  FitResult fit;
  fit.names = design.column_names;
  fit.method = method;
  fit.spec = design.spec;
  fit.spec.method = method;
  fit.scaling = design.scaling;
  fit.n_obs = profile.n_obs();
  fit.n_groups = profile.n_groups();
  fit.rank = profile.rank();
  fit.rank_deficient = profile.rank() < profile.n_columns();
  fit.warnings = design.warnings;

  if (fit.rank_deficient) {
    if (!options.allow_rank_deficient) {
      throw Error(ErrorKind::SingularNormalEquations,
                  "design rank " + std::to_string(fit.rank) + " < " +
                      std::to_string(profile.n_columns()) + " columns");
    }
    if (design.warnings.empty()) {
      fit.warnings.push_back("RankDeficient: design rank " + std::to_string(fit.rank) + " < " +
                             std::to_string(profile.n_columns()) + " columns");
    }
    fit.warnings.push_back("using minimum-norm (pseudo-inverse) coefficients");
  }

  double theta = 0.0;
  bool converged = true;
  if (profile.n_groups() < 2) {
    fit.warnings.push_back("fewer than two groups: random-intercept variance not identifiable, "
                           "theta fixed at 0");
  } else {
    const auto dev_at = [&](double log_theta) {
      try {
        return profile.deviance(std::exp(log_theta));
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    const double lo = options.log_theta_min;
    const double hi = options.log_theta_max;
    const int steps = std::max(2, static_cast<int>(std::ceil(hi - lo)));
    int best = 0;
    double best_dev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= steps; ++k) {
      const double d = dev_at(lo + (hi - lo) * k / steps);
      if (d < best_dev) {
        best_dev = d;
        best = k;
      }
    }
    if (!std::isfinite(best_dev)) {
      throw Error(ErrorKind::NonFinite, "profiled deviance is non-finite over the search range");
    }
    const double a = lo + (hi - lo) * std::max(0, best - 1) / steps;
    const double b = lo + (hi - lo) * std::min(steps, best + 1) / steps;
    auto min = brent_minimize(dev_at, a, b, options.log_theta_tolerance);
    converged = min.converged;

    // Polish on the analytic derivative for full double precision.
    const auto slope = [&](double log_theta) {
      const double t = std::exp(log_theta);
      return t * profile.evaluate(t).d_deviance;
    };
    if (min.x > a && min.x < b) {
      try {
        const double g_a = slope(a);
        const double g_b = slope(b);
        if (g_a < 0.0 && g_b > 0.0) {
          const double root = bracketed_root(slope, a, b, g_a, g_b);
          const double d_root = dev_at(root);
          if (d_root <= min.fx) {
            min.x = root;
            min.fx = d_root;
          }
        }
      } catch (const Error&) {
        // keep the Brent estimate
      }
    }
    theta = std::exp(min.x);
    const double dev_zero = profile.deviance(0.0);
    if (dev_zero <= min.fx + 1e-10 * std::max(1.0, std::abs(min.fx))) {
      theta = 0.0;
    } else if (hi - min.x < 1e-6) {
      converged = false;
      fit.warnings.push_back("theta at upper search bound; residual variance may be degenerate");
    }
  }

  const auto eval = profile.evaluate(theta);
  fit.theta = theta;
  fit.sigma_e2 = eval.sigma_e2;
  fit.sigma_u2 = theta * eval.sigma_e2;
  fit.criterion_value = -0.5 * eval.deviance;
  fit.beta.assign(eval.beta.data(), eval.beta.data() + eval.beta.size());
  fit.converged = converged;
  return fit;
}

double predict_fixed(const FitResult& fit, const LocationFeatures& features, int male, int alone,
                     int night) {
  const auto expected = design_column_names(fit.spec.include_interactions);
  if (fit.beta.size() != expected.size() || fit.names != expected) {
    throw Error(ErrorKind::ShapeMismatch, "fit coefficients do not match the model spec layout");
  }
  const Eigen::VectorXd x =
      design_row(features, male, alone, night, fit.spec.include_interactions, fit.scaling);
  return x.dot(Eigen::Map<const Eigen::VectorXd>(fit.beta.data(),
                                                 static_cast<Eigen::Index>(fit.beta.size())));
}

}  // namespace geosafety
