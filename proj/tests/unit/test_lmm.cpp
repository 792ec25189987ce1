#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "geosafety/error.hpp"
#include "geosafety/lmm.hpp"
#include "geosafety/model_io.hpp"
#include "geosafety/rng.hpp"
#include "geosafety/simulate.hpp"
#include "test_util.hpp"

using namespace geosafety;

namespace {

DesignMatrices random_design(Rng& rng, int groups, int per_group, int p, double sigma_u,
                             double sigma_e, bool unbalanced = false) {
  std::vector<long long> g;
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int k = 0; k < groups; ++k) {
    const double u = sigma_u * rng.normal();
    const int m = unbalanced ? 1 + static_cast<int>(rng.uniform_index(per_group)) : per_group;
    for (int i = 0; i < m; ++i) {
      std::vector<double> x{1.0};
      for (int j = 1; j < p; ++j) x.push_back(rng.normal());
      double mean = 0.0;
      for (int j = 0; j < p; ++j) mean += x[static_cast<std::size_t>(j)] * (j + 1) * 0.5;
      y.push_back(mean + u + sigma_e * rng.normal());
      rows.push_back(x);
      g.push_back(k * 7 + 3);  // arbitrary labels
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < p; ++j) X(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  return DesignMatrices::from_arrays(X, Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
                                     g, names);
}

Eigen::MatrixXd dense_v(const DesignMatrices& d, double theta) {
  const auto n = d.X.rows();
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d.groups[static_cast<std::size_t>(i)] == d.groups[static_cast<std::size_t>(j)]) V(i, j) += theta;
    }
  }
  return V;
}

struct DenseEval {
  double deviance;
  Eigen::VectorXd beta;
  double sigma_e2;
};

DenseEval dense_reml(const DesignMatrices& d, double theta, bool reml = true) {
  const Eigen::MatrixXd V = dense_v(d, theta);
  const Eigen::MatrixXd Vinv = V.inverse();
  const Eigen::MatrixXd A = d.X.transpose() * Vinv * d.X;
  const Eigen::VectorXd beta = A.ldlt().solve(d.X.transpose() * Vinv * d.y);
  const Eigen::VectorXd r = d.y - d.X * beta;
  const double q = r.dot(Vinv * r);
  const double n = static_cast<double>(d.X.rows());
  const double df = reml ? n - static_cast<double>(d.X.cols()) : n;
  double dev = df * (1.0 + std::log(2.0 * std::numbers::pi * q / df)) + std::log(V.determinant());
  if (reml) dev += std::log(A.determinant());
  return {dev, beta, q / df};
}

AnalysisTable small_table(Rng& rng, int participants, int locations) {
  StudySpec spec;
  spec.n_participants = static_cast<std::size_t>(participants);
  spec.n_locations = static_cast<std::size_t>(locations);
  spec.seed = rng.next();
  return simulate_study(spec).table;
}

}  // namespace

TEST_CASE("design column layout") {
  const auto main = design_column_names(false);
  const auto inter = design_column_names(true);
  CHECK(main.size() == 10);
  CHECK(inter.size() == 18);
  CHECK(main == std::vector<std::string>{"intercept", "male", "alone", "night", "lights_150m",
                                         "bars_400m", "bus_stops_400m", "water_sources_400m",
                                         "religious_400m", "river_within_50m"});
  CHECK(inter[10] == "male:alone");
  CHECK(inter[11] == "male:night");
  CHECK(inter[17] == "male:river_within_50m");
  const auto row = design_row(LocationFeatures{1, 2, 3, 4, 5, 1}, 1, 0, 1, true);
  CHECK(row.size() == 18);
  CHECK(row(3) == 1.0);
  CHECK(row(11) == 1.0);
  CHECK(row(10) == 0.0);
  CHECK(row(13) == 2.0);
  CHECK(design_row(LocationFeatures{1, 2, 3, 4, 5, 1}, 0, 0, 1, true).tail(8).isZero());
}

TEST_CASE("build_design: rank deficiency warning names collinear columns") {
  Rng rng(4);
  auto table = small_table(rng, 6, 1);
  const auto d = build_design(table, {});
  CHECK(d.X.cols() == 10);
  CHECK(d.rank == 4);
  REQUIRE(!d.warnings.empty());
  CHECK(d.warnings[0].rfind("RankDeficient", 0) == 0);
  CHECK(d.rank_deficient_columns.size() == 6);
  CHECK(d.rank_deficient_columns[0] == "lights_150m");
  CHECK_THROWS_AS(build_design(AnalysisTable{}, {}), Error);
}

TEST_CASE("Woodbury closed form matches dense inverse") {
  for (int m : {1, 2, 5, 9}) {
    for (double theta : {0.0, 0.3, 4.0, 1e3}) {
      const Eigen::MatrixXd J = Eigen::MatrixXd::Ones(m, m);
      const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(m, m) + theta * J;
      const Eigen::MatrixXd closed =
          Eigen::MatrixXd::Identity(m, m) - (theta / (1.0 + theta * m)) * J;
      CHECK((V.inverse() - closed).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(std::abs(std::log(V.determinant()) - std::log1p(theta * m)) < 1e-10);
    }
  }
}

TEST_CASE("profiled deviance matches dense REML/ML computation") {
  Rng rng(99);
  for (int inst = 0; inst < 20; ++inst) {
    const auto d = random_design(rng, 8, 6, 3, 1.0, 1.0, true);
    if (d.X.rows() > 50 || d.X.rows() <= 3) continue;
    for (auto method : {FitMethod::REML, FitMethod::ML}) {
      const ProfiledDeviance prof(d, method);
      for (double theta : {0.0, 0.05, 0.7, 3.0, 40.0}) {
        const auto e = prof.evaluate(theta);
        const auto ref = dense_reml(d, theta, method == FitMethod::REML);
        CHECK(e.deviance == doctest::Approx(ref.deviance).epsilon(1e-10));
        CHECK((e.beta - ref.beta).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(e.sigma_e2 == doctest::Approx(ref.sigma_e2).epsilon(1e-10));
        // GLS consistency: X' V^-1 (y - X beta) = 0.
        const Eigen::VectorXd score =
            d.X.transpose() * dense_v(d, theta).inverse() * (d.y - d.X * e.beta);
        CHECK(score.cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + d.y.cwiseAbs().maxCoeff()));
        // Analytic derivative against central differences.
        const double h = 1e-6 * std::max(theta, 1e-3);
        if (theta > 0.0) {
          const double fd = (prof.deviance(theta + h) - prof.deviance(theta - h)) / (2 * h);
          CHECK(e.d_deviance == doctest::Approx(fd).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("REML equals ANOVA estimators on balanced one-way layouts") {
  int interior = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed, 77);
    const int G = 20;
    const int m = 6;
    std::vector<long long> g;
    std::vector<double> y;
    for (int k = 0; k < G; ++k) {
      const double u = 0.8 * rng.normal();
      for (int i = 0; i < m; ++i) {
        y.push_back(5.0 + u + rng.normal());
        g.push_back(k);
      }
    }
    const auto n = static_cast<Eigen::Index>(y.size());
    const auto d = DesignMatrices::from_arrays(Eigen::MatrixXd::Ones(n, 1),
                                               Eigen::Map<Eigen::VectorXd>(y.data(), n), g, {"intercept"});
    const double grand = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ssb = 0.0;
    double ssw = 0.0;
    for (int k = 0; k < G; ++k) {
      double mean = 0.0;
      for (int i = 0; i < m; ++i) mean += y[static_cast<std::size_t>(k * m + i)];
      mean /= m;
      ssb += m * (mean - grand) * (mean - grand);
      for (int i = 0; i < m; ++i) {
        const double r = y[static_cast<std::size_t>(k * m + i)] - mean;
        ssw += r * r;
      }
    }
    const double msb = ssb / (G - 1);
    const double msw = ssw / (G * (m - 1));
    const auto fit = fit_lmm(d, FitMethod::REML);
    CHECK(fit.converged);
    if (msb > msw) {
      ++interior;
      CHECK(fit.sigma_e2 == doctest::Approx(msw).epsilon(1e-6));
      CHECK(fit.sigma_u2 == doctest::Approx((msb - msw) / m).epsilon(1e-6));
    } else {
      CHECK(fit.theta == 0.0);
      CHECK(fit.sigma_e2 == doctest::Approx((ssb + ssw) / (n - 1)).epsilon(1e-6));
    }
    CHECK(fit.beta[0] == doctest::Approx(grand).epsilon(1e-10));
  }
  CHECK(interior > 40);
}

TEST_CASE("gradient vanishes at interior optimum") {
  Rng rng(5);
  for (int inst = 0; inst < 10; ++inst) {
    const auto d = random_design(rng, 25, 5, 4, 1.0, 1.0, true);
    const auto fit = fit_lmm(d, FitMethod::REML);
    if (fit.theta == 0.0) continue;
    const ProfiledDeviance prof(d, FitMethod::REML);
    const double lt = std::log(fit.theta);
    const double h = 1e-5;
    const double grad = (prof.deviance(std::exp(lt + h)) - prof.deviance(std::exp(lt - h))) / (2 * h);
    CHECK(std::abs(grad) <= 1e-4);
    CHECK(fit.criterion_value == doctest::Approx(-0.5 * prof.deviance(fit.theta)));
    // No better value on a coarse scan.
    for (double t = -6; t <= 6; t += 0.5) CHECK(prof.deviance(std::exp(t)) >= -2 * fit.criterion_value - 1e-9);
  }
}

TEST_CASE("OLS limit: data orthogonal to group structure gives theta = 0 and OLS beta") {
  Rng rng(8);
  for (int inst = 0; inst < 10; ++inst) {
    auto d = random_design(rng, 12, 5, 3, 0.0, 1.0);
    const Eigen::VectorXd mean = d.X * Eigen::Vector3d(1.0, -2.0, 0.5);
    Eigen::MatrixXd XZ(d.X.rows(), d.X.cols() + 12);
    XZ << d.X, Eigen::MatrixXd::Zero(d.X.rows(), 12);
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) XZ(i, d.X.cols() + static_cast<Eigen::Index>(d.groups[static_cast<std::size_t>(i)])) = 1.0;
    Eigen::VectorXd noise(d.X.rows());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
    const Eigen::VectorXd proj = XZ * XZ.completeOrthogonalDecomposition().solve(noise);
    d.y = mean + (noise - proj);
    const auto fit = fit_lmm(d, FitMethod::REML);
    CHECK(fit.theta <= 1e-6);
    const Eigen::VectorXd ols = d.X.colPivHouseholderQr().solve(d.y);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.beta[static_cast<std::size_t>(j)] - ols(j)) < 1e-8);
  }
}

TEST_CASE("permutation invariance") {
  Rng rng(21);
  const auto d = random_design(rng, 15, 6, 4, 1.2, 0.7, true);
  const auto base = fit_lmm(d, FitMethod::REML);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(d.X.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  Eigen::MatrixXd X(d.X.rows(), d.X.cols());
  Eigen::VectorXd y(d.y.size());
  std::vector<long long> g;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = d.X.row(perm[i]);
    y(static_cast<Eigen::Index>(i)) = d.y(perm[i]);
    g.push_back(static_cast<long long>(d.groups[static_cast<std::size_t>(perm[i])]) * 13 + 1);
  }
  const auto fit = fit_lmm(DesignMatrices::from_arrays(X, y, g, d.column_names), FitMethod::REML);
  for (std::size_t j = 0; j < base.beta.size(); ++j) CHECK(std::abs(fit.beta[j] - base.beta[j]) < 1e-10);
  CHECK(std::abs(fit.sigma_u2 - base.sigma_u2) < 1e-10);
  CHECK(std::abs(fit.sigma_e2 - base.sigma_e2) < 1e-10);
}

TEST_CASE("single group fixes theta at zero with a warning") {
  Rng rng(2);
  const auto d = random_design(rng, 1, 10, 2, 1.0, 1.0);
  const auto fit = fit_lmm(d, FitMethod::REML);
  CHECK(fit.theta == 0.0);
  CHECK(fit.sigma_u2 == 0.0);
  bool warned = false;
  for (const auto& w : fit.warnings) warned = warned || w.find("fewer than two groups") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("ML and REML differ in the expected direction") {
  Rng rng(31);
  const auto d = random_design(rng, 10, 4, 3, 1.0, 1.0);
  const auto reml = fit_lmm(d, FitMethod::REML);
  const auto ml = fit_lmm(d, FitMethod::ML);
  CHECK(ml.method == FitMethod::ML);
  CHECK(ml.sigma_e2 + ml.sigma_u2 < reml.sigma_e2 + reml.sigma_u2);
  CHECK(parse_fit_method("reml") == FitMethod::REML);
  CHECK(parse_fit_method("ML") == FitMethod::ML);
  CHECK_THROWS_AS(parse_fit_method("bayes"), Error);
}

TEST_CASE("rank deficient designs") {
  Rng rng(12);
  auto table = small_table(rng, 8, 1);
  const auto d = build_design(table, {});
  const auto fit = fit_lmm(d);
  CHECK(fit.rank_deficient);
  CHECK(fit.rank == 4);
  for (double b : fit.beta) CHECK(std::isfinite(b));
  FitOptions strict;
  strict.allow_rank_deficient = false;
  try {
    fit_lmm(d, strict);
    FAIL("expected SingularNormalEquations");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularNormalEquations);
  }
  // Minimum-norm solution: orthogonal to the null space of X.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d.X, Eigen::ComputeFullV);
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(fit.beta.data(), 10);
  const Eigen::MatrixXd null = svd.matrixV().rightCols(10 - 4);
  CHECK((null.transpose() * beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("standardization changes coefficients but not predictions") {
  Rng rng(17);
  const auto table = small_table(rng, 30, 12);
  ModelSpec raw;
  ModelSpec std_spec;
  std_spec.standardize_features = true;
  for (bool inter : {false, true}) {
    raw.include_interactions = inter;
    std_spec.include_interactions = inter;
    const auto a = fit_lmm(build_design(table, raw));
    const auto b = fit_lmm(build_design(table, std_spec));
    CHECK(b.scaling.scale[1] != 1.0);
    CHECK(b.scaling.scale[5] == 1.0);
    CHECK(b.scaling.center[5] == 0.0);
    CHECK(a.beta[5] != doctest::Approx(b.beta[5]));
    for (int k = 0; k < 20; ++k) {
      const LocationFeatures f{static_cast<int>(rng.uniform_index(8)), static_cast<int>(rng.uniform_index(8)),
                               static_cast<int>(rng.uniform_index(5)), static_cast<int>(rng.uniform_index(6)),
                               static_cast<int>(rng.uniform_index(5)), static_cast<int>(rng.uniform_index(2))};
      const int male = static_cast<int>(rng.uniform_index(2));
      const int q = static_cast<int>(rng.uniform_index(3));
      CHECK(std::abs(predict_fixed(a, f, male, q == 1, q == 2) - predict_fixed(b, f, male, q == 1, q == 2)) < 1e-8);
    }
  }
}

TEST_CASE("predict_fixed") {
  FitResult fit;
  fit.names = design_column_names(false);
  fit.beta = {3.5, 0.08, -2.29, -2.12, -5.63, 8.81, -15.15, 1.21, -1.99, -19.27};
  CHECK(predict_fixed(fit, LocationFeatures{}, 0, 0, 0) == 3.5);
  const LocationFeatures f{2, 4, 1, 3, 2, 1};
  CHECK(predict_fixed(fit, f, 1, 1, 0) - predict_fixed(fit, f, 1, 0, 0) == doctest::Approx(-2.29));
  CHECK(predict_fixed(fit, f, 0, 0, 1) - predict_fixed(fit, f, 0, 0, 0) == doctest::Approx(-2.12));
  fit.spec.include_interactions = true;
  CHECK_THROWS_AS(predict_fixed(fit, f, 0, 0, 0), Error);
}

TEST_CASE("model.json round-trips losslessly") {
  Rng rng(40);
  const auto table = small_table(rng, 12, 8);
  ModelSpec spec;
  spec.include_interactions = true;
  spec.standardize_features = true;
  const auto fit = fit_lmm(build_design(table, spec));
  const auto text = dump_model(fit, {{"seed", 1}});
  const auto back = model_from_json(nlohmann::ordered_json::parse(text));
  CHECK(back.names == fit.names);
  CHECK(back.beta == fit.beta);
  CHECK(back.sigma_u2 == fit.sigma_u2);
  CHECK(back.sigma_e2 == fit.sigma_e2);
  CHECK(back.criterion_value == fit.criterion_value);
  CHECK(back.scaling == fit.scaling);
  CHECK(back.spec == fit.spec);
  CHECK(dump_model(back, {{"seed", 1}}) == text);
  auto broken = nlohmann::ordered_json::parse(text);
  broken.erase("sigma_e2");
  CHECK_THROWS_AS(model_from_json(broken), Error);
  broken = nlohmann::ordered_json::parse(text);
  broken["coefficients"][0]["estimate"] = "x";
  try {
    model_from_json(broken);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaError);
  }
}

TEST_CASE("published main-effects model file") {
  const auto fit = load_model(testutil::source_path("data/published/main_effects_model.json"));
  const LocationFeatures f{3, 5, 2, 1, 4, 0};
  CHECK(predict_fixed(fit, f, 0, 1, 0) - predict_fixed(fit, f, 0, 0, 0) == doctest::Approx(-2.29).epsilon(1e-12));
  CHECK(predict_fixed(fit, f, 0, 0, 1) - predict_fixed(fit, f, 0, 0, 0) == doctest::Approx(-2.12).epsilon(1e-12));
  CHECK(fit.coefficient("bus_stops_400m") == -15.15);
}
