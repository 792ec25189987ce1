#include <doctest.h>

#include <fstream>
#include <sstream>

#include "geosafety/error.hpp"
#include "geosafety/report.hpp"
#include "geosafety/rng.hpp"
#include "test_util.hpp"

using namespace geosafety;

namespace {

CsvTable csv(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in, "schools.csv");
}

std::vector<ReportPanel> golden_panels() {
  ReportPanel left{"Predicted safety score", "Predicted safety (1-10)", {5, 5, 5, 4, 4}, {}};
  ReportPanel right{"Demographic baseline", "Predicted rate of rape", {5, 5, 5, 4, 4}, {}};
  for (int g = 0; g < 5; ++g) {
    const double m = 7.0 - 0.6 * g;
    left.groups.push_back({m - 1.1, m - 0.4, m, m + 0.3, m + 0.9});
    const double r = 0.05 + 0.01 * g;
    right.groups.push_back({r - 0.02, r - 0.01, r, r + 0.005, r + 0.03});
  }
  return {left, right};
}

}  // namespace

TEST_CASE("read_schools") {
  const auto t = read_schools(csv("school_id,lat,lon,observed_rate,enrollment,dropout\n"
                                  "S1,-1.31,36.79,0.1,300,0.2\nS2,-1.32,36.8,0.05,150,0.1\n"));
  CHECK(t.demographic_columns == std::vector<std::string>{"enrollment", "dropout"});
  REQUIRE(t.schools.size() == 2);
  CHECK(t.schools[1].demographics == std::vector<double>{150, 0.1});
  const auto sel = read_schools(csv("school_id,lat,lon,observed_rate,a,b\nS1,0,0,0.1,1,2\n"),
                                std::vector<std::string>{"b"});
  CHECK(sel.schools[0].demographics == std::vector<double>{2});
  CHECK_THROWS_AS(read_schools(csv("school_id,lat,lon,observed_rate\nS1,0,0,1.5\n")), Error);
  CHECK_THROWS_AS(read_schools(csv("school_id,lat,lon,observed_rate\nS1,0,0,x\n")), Error);
  CHECK_THROWS_AS(read_schools(csv("school_id,lat,lon,observed_rate\nS1,0,0,0.1\nS1,0,0,0.1\n")), Error);
  CHECK_THROWS_AS(read_schools(csv("school_id,lat,lon,observed_rate,a\nS1,0,0,0.1,1\n"),
                               std::vector<std::string>{"c"}),
                  Error);
}

TEST_CASE("predict_schools") {
  FitResult fit;
  fit.names = design_column_names(false);
  fit.beta = {6.0, 0.1, -2.3, -2.1, 0.3, -0.4, -0.2, 0.15, -0.25, -1.0};
  const std::vector<LocationFeatures> f{{1, 2, 3, 4, 5, 0}, {1, 2, 3, 4, 5, 0}, {0, 0, 0, 0, 0, 1}};
  const auto base = predict_schools(fit, f);
  CHECK(base[0] == base[1]);
  CHECK(base[2] == doctest::Approx(5.0));
  CHECK(base[0] == doctest::Approx(6.0 + 0.3 - 0.8 - 0.6 + 0.6 - 1.25));
  const auto alone = predict_schools(fit, f, {0, 1, 0});
  const auto night = predict_schools(fit, f, {0, 0, 1});
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(alone[i] - base[i] == doctest::Approx(-2.3));
    CHECK(night[i] - base[i] == doctest::Approx(-2.1));
  }
  CHECK_THROWS_AS(predict_schools(fit, f, {0, 1, 1}), Error);
  CHECK_THROWS_AS(predict_schools(fit, f, {2, 0, 0}), Error);
  CHECK(Scenario{1, 0, 1}.describe() == "male=1 alone=0 night=1");
}

TEST_CASE("predict_schools matches the hand-computed dot product") {
  Rng rng(10);
  FitResult fit;
  fit.names = design_column_names(false);
  for (int j = 0; j < 10; ++j) fit.beta.push_back(rng.normal());
  std::vector<LocationFeatures> f;
  for (int s = 0; s < 23; ++s) {
    f.push_back({static_cast<int>(rng.uniform_index(9)), static_cast<int>(rng.uniform_index(9)),
                 static_cast<int>(rng.uniform_index(9)), static_cast<int>(rng.uniform_index(9)),
                 static_cast<int>(rng.uniform_index(9)), static_cast<int>(rng.uniform_index(2))});
  }
  const auto pred = predict_schools(fit, f, {1, 0, 0});
  for (std::size_t s = 0; s < f.size(); ++s) {
    const auto v = feature_values(f[s]);
    double dot = fit.beta[0] + fit.beta[1];
    for (int k = 0; k < 6; ++k) dot += fit.beta[static_cast<std::size_t>(4 + k)] * v[static_cast<std::size_t>(k)];
    CHECK(std::abs(pred[s] - dot) < 1e-10);
  }
}

TEST_CASE("quintile_groups") {
  CHECK(group_sizes(23, 5) == std::vector<std::size_t>{5, 5, 5, 4, 4});
  CHECK(group_sizes(10, 5) == std::vector<std::size_t>{2, 2, 2, 2, 2});
  Rng rng(6);
  for (std::size_t n : {5u, 7u, 23u, 24u, 99u}) {
    std::vector<double> rates;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      rates.push_back(static_cast<double>(rng.uniform_index(6)) / 10.0);
      ids.push_back("S" + std::to_string(1000 - i));
    }
    const auto groups = quintile_groups(rates, ids);
    std::vector<int> seen(n, 0);
    std::size_t prev_size = n;
    double prev_max = -1.0;
    for (const auto& g : groups) {
      CHECK(g.size() <= prev_size);
      CHECK(prev_size - g.size() <= 1 + (prev_size == n ? n : 0));
      prev_size = g.size();
      for (auto i : g) {
        ++seen[i];
        CHECK(rates[i] >= prev_max);
      }
      for (auto i : g) prev_max = std::max(prev_max, rates[i]);
    }
    for (int s : seen) CHECK(s == 1);
  }
  // Ties are broken by school id.
  const std::vector<double> tied{0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  const std::vector<std::string> ids{"f", "b", "e", "a", "d", "c"};
  const auto g = quintile_groups(tied, ids);
  CHECK(g[0] == std::vector<std::size_t>{3, 1});
  CHECK(g[1] == std::vector<std::size_t>{5});
  CHECK(g == quintile_groups(tied, ids));
  try {
    quintile_groups(std::vector<double>{0.1, 0.2}, std::vector<std::string>{"a", "b"});
    FAIL("expected TooFewSchools");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewSchools);
  }
}

TEST_CASE("ols_baseline") {
  // Two schools, one column: the line through both points.
  Eigen::MatrixXd x2(2, 1);
  x2 << 1.0, 3.0;
  const Eigen::Vector2d y2(0.1, 0.5);
  const auto line = ols_baseline(x2, y2);
  CHECK(line.coefficients(1) == doctest::Approx(0.2));
  CHECK((line.fitted - y2).cwiseAbs().maxCoeff() < 1e-12);
  // Constant-only design predicts the mean.
  const Eigen::VectorXd y3 = Eigen::Vector3d(0.1, 0.2, 0.6);
  const auto mean = ols_baseline(Eigen::MatrixXd(3, 0), y3);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(mean.fitted(i) == doctest::Approx(0.3));
  // Random 23x4 design against the normal equations; residuals orthogonal.
  Rng rng(13);
  Eigen::MatrixXd D(23, 4);
  Eigen::VectorXd y(23);
  for (Eigen::Index i = 0; i < 23; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) D(i, j) = rng.normal() * (j + 1);
    y(i) = 0.1 + 0.05 * rng.normal();
  }
  const auto fit = ols_baseline(D, y);
  Eigen::MatrixXd X(23, 5);
  X << Eigen::VectorXd::Ones(23), D;
  const Eigen::VectorXd normal = (X.transpose() * X).inverse() * X.transpose() * y;
  CHECK((fit.coefficients - normal).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((X.transpose() * (y - fit.fitted)).cwiseAbs().maxCoeff() < 1e-8);
  // Singular designs.
  Eigen::MatrixXd dup(5, 2);
  dup << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  CHECK_THROWS_AS(ols_baseline(dup, Eigen::VectorXd::Ones(5)), Error);
  CHECK_THROWS_AS(ols_baseline(Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Ones(2)), Error);
}

TEST_CASE("report CSV round-trips and keeps monotone medians") {
  const auto panels = golden_panels();
  const auto text = report_csv(panels, "# scenario: male=0 alone=0 night=0\n");
  std::istringstream in(text);
  const auto back = parse_report_csv(read_csv(in, "report.csv"));
  REQUIRE(back.size() == 2);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(back[p].name == panels[p].name);
    CHECK(back[p].sizes == panels[p].sizes);
    CHECK(back[p].groups == panels[p].groups);
  }
  for (std::size_t g = 1; g < 5; ++g) CHECK(back[0].groups[g].median < back[0].groups[g - 1].median);
}

TEST_CASE("degenerate single-value box") {
  const std::vector<double> v{4.2};
  const auto panel = summarize_panel("P", "y", {{0}}, v);
  CHECK(panel.groups[0] == FiveNumberSummary{4.2, 4.2, 4.2, 4.2, 4.2});
  const auto csv_text = report_csv(std::vector<ReportPanel>{panel});
  CHECK(csv_text.find("P,1,1,4.2,4.2,4.2,4.2,4.2\n") != std::string::npos);
  const auto svg = report_svg(std::vector<ReportPanel>{panel});
  CHECK(svg.find("height=\"0.00\"") != std::string::npos);
}

TEST_CASE("SVG matches the golden file") {
  const auto svg = report_svg(golden_panels(), {"scenario: male=0 alone=0 night=0"});
  CHECK(svg == report_svg(golden_panels(), {"scenario: male=0 alone=0 night=0"}));
  std::ifstream in(testutil::source_path("tests/golden/report.svg"), std::ios::binary);
  REQUIRE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  CHECK(svg == golden.str());
}
