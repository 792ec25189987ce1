#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosafety/csv.hpp"
#include "geosafety/geo.hpp"
#include "geosafety/lmm.hpp"
#include "geosafety/spatial.hpp"
#include "geosafety/stats.hpp"

namespace geosafety {

struct SchoolRecord {
  std::string id;
  GeoPoint point;
  double observed_rate = 0.0;  // in [0, 1]
  std::vector<double> demographics;
};

struct SchoolTable {
  std::vector<std::string> demographic_columns;
  std::vector<SchoolRecord> schools;
};

/// schools.csv: `school_id,lat,lon,observed_rate,<demographics...>`. When
/// `demographic_columns` is given only those columns are read (each must be
/// present); otherwise every column after observed_rate is used.
SchoolTable read_schools(const CsvTable& table,
                         const std::optional<std::vector<std::string>>& demographic_columns = std::nullopt);

/// schools.csv text for a table (values in shortest round-trip form).
std::string schools_csv(const SchoolTable& table);

/// Circumstance under which school predictions are made.
struct Scenario {
  int male = 0;
  int alone = 0;
  int night = 0;

  /// Throws InvalidArgument unless each flag is 0/1 and alone, night are not both set.
  void validate() const;
  std::string describe() const;  // "male=0 alone=0 night=0"
};

std::vector<double> predict_schools(const FitResult& fit, std::span<const LocationFeatures> features,
                                    const Scenario& scenario = {});

/// Group sizes for n items in k groups: as equal as possible, larger first.
std::vector<std::size_t> group_sizes(std::size_t n, std::size_t k);

/// Partitions item indices into k contiguous groups after sorting ascending
/// by `rates` (ties by `ids`). Throws TooFewSchools when n < k.
std::vector<std::vector<std::size_t>> quintile_groups(std::span<const double> rates,
                                                      std::span<const std::string> ids,
                                                      std::size_t k = 5);

struct OlsResult {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::VectorXd fitted;
};

/// OLS of y on [1, demographics] via column-pivoted QR. Requires at least as
/// many rows as coefficients; throws SingularDesign when rank deficient or
/// underdetermined.
OlsResult ols_baseline(const Eigen::MatrixXd& demographics, const Eigen::VectorXd& y);

/// One boxplot panel: five-number summary of the plotted quantity per group.
struct ReportPanel {
  std::string name;
  std::string axis_label;
  std::vector<std::size_t> sizes;
  std::vector<FiveNumberSummary> groups;
};

/// Summarizes `values` over each group of indices.
ReportPanel summarize_panel(std::string name, std::string axis_label,
                            const std::vector<std::vector<std::size_t>>& groups,
                            std::span<const double> values);

/// `panel,quintile,n,min,q1,median,q3,max`; quintiles are numbered from 1.
std::string report_csv(std::span<const ReportPanel> panels, const std::string& header_comment = {});
/// Inverse of report_csv (axis labels are not stored and come back empty).
std::vector<ReportPanel> parse_report_csv(const CsvTable& table);

/// Self-contained SVG with one boxplot panel per entry, side by side, each
/// with its own y-axis. `comment` lines are embedded as an XML comment.
std::string report_svg(std::span<const ReportPanel> panels, const std::vector<std::string>& comment = {});

}  // namespace geosafety
