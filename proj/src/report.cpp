#include "geosafety/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "geosafety/error.hpp"

namespace geosafety {

std::string schools_csv(const SchoolTable& table) {
  std::string out = "school_id,lat,lon,observed_rate";
  for (const auto& c : table.demographic_columns) out += "," + csv_escape(c);
  out += "\n";
  for (const auto& s : table.schools) {
    if (s.demographics.size() != table.demographic_columns.size()) {
      throw Error(ErrorKind::ShapeMismatch, "school '" + s.id + "' has the wrong number of demographics");
    }
    out += csv_escape(s.id) + "," + format_double(s.point.lat()) + "," + format_double(s.point.lon()) + "," +
           format_double(s.observed_rate);
    for (double v : s.demographics) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

SchoolTable read_schools(const CsvTable& table,
                         const std::optional<std::vector<std::string>>& demographic_columns) {
  table.require_header_prefix({"school_id", "lat", "lon", "observed_rate"});
  table.require_uniform_arity();
  SchoolTable out;
  std::vector<std::size_t> demo_index;
  if (demographic_columns) {
    for (const auto& name : *demographic_columns) {
      const auto idx = table.column(name);
      if (!idx || *idx < 4) {
        throw Error(ErrorKind::SchemaError,
                    table.source + ": demographic column '" + name + "' not found");
      }
      demo_index.push_back(*idx);
      out.demographic_columns.push_back(name);
    }
  } else {
    for (std::size_t j = 4; j < table.header.size(); ++j) {
      demo_index.push_back(j);
      out.demographic_columns.push_back(table.header[j]);
    }
  }
  for (const auto& row : table.rows) {
    SchoolRecord rec;
    rec.id = row.fields[0];
    if (rec.id.empty()) table.fail(row, "empty school_id");
    for (const auto& other : out.schools) {
      if (other.id == rec.id) table.fail(row, "duplicate school_id '" + rec.id + "'");
    }
    double lat = 0.0;
    double lon = 0.0;
    try {
      lat = parse_double_field(row.fields[1], "lat");
      lon = parse_double_field(row.fields[2], "lon");
      rec.point = GeoPoint(lat, lon);
      rec.observed_rate = parse_double_field(row.fields[3], "observed_rate");
      for (auto j : demo_index) {
        const double v = parse_double_field(row.fields[j], table.header[j]);
        if (!std::isfinite(v)) throw Error(ErrorKind::SchemaError, table.header[j] + " is not finite");
        rec.demographics.push_back(v);
      }
    } catch (const Error& e) {
      table.fail(row, e.what());
    }
    if (!(rec.observed_rate >= 0.0 && rec.observed_rate <= 1.0)) {
      throw Error(ErrorKind::RangeError, table.source + ":" + std::to_string(row.line) +
                                             ": observed_rate must lie in [0, 1]");
    }
    out.schools.push_back(std::move(rec));
  }
  return out;
}

void Scenario::validate() const {
  for (int flag : {male, alone, night}) {
    if (flag != 0 && flag != 1) throw Error(ErrorKind::InvalidArgument, "scenario flags must be 0 or 1");
  }
  if (alone == 1 && night == 1) {
    throw Error(ErrorKind::InvalidArgument, "scenario cannot set both alone and night");
  }
}

std::string Scenario::describe() const {
  return "male=" + std::to_string(male) + " alone=" + std::to_string(alone) +
         " night=" + std::to_string(night);
}

std::vector<double> predict_schools(const FitResult& fit, std::span<const LocationFeatures> features,
                                    const Scenario& scenario) {
  scenario.validate();
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    out.push_back(predict_fixed(fit, f, scenario.male, scenario.alone, scenario.night));
  }
  return out;
}

std::vector<std::size_t> group_sizes(std::size_t n, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "number of groups must be >= 1");
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t g = 0; g < n % k; ++g) ++sizes[g];
  return sizes;
}

std::vector<std::vector<std::size_t>> quintile_groups(std::span<const double> rates,
                                                      std::span<const std::string> ids,
                                                      std::size_t k) {
  if (rates.size() != ids.size()) throw Error(ErrorKind::ShapeMismatch, "rates and ids differ in length");
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "number of groups must be >= 1");
  if (rates.size() < k) {
    throw Error(ErrorKind::TooFewSchools, std::to_string(rates.size()) + " schools for " +
                                              std::to_string(k) + " groups");
  }
  std::vector<std::size_t> order(rates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rates[a] != rates[b]) return rates[a] < rates[b];
    return ids[a] < ids[b];
  });
  std::vector<std::vector<std::size_t>> groups;
  std::size_t pos = 0;
  for (auto size : group_sizes(rates.size(), k)) {
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return groups;
}

OlsResult ols_baseline(const Eigen::MatrixXd& demographics, const Eigen::VectorXd& y) {
  const auto n = demographics.rows();
  if (y.size() != n) throw Error(ErrorKind::ShapeMismatch, "demographics and rates differ in length");
  const auto p = demographics.cols() + 1;
  if (n < p) {
    throw Error(ErrorKind::SingularDesign, std::to_string(n) + " schools cannot identify " +
                                               std::to_string(p) + " coefficients");
  }
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  X.rightCols(p - 1) = demographics;
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorKind::NonFinite, "non-finite baseline input");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    throw Error(ErrorKind::SingularDesign, "baseline design has rank " + std::to_string(qr.rank()) +
                                               " < " + std::to_string(p));
  }
  OlsResult out;
  out.coefficients = qr.solve(y);
  out.fitted = X * out.coefficients;
  return out;
}

ReportPanel summarize_panel(std::string name, std::string axis_label,
                            const std::vector<std::vector<std::size_t>>& groups,
                            std::span<const double> values) {
  ReportPanel panel;
  panel.name = std::move(name);
  panel.axis_label = std::move(axis_label);
  for (const auto& members : groups) {
    std::vector<double> v;
    v.reserve(members.size());
    for (auto i : members) {
      if (i >= values.size()) throw Error(ErrorKind::ShapeMismatch, "group index out of range");
      v.push_back(values[i]);
    }
    panel.sizes.push_back(members.size());
    panel.groups.push_back(five_number_summary(v));
  }
  return panel;
}

std::string report_csv(std::span<const ReportPanel> panels, const std::string& header_comment) {
  std::ostringstream out;
  out << header_comment;
  out << "panel,quintile,n,min,q1,median,q3,max\n";
  for (const auto& panel : panels) {
    for (std::size_t g = 0; g < panel.groups.size(); ++g) {
      const auto& s = panel.groups[g];
      out << csv_escape(panel.name) << ',' << (g + 1) << ',' << panel.sizes[g] << ','
          << format_double(s.min) << ',' << format_double(s.q1) << ',' << format_double(s.median)
          << ',' << format_double(s.q3) << ',' << format_double(s.max) << '\n';
    }
  }
  return out.str();
}

std::vector<ReportPanel> parse_report_csv(const CsvTable& table) {
  table.require_header_prefix({"panel", "quintile", "n", "min", "q1", "median", "q3", "max"});
  table.require_uniform_arity();
  std::vector<ReportPanel> panels;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    if (panels.empty() || panels.back().name != f[0]) {
      panels.push_back(ReportPanel{f[0], {}, {}, {}});
    }
    auto& panel = panels.back();
    long long quintile = 0;
    long long n = 0;
    FiveNumberSummary summary;
    try {
      quintile = parse_int_field(f[1], "quintile");
      n = parse_int_field(f[2], "n");
      summary = {parse_double_field(f[3], "min"), parse_double_field(f[4], "q1"),
                 parse_double_field(f[5], "median"), parse_double_field(f[6], "q3"),
                 parse_double_field(f[7], "max")};
    } catch (const Error& e) {
      table.fail(row, e.what());
    }
    if (quintile != static_cast<long long>(panel.groups.size()) + 1) {
      table.fail(row, "quintiles must be numbered consecutively from 1");
    }
    if (n < 1) table.fail(row, "n must be positive");
    panel.sizes.push_back(static_cast<std::size_t>(n));
    panel.groups.push_back(summary);
  }
  return panels;
}

// ---------------------------------------------------------------------------
// SVG rendering

namespace {

constexpr double kPanelWidth = 340.0;
constexpr double kPanelGap = 110.0;
constexpr double kLeftMargin = 80.0;
constexpr double kTop = 60.0;
constexpr double kBottom = 370.0;
constexpr double kHeight = 430.0;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  std::string s(buf);
  if (s == "-0.00" || s == "-0") s.erase(0, 1);
  return s;
}

std::string coord(double v) { return fmt("%.2f", v); }

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm <= 1.0) step = 1.0;
  else if (norm <= 2.0) step = 2.0;
  else if (norm <= 5.0) step = 5.0;
  return step * mag;
}

void render_panel(std::ostringstream& out, const ReportPanel& panel, double left) {
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& s : panel.groups) {
    lo = first ? s.min : std::min(lo, s.min);
    hi = first ? s.max : std::max(hi, s.max);
    first = false;
  }
  if (first) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo <= 0.0) {
    const double pad = std::max(0.5, 0.05 * std::abs(lo));
    lo -= pad;
    hi += pad;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  const auto y_of = [&](double v) { return kBottom - (v - lo) / (hi - lo) * (kBottom - kTop); };
  const double right = left + kPanelWidth;

  out << "  <g class=\"panel\">\n";
  out << "    <text x=\"" << coord(left + kPanelWidth / 2) << "\" y=\"" << coord(kTop - 25)
      << "\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(panel.name) << "</text>\n";
  out << "    <line x1=\"" << coord(left) << "\" y1=\"" << coord(kTop) << "\" x2=\"" << coord(left)
      << "\" y2=\"" << coord(kBottom) << "\" stroke=\"black\"/>\n";
  out << "    <line x1=\"" << coord(left) << "\" y1=\"" << coord(kBottom) << "\" x2=\"" << coord(right)
      << "\" y2=\"" << coord(kBottom) << "\" stroke=\"black\"/>\n";

  const double step = nice_step(hi - lo);
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * std::abs(hi); t += step) {
    const double y = y_of(t);
    const double label = std::abs(t) < step * 1e-9 ? 0.0 : t;
    out << "    <line x1=\"" << coord(left - 5) << "\" y1=\"" << coord(y) << "\" x2=\"" << coord(left)
        << "\" y2=\"" << coord(y) << "\" stroke=\"black\"/>\n";
    out << "    <text x=\"" << coord(left - 8) << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt("%.4g", label) << "</text>\n";
  }
  out << "    <text x=\"" << coord(left - 55) << "\" y=\"" << coord((kTop + kBottom) / 2)
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " << coord(left - 55)
      << ' ' << coord((kTop + kBottom) / 2) << ")\">" << xml_escape(panel.axis_label) << "</text>\n";

  const std::size_t k = panel.groups.size();
  const double slot = k == 0 ? kPanelWidth : kPanelWidth / static_cast<double>(k);
  for (std::size_t g = 0; g < k; ++g) {
    const auto& s = panel.groups[g];
    const double cx = left + slot * (static_cast<double>(g) + 0.5);
    const double half = slot * 0.25;
    const double cap = slot * 0.12;
    out << "    <g class=\"box\">\n";
    out << "      <line x1=\"" << coord(cx) << "\" y1=\"" << coord(y_of(s.max)) << "\" x2=\""
        << coord(cx) << "\" y2=\"" << coord(y_of(s.q3)) << "\" stroke=\"black\"/>\n";
    out << "      <line x1=\"" << coord(cx) << "\" y1=\"" << coord(y_of(s.q1)) << "\" x2=\""
        << coord(cx) << "\" y2=\"" << coord(y_of(s.min)) << "\" stroke=\"black\"/>\n";
    for (double v : {s.min, s.max}) {
      out << "      <line x1=\"" << coord(cx - cap) << "\" y1=\"" << coord(y_of(v)) << "\" x2=\""
          << coord(cx + cap) << "\" y2=\"" << coord(y_of(v)) << "\" stroke=\"black\"/>\n";
    }
    out << "      <rect x=\"" << coord(cx - half) << "\" y=\"" << coord(y_of(s.q3)) << "\" width=\""
        << coord(2 * half) << "\" height=\"" << coord(y_of(s.q1) - y_of(s.q3))
        << "\" fill=\"#c6dbef\" stroke=\"black\"/>\n";
    out << "      <line x1=\"" << coord(cx - half) << "\" y1=\"" << coord(y_of(s.median)) << "\" x2=\""
        << coord(cx + half) << "\" y2=\"" << coord(y_of(s.median))
        << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    out << "      <text x=\"" << coord(cx) << "\" y=\"" << coord(kBottom + 18)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << (g + 1) << "</text>\n";
    out << "    </g>\n";
  }
  out << "    <text x=\"" << coord(left + kPanelWidth / 2) << "\" y=\"" << coord(kBottom + 42)
      << "\" text-anchor=\"middle\" font-size=\"12\">Quintile of observed rate (1 = lowest)</text>\n";
  out << "  </g>\n";
}

}  // namespace

std::string report_svg(std::span<const ReportPanel> panels, const std::vector<std::string>& comment) {
  const double width =
      kLeftMargin + static_cast<double>(panels.size()) * (kPanelWidth + kPanelGap) - kPanelGap + 40.0;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(width) << "\" height=\""
      << coord(kHeight) << "\" viewBox=\"0 0 " << coord(width) << ' ' << coord(kHeight)
      << "\" font-family=\"sans-serif\">\n";
  if (!comment.empty()) {
    out << "<!--\n";
    for (const auto& line : comment) {
      std::string safe = line;
      for (std::size_t pos; (pos = safe.find("--")) != std::string::npos;) safe.replace(pos, 2, "- -");
      out << "  " << safe << '\n';
    }
    out << "-->\n";
  }
  out << "  <rect x=\"0\" y=\"0\" width=\"" << coord(width) << "\" height=\"" << coord(kHeight)
      << "\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    render_panel(out, panels[i], kLeftMargin + static_cast<double>(i) * (kPanelWidth + kPanelGap));
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace geosafety
