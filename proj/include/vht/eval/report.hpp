#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vht/eval/dataset.hpp"
#include "vht/eval/prequential.hpp"

namespace vht::eval {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kMetricsHeader = "instances,accuracy_cum,accuracy_window,seconds,throughput,splits,leaves";

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ReportError("cannot format number");
  return std::string(buf, ptr);
}

/// Quotes a field when it contains a separator, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.instances << ',' << format_number(r.accuracy_cum) << ',' << format_number(r.accuracy_window) << ','
        << format_number(r.seconds) << ',' << format_number(r.throughput) << ',' << r.splits << ',' << r.leaves
        << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << text;
  if (!out) throw ReportError("write failed for " + path.string());
}

inline void emit_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  write_text(path, metrics_csv(rows));
}

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader) {
    throw ReportError("not a metrics file: unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line, ',');
    if (f.size() != 7) throw ReportError("metrics line " + std::to_string(line_no) + ": expected 7 fields");
    auto num = [&](const std::string& s) {
      const auto v = detail::parse_number(s);
      if (!v) throw ReportError("metrics line " + std::to_string(line_no) + ": bad number '" + s + "'");
      return *v;
    };
    MetricsRow r;
    r.instances = static_cast<std::uint64_t>(num(f[0]));
    r.accuracy_cum = num(f[1]);
    r.accuracy_window = num(f[2]);
    r.seconds = num(f[3]);
    r.throughput = num(f[4]);
    r.splits = static_cast<std::uint64_t>(num(f[5]));
    r.leaves = static_cast<std::uint64_t>(num(f[6]));
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str());
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "instances,runs";
  for (const char* name : {"accuracy_cum", "accuracy_window", "seconds", "throughput", "splits", "leaves"}) {
    out << ',' << name << "_mean," << name << "_std";
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.instances << ',' << r.runs;
    for (const Stat* s : {&r.accuracy_cum, &r.accuracy_window, &r.seconds, &r.throughput, &r.splits, &r.leaves}) {
      out << ',' << format_number(s->mean) << ',' << format_number(s->stddev);
    }
    out << '\n';
  }
  return out.str();
}

/// One labeled accuracy curve.
struct PlotSeries {
  std::string label;
  std::vector<MetricsRow> rows;
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Accuracy (cumulative) against instances, one polyline per series.
inline std::string render_plot(const std::vector<PlotSeries>& series, const std::string& title = "Accuracy") {
  double max_x = 0, min_y = 100, max_y = 0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& r : s.rows) {
      any = true;
      max_x = std::max(max_x, static_cast<double>(r.instances));
      min_y = std::min(min_y, r.accuracy_cum);
      max_y = std::max(max_y, r.accuracy_cum);
    }
  }
  if (!any) throw ReportError("nothing to plot");
  if (max_x <= 0) max_x = 1;
  min_y = std::max(0.0, std::floor((min_y - 2) / 10) * 10);
  max_y = std::min(100.0, std::ceil((max_y + 2) / 10) * 10);
  if (max_y <= min_y) max_y = min_y + 10;

  const double W = 800, H = 480, left = 70, right = 180, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + pw * x / max_x; };
  auto sy = [&](double y) { return top + ph * (1 - (y - min_y) / (max_y - min_y)); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = max_x * i / 5, yv = min_y + (max_y - min_y) * i / 5;
    o << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << format_number(std::round(xv)) << "</text>\n";
    o << "<text x=\"" << left - 8 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << format_number(std::round(yv * 10) / 10) << "</text>\n";
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << sy(yv) << "\" y2=\"" << sy(yv) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">instances</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">accuracy (%)</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % 10];
    o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& r : series[i].rows) o << sx(static_cast<double>(r.instances)) << ',' << sy(r.accuracy_cum) << ' ';
    o << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text class=\"label\" x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[i].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void emit_plot(const std::vector<PlotSeries>& series, const std::filesystem::path& path,
                      const std::string& title = "Accuracy") {
  write_text(path, render_plot(series, title));
}

}  // namespace vht::eval
