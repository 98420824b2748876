#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/harness/compare.hpp"
#include "hap/harness/csv.hpp"

namespace hap::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label = "step";
  std::string y_label;
  std::vector<Series> series;
  std::optional<std::pair<double, double>> y_range;  ///< fixed y axis, else fitted to the data
};

namespace detail {

struct Frame {
  double left = 70, top = 40, width = 440, height = 300;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  [[nodiscard]] double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  [[nodiscard]] double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
  [[nodiscard]] double ux(double p) const { return x0 + (p - left) / width * (x1 - x0); }
  [[nodiscard]] double uy(double p) const { return y0 + (top + height - p) / height * (y1 - y0); }
};

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

inline std::string xml_unescape(std::string s) {
  for (auto [from, to] : {std::pair{"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&amp;", "&"}}) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += std::string(to).size())
      s.replace(pos, std::string(from).size(), to);
  }
  return s;
}

inline std::pair<double, double> fit_range(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

inline constexpr const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6c4f9c",
                                           "#00798c", "#8f2d56", "#5c5c5c"};

}  // namespace detail

/// Deterministic SVG line chart. The plotting frame and axis ranges are stored
/// as data attributes so `read_svg` can invert the pixel transform.
inline std::string render_svg(const Chart& chart) {
  detail::Frame f;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : chart.series) {
    require(s.x.size() == s.y.size(), "plot: series '" + s.label + "' has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  std::tie(f.x0, f.x1) = detail::fit_range(xlo, xhi);
  std::tie(f.y0, f.y1) = chart.y_range ? *chart.y_range : detail::fit_range(ylo, yhi);

  using detail::num;
  using detail::short_num;
  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" height=\"400\" viewBox=\"0 0 680 400\">\n";
  o += "<title>" + detail::xml_escape(chart.title) + "</title>\n";
  o += "<rect width=\"680\" height=\"400\" fill=\"white\"/>\n";
  o += "<text x=\"290\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       detail::xml_escape(chart.title) + "</text>\n";
  const double bottom = f.top + f.height, right = f.left + f.width;
  o += "<g stroke=\"#444\" stroke-width=\"1\">\n";
  o += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(right) + "\" y2=\"" + num(bottom) +
       "\"/>\n";
  o += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" + num(bottom) +
       "\"/>\n";
  o += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(bottom + 16) + "\" text-anchor=\"middle\">" + short_num(xv) +
         "</text>\n";
    o += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + short_num(yv) +
         "</text>\n";
  }
  o += "<text x=\"" + num(f.left + f.width / 2) + "\" y=\"" + num(bottom + 38) + "\" text-anchor=\"middle\">" +
       detail::xml_escape(chart.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"" + num(f.top + f.height / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(f.top + f.height / 2) + ")\">" + detail::xml_escape(chart.y_label) + "</text>\n</g>\n";

  o += "<g class=\"plot\" data-left=\"" + num(f.left) + "\" data-top=\"" + num(f.top) + "\" data-width=\"" +
       num(f.width) + "\" data-height=\"" + num(f.height) + "\" data-x0=\"" + num(f.x0) + "\" data-x1=\"" +
       num(f.x1) + "\" data-y0=\"" + num(f.y0) + "\" data-y1=\"" + num(f.y1) + "\">\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    o += "<polyline class=\"series\" data-label=\"" + detail::xml_escape(s.label) + "\" fill=\"none\" stroke=\"" +
         color + "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!first) o += ' ';
      first = false;
      o += num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
    }
    o += "\"/>\n";
  }
  o += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const double y = f.top + 8 + 16.0 * static_cast<double>(k);
    o += "<line x1=\"" + num(right + 14) + "\" y1=\"" + num(y) + "\" x2=\"" + num(right + 34) + "\" y2=\"" + num(y) +
         "\" stroke=\"" + detail::kPalette[k % std::size(detail::kPalette)] + "\" stroke-width=\"1.5\"" +
         (chart.series[k].dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    o += "<text x=\"" + num(right + 40) + "\" y=\"" + num(y + 4) + "\">" + detail::xml_escape(chart.series[k].label) +
         "</text>\n";
  }
  o += "</g>\n</svg>\n";
  return o;
}

/// Recovers the plotted points of an SVG written by `render_svg`.
inline std::vector<Series> read_svg(const std::string& svg) {
  static const std::regex kFrame(
      R"re(<g class="plot" data-left="([^"]+)" data-top="([^"]+)" data-width="([^"]+)" data-height="([^"]+)" data-x0="([^"]+)" data-x1="([^"]+)" data-y0="([^"]+)" data-y1="([^"]+)">)re");
  static const std::regex kLine(R"re(<polyline class="series" data-label="([^"]*)"[^>]*?( stroke-dasharray="[^"]*")? points="([^"]*)"/>)re");
  std::smatch m;
  if (!std::regex_search(svg, m, kFrame)) throw FormatError("svg: no plot frame");
  detail::Frame f;
  try {
    f.left = std::stod(m[1]);
    f.top = std::stod(m[2]);
    f.width = std::stod(m[3]);
    f.height = std::stod(m[4]);
    f.x0 = std::stod(m[5]);
    f.x1 = std::stod(m[6]);
    f.y0 = std::stod(m[7]);
    f.y1 = std::stod(m[8]);
  } catch (const std::logic_error&) {
    throw FormatError("svg: bad frame attribute");
  }
  std::vector<Series> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), kLine); it != std::sregex_iterator(); ++it) {
    Series s;
    s.label = detail::xml_unescape((*it)[1]);
    s.dashed = (*it)[2].matched;
    std::istringstream pts((*it)[3].str());
    for (std::string pair; pts >> pair;) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos) throw FormatError("svg: bad point '" + pair + "'");
      s.x.push_back(f.ux(std::stod(pair.substr(0, comma))));
      s.y.push_back(f.uy(std::stod(pair.substr(comma + 1))));
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// "label,x,y" rows of every plotted point.
inline std::string points_csv(const std::vector<Series>& series) {
  std::string out = "label,x,y\n";
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) out += field(s.label) + "," + fmt(s.x[i]) + "," + fmt(s.y[i]) + "\n";
  return out;
}

namespace detail {

inline std::vector<std::string> tasks_of(const CsvTable& t) {
  std::vector<std::string> tasks;
  for (const auto& h : t.header)
    if (h.rfind("eval_", 0) == 0) tasks.push_back(h.substr(5));
  return tasks;
}

}  // namespace detail

/// Training return of every completed episode.
inline Chart reward_chart(const CsvTable& metrics) {
  const auto ev = metrics.require_column("event"), st = metrics.require_column("step"),
             rc = metrics.require_column("return");
  Chart c{"Training return", "step", "episode return", {}, std::nullopt};
  Series s{"return", {}, {}, false};
  for (std::size_t i = 0; i < metrics.rows.size(); ++i) {
    if (metrics.rows[i][ev] != "episode") continue;
    s.x.push_back(metrics.number(i, st));
    s.y.push_back(metrics.number(i, rc));
  }
  c.series.push_back(std::move(s));
  return c;
}

/// Per-task greedy evaluation success; with `probs`, dashed sampling probabilities are overlaid.
inline Chart success_chart(const CsvTable& metrics, bool probs) {
  const auto ev = metrics.require_column("event"), st = metrics.require_column("step");
  const auto tasks = detail::tasks_of(metrics);
  Chart c{probs ? "Success and sampling probability" : "Evaluation success", "step",
          probs ? "success / probability" : "success", {}, std::pair{0.0, 1.0}};
  for (const auto& t : tasks) {
    const auto sc = metrics.require_column("eval_" + t);
    Series s{t, {}, {}, false}, p{"p_" + t, {}, {}, true};
    const auto pc = metrics.require_column("p_" + t);
    for (std::size_t i = 0; i < metrics.rows.size(); ++i) {
      if (metrics.rows[i][ev] != "eval") continue;
      s.x.push_back(metrics.number(i, st));
      s.y.push_back(metrics.number(i, sc));
      p.x.push_back(metrics.number(i, st));
      p.y.push_back(metrics.number(i, pc));
    }
    c.series.push_back(std::move(s));
    if (probs) c.series.push_back(std::move(p));
  }
  return c;
}

/// Mean evaluation success of several runs on one axis, one series per run label.
inline Chart compare_chart(const std::vector<RunCurve>& runs) {
  Chart c{"Mean evaluation success", "step", "mean success", {}, std::pair{0.0, 1.0}};
  for (const auto& r : runs) {
    Series s{r.label + (runs.size() > 1 ? " seed " + std::to_string(r.seed) : ""), {}, {}, false};
    for (const auto& e : r.evals) {
      s.x.push_back(static_cast<double>(e.step));
      s.y.push_back(mean_success(e));
    }
    c.series.push_back(std::move(s));
  }
  return c;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

/// Writes reward.svg, success.svg and overlay.svg next to the run's metrics.csv.
inline std::vector<std::filesystem::path> emit_plots(const std::string& dir) {
  const auto metrics = read_csv_file(dir + "/metrics.csv");
  const std::filesystem::path base(dir);
  std::vector<std::pair<std::string, Chart>> charts{{"reward.svg", reward_chart(metrics)},
                                                    {"success.svg", success_chart(metrics, false)},
                                                    {"overlay.svg", success_chart(metrics, true)}};
  std::vector<std::filesystem::path> out;
  for (const auto& [name, chart] : charts) {
    write_text(base / name, render_svg(chart));
    out.push_back(base / name);
  }
  return out;
}

}  // namespace hap::harness
