#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/harness/csv.hpp"
#include "hap/harness/run.hpp"

namespace hap::harness {

/// Pearson correlation; nullopt when either side has zero variance or fewer than two points.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// Correlation between per-task teacher probability and per-task eval success,
/// pooled over (evaluation, task) pairs whose step lies in [lo, hi] * total_steps.
inline std::optional<double> feedback_correlation(const std::vector<EvalPoint>& evals, std::int64_t total_steps,
                                                  double lo = 0.2, double hi = 0.8) {
  std::vector<double> p, s;
  for (const auto& e : evals) {
    const double f = static_cast<double>(e.step) / static_cast<double>(total_steps);
    if (f < lo || f > hi) continue;
    for (std::size_t t = 0; t < e.success.size(); ++t) {
      p.push_back(e.probs[t]);
      s.push_back(e.success[t]);
    }
  }
  return pearson(p, s);
}

inline double mean_success(const EvalPoint& e) {
  double m = 0;
  for (double x : e.success) m += x;
  return e.success.empty() ? 0.0 : m / static_cast<double>(e.success.size());
}

/// Trapezoid area under the mean-success curve, normalised by the step span (so in [0, 1]).
inline double success_auc(const std::vector<EvalPoint>& evals) {
  if (evals.size() < 2) return evals.empty() ? 0.0 : mean_success(evals[0]);
  double area = 0;
  for (std::size_t i = 1; i < evals.size(); ++i)
    area += 0.5 * (mean_success(evals[i]) + mean_success(evals[i - 1])) *
            static_cast<double>(evals[i].step - evals[i - 1].step);
  return area / static_cast<double>(evals.back().step - evals.front().step);
}

/// Evaluation curve of one seed as read back from a run directory.
struct RunCurve {
  std::string label;
  std::uint64_t seed = 0;
  std::string env;
  std::string teacher;
  std::int64_t total_steps = 0;
  double threshold = 0.9;
  std::vector<std::string> tasks;
  std::vector<EvalPoint> evals;

  [[nodiscard]] std::optional<std::int64_t> steps_to(std::size_t t) const {
    for (const auto& e : evals)
      if (e.success[t] >= threshold) return e.step;
    return std::nullopt;
  }
  [[nodiscard]] std::optional<std::int64_t> steps_to_all() const {
    for (const auto& e : evals)
      if (std::all_of(e.success.begin(), e.success.end(), [&](double s) { return s >= threshold; })) return e.step;
    return std::nullopt;
  }
};

inline RunCurve curve_of(const RunResult& r, const ExperimentSpec& spec, std::string label = "") {
  RunCurve c;
  c.label = label.empty() ? teacher::kind_name(spec.teacher) : std::move(label);
  c.seed = r.seed;
  c.env = spec.env.id;
  c.teacher = teacher::kind_name(spec.teacher);
  c.total_steps = spec.run.total_steps;
  c.threshold = spec.run.threshold;
  c.tasks = r.task_names;
  c.evals = r.evals;
  return c;
}

/// Reads the evaluation rows of `dir/metrics.csv` (plus the resolved config).
inline RunCurve load_curve(const std::string& dir) {
  const auto spec = load_spec(dir + "/config.resolved");
  const auto table = read_csv_file(dir + "/metrics.csv");
  if (table.comments.empty() || table.comments[0] != kMetricsVersion)
    throw FormatError(dir + "/metrics.csv: missing '" + std::string(kMetricsVersion) + "' header");
  RunCurve c;
  c.label = dir;
  c.env = spec.env.id;
  c.teacher = teacher::kind_name(spec.teacher);
  c.total_steps = spec.run.total_steps;
  c.threshold = spec.run.threshold;
  for (const auto& h : table.header)
    if (h.rfind("eval_", 0) == 0) c.tasks.push_back(h.substr(5));
  const auto ev = table.require_column("event"), st = table.require_column("step"),
             ep = table.require_column("episode");
  std::vector<std::size_t> pcol, scol;
  for (const auto& t : c.tasks) {
    pcol.push_back(table.require_column("p_" + t));
    scol.push_back(table.require_column("eval_" + t));
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i][ev] != "eval") continue;
    EvalPoint e;
    e.step = static_cast<std::int64_t>(table.number(i, st));
    e.episode = static_cast<std::int64_t>(table.number(i, ep));
    for (std::size_t t = 0; t < c.tasks.size(); ++t) {
      e.probs.push_back(table.number(i, pcol[t]));
      e.success.push_back(table.number(i, scol[t]));
    }
    c.evals.push_back(std::move(e));
  }
  if (c.evals.empty()) throw FormatError(dir + "/metrics.csv: no evaluation rows");
  if (auto summary = std::ifstream(dir + "/summary.json")) {
    auto j = nlohmann::json::parse(summary, nullptr, false);
    if (!j.is_discarded() && j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

inline std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Median steps-to-threshold where a seed that never converges counts as +infinity.
inline double median_steps_to_all(const std::vector<RunCurve>& runs) {
  std::vector<double> v;
  for (const auto& r : runs) {
    auto s = r.steps_to_all();
    v.push_back(s ? static_cast<double>(*s) : std::numeric_limits<double>::infinity());
  }
  return median(v).value_or(std::numeric_limits<double>::infinity());
}

/// Side-by-side summary of groups of runs (one group per label). All runs must
/// share the environment and task list.
inline std::string compare_report(const std::vector<RunCurve>& runs) {
  if (runs.empty()) throw ConfigError("compare: no runs");
  for (const auto& r : runs)
    if (r.env != runs[0].env || r.tasks != runs[0].tasks)
      throw ConfigError("compare: runs use different environments (" + runs[0].label + " vs " + r.label + ")");
  std::map<std::string, std::vector<RunCurve>> groups;
  std::vector<std::string> order;
  for (const auto& r : runs) {
    if (!groups.count(r.label)) order.push_back(r.label);
    groups[r.label].push_back(r);
  }
  auto cell = [](std::optional<std::int64_t> s) { return s ? std::to_string(*s) : std::string("-"); };
  std::ostringstream out;
  out << "label,seed,steps_to_all";
  for (const auto& t : runs[0].tasks) out << ",steps_to_" << t;
  out << ",auc,feedback_r,final_mean_success\n";
  for (const auto& label : order)
    for (const auto& r : groups[label]) {
      out << field(label) << ',' << r.seed << ',' << cell(r.steps_to_all());
      for (std::size_t t = 0; t < r.tasks.size(); ++t) out << ',' << cell(r.steps_to(t));
      auto fb = feedback_correlation(r.evals, r.total_steps);
      out << ',' << fmt(success_auc(r.evals)) << ',' << (fb ? fmt(*fb) : "") << ','
          << fmt(mean_success(r.evals.back())) << '\n';
    }
  out << "\nlabel,seeds,median_steps_to_all,converged,mean_auc\n";
  for (const auto& label : order) {
    const auto& g = groups[label];
    double auc = 0;
    int converged = 0;
    for (const auto& r : g) {
      auc += success_auc(r.evals);
      converged += r.steps_to_all().has_value();
    }
    const double med = median_steps_to_all(g);
    out << field(label) << ',' << g.size() << ',' << (std::isinf(med) ? "-" : fmt(med)) << ',' << converged << '/'
        << g.size() << ',' << fmt(auc / static_cast<double>(g.size())) << '\n';
  }
  return out.str();
}

}  // namespace hap::harness
