// Runs every primary acceptance criterion and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hap/baselines/baselines.hpp"
#include "hap/core/rng.hpp"
#include "hap/envs/nav.hpp"
#include "hap/harness/compare.hpp"
#include "hap/harness/run.hpp"
#include "hap/student/policy.hpp"
#include "hap/teacher/teachers.hpp"
#include "hap/tensor/mlp.hpp"

namespace fs = std::filesystem;
using namespace hap;

namespace {

// Pinned tolerances.
constexpr double kConvergeThreshold = 0.9;
constexpr std::int64_t kNavBudget = 50000;
constexpr double kNavSeedSeconds = 15 * 60;
constexpr double kFeedbackMax = -0.3;
constexpr double kFdMaxRelError = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kFdMagnitudeFloor = 1e-5;  ///< entries with |g| and |fd| below this carry no relative information
constexpr int kFdInstances = 100;
constexpr int kDirectionBatches = 1000;
constexpr double kExp3MinFrequency = 0.6;
constexpr int kBanditRounds = 500;
constexpr double kEasyRegression = 0.5;
constexpr int kNavSeeds = 5;
constexpr int kMinigridSeeds = 10;

int g_failures = 0;
std::ofstream g_report;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++g_failures;
  char line[512];
  std::snprintf(line, sizeof line, "%s  %-24s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fputs(line, stdout);
  std::fflush(stdout);
  g_report << line << std::flush;
}

void progress(const char* fmt, auto... args) {
  std::fprintf(stderr, fmt, args...);
  std::fflush(stderr);
}

std::string fmt_steps(std::optional<std::int64_t> s) { return s ? std::to_string(*s) : "-"; }

double rel_error(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
}

int g_kinks = 0;

double central_difference(Eigen::VectorXd& params, Eigen::Index i, double h, const std::function<double()>& loss) {
  const double keep = params(i);
  params(i) = keep + h;
  const double up = loss();
  params(i) = keep - h;
  const double down = loss();
  params(i) = keep;
  return (up - down) / (2 * h);
}

/// Central differences of `loss` against `analytic` over every entry of `params`; returns the max relative error
/// over entries above the magnitude floor and adds their count to `checked`. An entry whose differences at
/// kFdStep and kFdStep/10 disagree straddles a ReLU kink; it is counted in g_kinks instead.
double fd_max_error(const Eigen::VectorXd& analytic, Eigen::VectorXd& params, const std::function<double()>& loss,
                    int& checked) {
  double worst = 0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double fd = central_difference(params, i, kFdStep, loss);
    if (std::max(std::abs(fd), std::abs(analytic(i))) < kFdMagnitudeFloor) continue;
    const double fine = central_difference(params, i, kFdStep / 10, loss);
    if (rel_error(fine, fd) > kFdMaxRelError) {
      ++g_kinks;
      continue;
    }
    worst = std::max(worst, rel_error(analytic(i), fd));
    ++checked;
  }
  return worst;
}

// ---- student gradients

double actor_loss(const student::StudentPolicy& p, const std::vector<envs::Trajectory>& batch,
                  const std::vector<student::AdvantageBatch>& adv) {
  double loss = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      const auto& s = batch[i].steps[t];
      auto d = p.action_distribution(s.obs);
      loss -= std::log(d[static_cast<std::size_t>(s.action)]) * adv[i].advantages[t];
      loss -= p.config().ent_coef * tensor::entropy(d);
      ++n;
    }
  return loss / static_cast<double>(n);
}

double critic_loss(const student::StudentPolicy& p, const std::vector<envs::Trajectory>& batch) {
  const auto adv = p.advantages(batch);
  double loss = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].steps.size(); ++t) {
      const double e = p.value(batch[i].steps[t].obs) - adv[i].returns[t];
      loss += e * e;
      ++n;
    }
  return p.config().vf_coef * loss / static_cast<double>(n);
}

double student_fd_suite(int& checked) {
  double worst = 0;
  for (int k = 0; k < kFdInstances; ++k) {
    RngStream gen = RngStream(7001).split(static_cast<std::uint64_t>(k));
    student::StudentConfig cfg;
    cfg.hidden.clear();
    const auto layers = 1 + gen.below(2);
    for (std::size_t l = 0; l < layers; ++l) cfg.hidden.push_back(3 + gen.below(6));
    cfg.ent_coef = gen.uniform(0.0, 0.1);
    cfg.gamma = gen.uniform(0.8, 0.99);
    cfg.gae_lambda = 1.0;
    cfg.max_grad_norm = 0.0;
    cfg.actor_output_scale = 1.0;
    envs::NavConfig nc;
    nc.step_cap = 4 + static_cast<int>(gen.below(5));
    envs::NavEnv env(nc);
    student::StudentPolicy q(env.encoder(), 4, cfg, gen.split("policy"));
    RngStream roll = gen.split("rollout");
    std::vector<envs::Trajectory> batch;
    const auto episodes = 2 + gen.below(3);
    for (std::size_t i = 0; i < episodes; ++i) {
      batch.push_back(student::rollout(env, q, gen.below(4), gen.below(1u << 30), roll));
      batch.back().terminated = true;
    }
    const auto adv = q.advantages(batch);
    const auto g = q.loss_gradients(batch, false);
    if (k % 2 == 0)
      worst = std::max(worst, fd_max_error(g.actor, q.actor().parameters(),
                                           [&] { return actor_loss(q, batch, adv); }, checked));
    else
      worst = std::max(worst, fd_max_error(g.critic, q.critic().parameters(),
                                           [&] { return critic_loss(q, batch); }, checked));
  }
  return worst;
}

// ---- history-teacher gradients

long double teacher_objective(const std::vector<long double>& z, const std::vector<std::size_t>& tasks,
                              const std::vector<double>& r) {
  long double m = z[0];
  for (auto v : z) m = std::max(m, v);
  long double s = 0;
  for (auto v : z) s += std::exp(v - m);
  long double j = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) j += (z[tasks[i]] - m - std::log(s)) * r[i];
  return j / static_cast<long double>(tasks.size());
}

double teacher_fd_suite(int& checked) {
  double worst = 0;
  for (int k = 0; k < kFdInstances; ++k) {
    RngStream gen = RngStream(7002).split(static_cast<std::uint64_t>(k));
    const std::size_t n = 2 + gen.below(4);
    teacher::CurriculumConfig c;
    c.entropy_weight = 0.0;
    c.p_min = 0.0;
    c.warmup_episodes_per_task = 0;
    c.mean_baseline = false;
    c.teacher_hidden = {3 + gen.below(6), 3 + gen.below(6)};
    teacher::HistoryMlpTeacher t(n, c, gen.split("net"));
    RngStream init = gen.split("init");
    t.net() = tensor::Mlp::random({3 * n, c.teacher_hidden[0], c.teacher_hidden[1], n}, init);
    std::vector<double> h(3 * n);
    for (auto& v : h) v = gen.uniform(0, 1);
    const auto batch = 1 + gen.below(12);
    std::vector<std::size_t> tasks(batch);
    std::vector<double> r(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      tasks[i] = gen.below(n);
      r[i] = gen.uniform(-1, 1);
    }
    const Eigen::VectorXd g = t.parameter_gradient(h, tasks, r);
    tensor::Mlp net = t.net();
    auto loss = [&] {
      auto z = tensor::forward(net, std::span<const double>(h));
      return static_cast<double>(teacher_objective(std::vector<long double>(z.begin(), z.end()), tasks, r));
    };
    worst = std::max(worst, fd_max_error(g, net.parameters(), loss, checked));
  }
  return worst;
}

// ---- teacher update direction

void direction_suite() {
  RngStream rng(7003);
  int trials = 0, violations = 0;
  while (trials < kDirectionBatches) {
    teacher::CurriculumConfig c;
    c.p_min = 0.0;
    c.entropy_weight = 0.0;
    c.warmup_episodes_per_task = 0;
    teacher::LogitTeacher t(2, c);
    t.logits() << rng.uniform(-2, 2), rng.uniform(-2, 2);
    t.reload();
    const std::size_t batch = 2 + rng.below(30);
    std::vector<std::size_t> tasks(batch);
    std::vector<double> r(batch);
    for (auto& v : tasks) v = rng.below(2);
    tasks[0] = 0;
    tasks[1] = 1;
    double sum[2] = {0, 0}, cnt[2] = {0, 0};
    for (std::size_t i = 0; i < batch; ++i) {
      r[i] = rng.uniform(-1, 1);
      sum[tasks[i]] += r[i];
      cnt[tasks[i]] += 1;
    }
    const double m0 = sum[0] / cnt[0], m1 = sum[1] / cnt[1];
    if (m0 == m1) continue;
    const std::size_t hi = m0 > m1 ? 0 : 1;
    for (std::size_t i = 0; i < batch; ++i) t.observe(tasks[i], r[i], r[i] > 0.5);
    const double before = t.distribution()[hi];
    t.update();
    if (!(t.distribution()[hi] < before)) ++violations;
    ++trials;
  }
  report(violations == 0, "teacher-direction",
         std::to_string(trials) + " random 2-task batches, " + std::to_string(violations) + " violations");
}

// ---- bandits

void bandit_suite() {
  teacher::CurriculumConfig c;
  c.p_min = 0.0;
  c.return_low = 0.0;
  baselines::Exp3Curriculum e(2, c);
  RngStream rng(2024);
  int picks = 0;
  for (int i = 0; i < kBanditRounds; ++i) {
    auto t = e.sample_task(rng);
    picks += t == 0 ? 1 : 0;
    e.observe(t, t == 0 ? 1.0 : 0.0, false);
  }
  const double freq = picks / static_cast<double>(kBanditRounds);
  char buf[160];
  std::snprintf(buf, sizeof buf, "better-arm frequency %.3f over %d rounds (need > %.2f)", freq, kBanditRounds,
                kExp3MinFrequency);
  report(freq > kExp3MinFrequency, "bandit-exp3", buf);

  teacher::CurriculumConfig tc;
  tc.p_min = 0.0;
  const std::size_t n = 4, rising = 2;
  const double eps = tc.tscl_eps;
  baselines::TsclCurriculum t(n, tc);
  RngStream trng(9);
  for (int r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < n; ++k) t.observe(k, k == rising ? 0.1 * r : 0.3, false);
  const int rounds = 2000;
  const double bound = 1 - eps + eps / static_cast<double>(n);
  double mass = 0, level = 0.3;
  int hits = 0;
  for (int i = 0; i < rounds; ++i) {
    mass += t.distribution()[rising];
    auto task = t.sample_task(trng);
    hits += task == rising ? 1 : 0;
    if (task == rising) level += 0.01;
    t.observe(task, task == rising ? level : 0.3, false);
  }
  const double expected = mass / rounds, freq_t = hits / static_cast<double>(rounds);
  // Sampled frequency is checked against the bound minus three binomial standard deviations.
  const double slack = 3 * std::sqrt(bound * (1 - bound) / rounds);
  std::snprintf(buf, sizeof buf, "selection probability %.4f, sampled frequency %.4f (bound %.4f, sampled slack %.4f)",
                expected, freq_t, bound, slack);
  report(expected >= bound - 1e-12 && freq_t >= bound - slack, "bandit-tscl", buf);
}

// ---- experiments

struct Group {
  std::string name;
  harness::ExperimentSpec spec;
  std::vector<harness::RunResult> runs;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path run_dir(const fs::path& root, const std::string& group, std::uint64_t seed) {
  return root / group / ("seed_" + std::to_string(seed));
}

Group run_group(const fs::path& root, std::string name, harness::ExperimentSpec spec, int seeds) {
  require(spec.run.eval_episodes >= 10, "acceptance runs need eval_episodes >= 10");
  Group g{std::move(name), std::move(spec), {}};
  for (int s = 1; s <= seeds; ++s) {
    const auto dir = run_dir(root, g.name, static_cast<std::uint64_t>(s));
    fs::create_directories(dir);
    auto r = harness::run_experiment(g.spec, static_cast<std::uint64_t>(s), dir.string());
    progress("[%s seed %d] %.1fs, steps_to_all %s\n", g.name.c_str(), s, r.wall_seconds,
             fmt_steps(r.steps_to_all(kConvergeThreshold)).c_str());
    g.runs.push_back(std::move(r));
  }
  return g;
}

double median_or_inf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

std::size_t task_of_tier(const harness::RunResult& r, const envs::TaskSpace& space, envs::Tier tier) {
  for (std::size_t t = 0; t < r.task_names.size(); ++t)
    if (space.tier(*space.find(r.task_names[t])) == tier) return t;
  throw ContractViolation("no task of the requested tier");
}

void nav_criteria(const Group& hap, const Group& uniform) {
  int converged = 0;
  double slowest = 0;
  std::string detail;
  for (const auto& r : hap.runs) {
    const auto s = r.steps_to_all(kConvergeThreshold);
    if (s && *s <= kNavBudget) ++converged;
    slowest = std::max(slowest, r.wall_seconds);
    detail += fmt_steps(s) + " ";
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d/%d seeds reach %.1f on all tasks within %lld steps [%s], slowest seed %.1fs",
                converged, kNavSeeds, kConvergeThreshold, static_cast<long long>(kNavBudget), detail.c_str(), slowest);
  report(converged >= 4 && slowest < kNavSeedSeconds, "nav-convergence", buf);

  auto steps = [](const Group& g) {
    std::vector<double> v;
    for (const auto& r : g.runs) {
      const auto s = r.steps_to_all(kConvergeThreshold);
      v.push_back(s ? static_cast<double>(*s) : std::numeric_limits<double>::infinity());
    }
    return v;
  };
  const double mh = median_or_inf(steps(hap)), mu = median_or_inf(steps(uniform));
  const std::size_t hardest = hap.runs.front().task_names.size() - 1;
  int paired = 0, later = 0;
  for (std::size_t i = 0; i < hap.runs.size(); ++i) {
    const auto& a = hap.runs[i];
    const auto& b = uniform.runs[i];
    if (!a.steps_to_all(kConvergeThreshold) || !b.steps_to_all(kConvergeThreshold)) continue;
    ++paired;
    if (*a.steps_to(hardest, kConvergeThreshold) > *b.steps_to(hardest, kConvergeThreshold)) ++later;
  }
  std::snprintf(buf, sizeof buf,
                "median steps-to-all HAP %.0f vs uniform %.0f; hardest task later under HAP on %d of %d paired seeds",
                mh, mu, later, paired);
  report(mh < mu && later == 0, "curriculum-advantage", buf);

  int negative = 0;
  std::string rs;
  for (const auto& r : hap.runs) {
    const auto c = harness::feedback_correlation(r.evals, hap.spec.run.total_steps);
    if (c && *c <= kFeedbackMax) ++negative;
    char one[32];
    std::snprintf(one, sizeof one, "%s ", c ? std::to_string(*c).substr(0, 6).c_str() : "n/a");
    rs += one;
  }
  std::snprintf(buf, sizeof buf, "r <= %.1f on %d/%d seeds [%s]", kFeedbackMax, negative, kNavSeeds, rs.c_str());
  report(negative >= 4, "feedback-correlation", buf);
}

void minigrid_criteria(const Group& def, const Group& noent, const Group& nofloor) {
  const auto space = envs::minigrid_space();
  auto hard_median = [&](const Group& g) {
    std::vector<double> v;
    for (const auto& r : g.runs) v.push_back(r.final_success()[task_of_tier(r, space, envs::Tier::kHard)]);
    return median_or_inf(v);
  };
  const double hd = hard_median(def), hn = hard_median(noent);
  char buf[200];
  std::snprintf(buf, sizeof buf, "median final Hard-tier success default %.2f vs no-entropy %.2f", hd, hn);
  report(hd > hn, "ablation-entropy", buf);

  int regressed = 0;
  for (const auto& r : nofloor.runs) {
    const auto easy = task_of_tier(r, space, envs::Tier::kEasy);
    bool reached = false, dropped = false;
    for (const auto& e : r.evals) {
      if (reached && e.success[easy] < kEasyRegression) dropped = true;
      if (e.success[easy] >= kConvergeThreshold) reached = true;
    }
    if (dropped) ++regressed;
  }
  std::snprintf(buf, sizeof buf, "%d/%d no-floor seeds drop Easy-tier success below %.1f after reaching %.1f",
                regressed, kMinigridSeeds, kEasyRegression, kConvergeThreshold);
  report(regressed >= 1, "ablation-floor", buf);
}

void invariant_criterion(const std::vector<const Group*>& groups) {
  std::size_t checked = 0, violations = 0;
  for (const auto* g : groups)
    for (const auto& r : g->runs) {
      checked += r.invariants.checked;
      violations += r.invariants.total();
    }
  report(violations == 0 && checked > 0, "distribution-invariants",
         std::to_string(checked) + " logged distributions, " + std::to_string(violations) + " violations");
}

void determinism_criterion(const fs::path& root, const std::vector<const Group*>& groups) {
  int identical = 0, compared = 0;
  for (const auto* g : groups) {
    const auto dir = run_dir(root / "rerun", g->name, 1);
    fs::create_directories(dir);
    (void)harness::run_experiment(g->spec, 1, dir.string());
    for (const char* file : {"metrics.csv", "teacher_trace.csv", "checkpoint.txt"}) {
      ++compared;
      if (read_file(dir / file) == read_file(run_dir(root, g->name, 1) / file)) ++identical;
    }
  }
  report(identical == compared, "determinism",
         std::to_string(identical) + "/" + std::to_string(compared) +
             " rerun files byte-identical (metrics.csv, teacher_trace.csv, checkpoint.txt)");
}

harness::ExperimentSpec minigrid_spec(const std::string& extra) {
  return harness::parse_spec_text("env.id = minigrid\nenv.tasks = Empty,DoorKey,MultiRoom\n" + extra);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string out = (fs::temp_directory_path() / "hap_acceptance").string();
  bool report_only = false;
  app.add_option("--out", out, "Directory for run outputs");
  app.add_flag("--report-only", report_only, "Exit 0 once every criterion has been evaluated");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(out);
    fs::remove_all(root);
    fs::create_directories(root);
    g_report.open(root / "report.txt");

    int checked = 0;
    const double ws = student_fd_suite(checked);
    const double wt = teacher_fd_suite(checked);
    char buf[200];
    std::snprintf(buf, sizeof buf, "%d random instances x2, %d entries (%d on ReLU kinks skipped), max rel error student %.2e teacher %.2e",
                  kFdInstances, checked, g_kinks, ws, wt);
    report(ws <= kFdMaxRelError && wt <= kFdMaxRelError, "gradient-fd", buf);
    direction_suite();
    bandit_suite();

    auto nav = harness::defaults_for("nav");
    auto nav_uniform = nav;
    nav_uniform.teacher = teacher::TeacherKind::kUniform;
    const auto hap = run_group(root, "nav_hap", nav, kNavSeeds);
    const auto uni = run_group(root, "nav_uniform", nav_uniform, kNavSeeds);
    nav_criteria(hap, uni);

    const auto def = run_group(root, "minigrid_default", minigrid_spec(""), kMinigridSeeds);
    const auto noent =
        run_group(root, "minigrid_no_entropy", minigrid_spec("teacher.entropy_weight = 0\n"), kMinigridSeeds);
    const auto nofloor = run_group(root, "minigrid_no_floor", minigrid_spec("teacher.p_min = 0\n"), kMinigridSeeds);
    minigrid_criteria(def, noent, nofloor);

    invariant_criterion({&hap, &uni, &def, &noent, &nofloor});
    determinism_criterion(root, {&hap, &uni, &def});
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", g_failures);
  g_report << g_failures << " criteria failed\n";
  return g_failures == 0 || report_only ? 0 : 1;
}
