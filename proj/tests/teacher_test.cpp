#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hap/core/rng.hpp"
#include "hap/teacher/config.hpp"
#include "hap/teacher/curriculum.hpp"
#include "hap/teacher/history.hpp"
#include "hap/teacher/teachers.hpp"

using namespace hap;
using namespace hap::teacher;

namespace {

CurriculumConfig quiet(double lambda = 0.0) {
  CurriculumConfig c;
  c.entropy_weight = lambda;
  c.p_min = 0.0;
  c.warmup_episodes_per_task = 0;
  c.teacher_hidden = {8, 8};
  return c;
}

// Objective oracle in long double: mean_i log softmax(z)[T_i] (r_i - b) + lambda H(softmax(z)), b held fixed.
long double objective(const std::vector<long double>& z, const std::vector<std::size_t>& tasks,
                      const std::vector<double>& r, long double b, long double lambda) {
  long double m = z[0];
  for (auto v : z) m = std::max(m, v);
  long double s = 0;
  for (auto v : z) s += std::exp(v - m);
  std::vector<long double> logp(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) logp[k] = z[k] - m - std::log(s);
  long double j = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) j += logp[tasks[i]] * (r[i] - b);
  j /= static_cast<long double>(tasks.size());
  long double h = 0;
  for (auto lp : logp) h -= std::exp(lp) * lp;
  return j + lambda * h;
}

double tv(const Categorical& p, const Categorical& q) {
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d / 2;
}

Categorical random_dist(RngStream& rng, std::size_t n) {
  std::vector<double> p(n);
  double t = 0;
  for (auto& v : p) t += v = rng.uniform();
  for (auto& v : p) v /= t;
  return Categorical(p);
}

void feed(Curriculum& c, const std::vector<std::size_t>& tasks, const std::vector<double>& returns) {
  for (std::size_t i = 0; i < tasks.size(); ++i) c.observe(tasks[i], returns[i], returns[i] > 0.5);
}

}  // namespace

TEST(Floor, IdentityAtZero) {
  Categorical p({0.1, 0.2, 0.7});
  EXPECT_EQ(apply_floor(p, 0.0), p);
}

TEST(Floor, OneHotExample) {
  auto q = apply_floor(Categorical::one_hot(4, 0), 0.05);
  EXPECT_NEAR(q[0], 0.05 + (1 - 4 * 0.05), 1e-12);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(q[i], 0.05, 1e-12);
}

TEST(Floor, InfeasibleIsConfigError) {
  EXPECT_THROW((void)apply_floor(Categorical::uniform(4), 0.25), ConfigError);
  EXPECT_THROW((void)apply_floor(Categorical::uniform(4), -0.01), ConfigError);
}

TEST(Floor, RandomDistributionsKeepArgmaxSumAndMinimum) {
  RngStream rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    auto p = random_dist(rng, n);
    const double pmin = rng.uniform(0.0, 0.99 / static_cast<double>(n));
    auto q = apply_floor(p, pmin);
    double s = 0;
    for (auto v : q.probs()) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_GE(q.min(), pmin - 1e-12);
    EXPECT_EQ(q.argmax(), p.argmax());
  }
}

TEST(TaskWindow, KeepsTopKWithLowIndexTies) {
  Categorical p({0.3, 0.1, 0.3, 0.3});
  auto q = apply_task_window(p, 2);
  EXPECT_NEAR(q[0], 0.5, 1e-12);
  EXPECT_EQ(q[1], 0.0);
  EXPECT_NEAR(q[2], 0.5, 1e-12);
  EXPECT_EQ(q[3], 0.0);
  EXPECT_EQ(apply_task_window(p, 0), p);
  EXPECT_EQ(apply_task_window(p, 4), p);
}

TEST(TaskWindow, FlooredTailStaysBelowTwicePmin) {
  RngStream rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_dist(rng, 8);
    auto q = apply_floor(apply_task_window(p, 3), 0.02);
    int above = 0;
    for (auto v : q.probs()) above += v > 0.04 ? 1 : 0;
    EXPECT_LE(above, 3);
  }
}

TEST(TeacherReward, Examples) {
  EXPECT_EQ(teacher_reward(0.0, 0.05, true), 0.0);
  EXPECT_EQ(teacher_reward(0.99, 0.05, true), -0.99);
  EXPECT_EQ(teacher_reward(0.9, 0.05, true), 0.0);
  EXPECT_EQ(teacher_reward(0.4, 0.05, false), -0.4);
  EXPECT_THROW((void)teacher_reward(std::nan(""), 0.05, false), ContractViolation);
}

TEST(Warmup, Schedule) {
  EXPECT_TRUE(warmup_schedule(4, 0).empty());
  auto s = warmup_schedule(4, 2);
  ASSERT_EQ(s.size(), 8u);
  std::vector<int> c(4, 0);
  for (auto t : s) ++c[t];
  for (int v : c) EXPECT_EQ(v, 2);
  EXPECT_EQ(s[0], 0u);
  EXPECT_EQ(s[4], 0u);
}

TEST(Config, RangeChecks) {
  CurriculumConfig c;
  EXPECT_NO_THROW(c.validate(4));
  c.p_min = 0.25;
  EXPECT_THROW(c.validate(4), ConfigError);
  c = {};
  c.clamp_eps = 0.0;
  EXPECT_THROW(c.validate(4), ConfigError);
  c = {};
  c.entropy_weight = -1;
  EXPECT_THROW(c.validate(4), ConfigError);
  EXPECT_THROW(CurriculumConfig{}.validate(0), ConfigError);
}

TEST(History, AggregatesMatchBruteForce) {
  RngStream rng(11);
  HistoryWindow h(3, 7);
  std::vector<HistoryRecord> all;
  for (int i = 0; i < 200; ++i) {
    HistoryRecord r{static_cast<std::size_t>(rng.below(3)), rng.uniform(-1, 1), rng.uniform() < 0.4};
    h.push(r.task, r.ret, r.success);
    all.push_back(r);
    ASSERT_LE(h.size(), 7u);
    const std::size_t start = all.size() > 7 ? all.size() - 7 : 0;
    for (std::size_t t = 0; t < 3; ++t) {
      double n = 0, s = 0, m = 0;
      for (std::size_t j = start; j < all.size(); ++j)
        if (all[j].task == t) {
          n += 1;
          s += all[j].success;
          m += all[j].ret;
        }
      EXPECT_EQ(h.window_counts()[t], static_cast<std::size_t>(n));
      EXPECT_NEAR(h.success_rates()[t], n > 0 ? s / n : 0.0, 1e-9);
      EXPECT_NEAR(h.mean_returns()[t], n > 0 ? m / n : 0.0, 1e-9);
    }
  }
  std::size_t life = 0;
  for (auto c : h.lifetime_counts()) life += c;
  EXPECT_EQ(life, 200u);
}

TEST(History, FeatureLayoutIsWindowIndependent) {
  for (std::size_t w : {1u, 10u, 100u}) {
    HistoryWindow h(4, w);
    h.push(2, 0.5, true);
    auto f = h.features();
    ASSERT_EQ(f.size(), 12u);
    EXPECT_EQ(f[2], 1.0);
    EXPECT_NEAR(f[4 + 2], 1.0 / static_cast<double>(w), 1e-15);
    EXPECT_EQ(f[8 + 2], 0.5);
    auto masked = h.features(false, true, false);
    EXPECT_EQ(masked[2], 0.0);
    EXPECT_EQ(masked[8 + 2], 0.0);
  }
}

TEST(LogitGradient, MatchesFiniteDifferences) {
  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(6), batch = 1 + rng.below(20);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.uniform(-2, 2);
    std::vector<std::size_t> tasks(batch);
    std::vector<double> r(batch);
    for (auto& t : tasks) t = rng.below(n);
    for (auto& v : r) v = rng.uniform(-1, 1);
    const double lambda = rng.uniform(0, 1);
    const bool centred = rng.uniform() < 0.5;
    double b = 0;
    if (centred) {
      for (double v : r) b += v;
      b /= static_cast<double>(batch);
    }
    auto g = logit_objective_gradient(tensor::softmax(z), tasks, r, centred, lambda);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<long double> zp(z.begin(), z.end()), zm(z.begin(), z.end());
      const long double h = 1e-6L;
      zp[k] += h;
      zm[k] -= h;
      const long double fd = (objective(zp, tasks, r, b, lambda) - objective(zm, tasks, r, b, lambda)) / (2 * h);
      EXPECT_NEAR(g(static_cast<Eigen::Index>(k)), static_cast<double>(fd), 1e-7);
    }
  }
}

TEST(LogitGradient, EmptyBatchIsContractViolation) {
  EXPECT_THROW((void)logit_objective_gradient(Categorical::uniform(2), {}, {}, true, 0.1), ContractViolation);
}

TEST(LogitTeacher, ZeroLogitsAreUniform) {
  LogitTeacher t(4, quiet());
  EXPECT_EQ(t.distribution(), Categorical::uniform(4));
}

TEST(LogitTeacher, TwoTaskExampleMovesMassToFailedTask) {
  LogitTeacher t(2, quiet());
  feed(t, {0, 1}, {1.0, 0.0});
  // Brute-force perturbation: raising z_A lowers the teacher objective, raising z_B increases it.
  const std::vector<double> r{-1.0, 0.0};
  const long double base = objective({0, 0}, {0, 1}, r, -0.5, 0);
  EXPECT_LT(objective({1e-4L, 0}, {0, 1}, r, -0.5, 0), base);
  EXPECT_GT(objective({0, 1e-4L}, {0, 1}, r, -0.5, 0), base);
  auto before = t.distribution();
  auto stats = t.update();
  EXPECT_TRUE(stats.applied);
  EXPECT_LT(t.distribution()[0], before[0]);
  EXPECT_GT(t.distribution()[1], before[1]);
}

TEST(LogitTeacher, EqualReturnsLeaveLogitsUnchangedWithoutEntropy) {
  LogitTeacher t(3, quiet());
  t.logits() << 0.3, -0.2, 0.1;
  t.reload();
  const Eigen::VectorXd before = t.logits();
  feed(t, {0, 1, 2, 0}, {0.4, 0.4, 0.4, 0.4});
  t.update();
  EXPECT_EQ(t.logits(), before);
}

TEST(LogitTeacher, AdversarialDirectionOnRandomTwoTaskBatches) {
  RngStream rng(99);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    LogitTeacher t(2, quiet());
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
    if (std::abs(m0 - m1) < 1e-9) continue;
    const std::size_t hi = m0 > m1 ? 0 : 1;
    feed(t, tasks, r);
    const double before = t.distribution()[hi];
    t.update();
    EXPECT_LT(t.distribution()[hi], before);
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(LogitTeacher, EntropyDrivesZeroReturnTeacherToUniform) {
  auto c = quiet(0.5);
  c.teacher_lr = 0.01;
  LogitTeacher t(4, c);
  t.logits() << 2.0, -1.0, 0.5, -1.5;
  t.reload();
  for (int i = 0; i < 5000; ++i) {
    feed(t, {0, 1, 2, 3}, {0, 0, 0, 0});
    t.update();
  }
  EXPECT_LT(tv(t.distribution(), Categorical::uniform(4)), 1e-3);
}

TEST(LogitTeacher, LargeLambdaMovesTowardUniformDespiteReturns) {
  auto c = quiet(10.0);
  c.teacher_lr = 0.01;
  LogitTeacher t(3, c);
  t.logits() << 1.0, 0.0, -1.0;
  t.reload();
  const double start = tv(t.distribution(), Categorical::uniform(3));
  RngStream rng(1);
  for (int i = 0; i < 500; ++i) {
    feed(t, {0, 1, 2}, {rng.uniform(), rng.uniform(), rng.uniform()});
    t.update();
  }
  EXPECT_LT(tv(t.distribution(), Categorical::uniform(3)), 0.1 * start);
}

TEST(Teachers, FloorHoldsAfterEveryUpdate) {
  RngStream rng(4);
  auto c = quiet(0.0);
  c.p_min = 0.05;
  c.teacher_lr = 0.05;
  LogitTeacher logit(5, c);
  HistoryMlpTeacher mlp(5, c, rng.split("mlp"));
  MetaTeacher meta(5, [&] {
    auto m = c;
    m.replay_batch = 4;
    m.replay_capacity = 16;
    return m;
  }(), rng.split("meta"));
  for (Curriculum* t : std::vector<Curriculum*>{&logit, &mlp, &meta}) {
    for (int u = 0; u < 300; ++u) {
      for (int e = 0; e < 8; ++e) {
        auto task = t->sample_task(rng);
        t->observe(task, task == 0 ? 1.0 : rng.uniform(-0.1, 0.2), task == 0);
      }
      auto s = t->update();
      EXPECT_EQ(s.teacher_reward, -s.mean_return);
      ASSERT_GE(t->distribution().min(), c.p_min - 1e-12) << kind_name(t->kind());
    }
  }
}

TEST(Teachers, ClampedRewardIsReportedPerUpdate) {
  auto c = quiet();
  c.clamp_enabled = true;
  LogitTeacher t(2, c);
  feed(t, {0, 1}, {0.5, 0.5});
  EXPECT_EQ(t.update().teacher_reward, 0.0);
  feed(t, {0, 1}, {0.98, 1.0});
  EXPECT_EQ(t.update().teacher_reward, -0.99);
}

TEST(Warmup, TeacherParametersBitIdenticalAcrossWarmup) {
  auto c = quiet(0.1);
  c.warmup_episodes_per_task = 3;
  c.replay_batch = 1;
  RngStream rng(8);
  LogitTeacher logit(3, c);
  HistoryMlpTeacher mlp(3, c, rng.split("a"));
  MetaTeacher meta(3, c, rng.split("b"));
  const Eigen::VectorXd l0 = logit.logits(), m0 = mlp.net().parameters(), a0 = meta.actor().parameters(),
                        c0 = meta.critic().parameters();
  for (Curriculum* t : std::vector<Curriculum*>{&logit, &mlp, &meta}) {
    std::size_t expect = 0;
    while (t->warmup_active()) {
      auto d = t->distribution();
      auto task = t->sample_task(rng);
      EXPECT_EQ(task, expect);
      EXPECT_EQ(d[task], 1.0);
      t->observe(task, rng.uniform(), false);
      EXPECT_TRUE(t->update().skipped);
      expect = (expect + 1) % 3;
    }
    for (auto count : t->history().lifetime_counts()) EXPECT_GE(count, 3u);
    EXPECT_EQ(t->pending(), 0u);
  }
  EXPECT_EQ(logit.logits(), l0);
  EXPECT_EQ(mlp.net().parameters(), m0);
  EXPECT_EQ(meta.actor().parameters(), a0);
  EXPECT_EQ(meta.critic().parameters(), c0);
}

TEST(HistoryMlp, ZeroNetIsUniformForAnyHistory) {
  HistoryMlpTeacher t(3, quiet(), RngStream(1));
  t.net().parameters().setZero();
  RngStream rng(2);
  for (int i = 0; i < 20; ++i) t.observe(rng.below(3), rng.uniform(), rng.uniform() < 0.5);
  t.update();
  t.net().parameters().setZero();
  t.reload();
  EXPECT_EQ(t.distribution(), Categorical::uniform(3));
}

TEST(HistoryMlp, ZeroNetUpdateMatchesLogitTeacher) {
  auto c = quiet(0.2);
  c.teacher_lr = 0.01;
  HistoryMlpTeacher mlp(3, c, RngStream(1));
  mlp.net().parameters().setZero();
  mlp.reload();
  LogitTeacher logit(3, c);
  feed(mlp, {0, 1, 2, 2}, {1.0, 0.0, 0.3, 0.1});
  feed(logit, {0, 1, 2, 2}, {1.0, 0.0, 0.3, 0.1});
  mlp.update();
  logit.update();
  // With zero hidden activations only the output bias moves, exactly like the logit vector.
  const auto& net = mlp.net();
  auto bias = net.bias(net.layer_count() - 1);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(bias(k), logit.logits()(k), 1e-15);
}

TEST(HistoryMlp, ParameterGradientMatchesFiniteDifferences) {
  RngStream rng(21);
  auto c = quiet();
  c.mean_baseline = false;
  c.teacher_hidden = {6, 5};
  HistoryMlpTeacher t(3, c, rng.split("net"));
  t.net() = tensor::Mlp::random({9, 6, 5, 3}, rng);
  std::vector<double> h(9);
  for (auto& v : h) v = rng.uniform(0, 1);
  const std::vector<std::size_t> tasks{0, 2, 2, 1, 0};
  const std::vector<double> returns{0.9, 0.1, 0.4, -0.2, 0.7};
  std::vector<double> r;
  for (double R : returns) r.push_back(-R);
  auto g = t.parameter_gradient(h, tasks, r);
  // Oracle: -(1/N) sum_i log p(T_i) R_i evaluated through the network.
  auto loss = [&](const tensor::Mlp& net) {
    auto z = tensor::forward(net, std::span<const double>(h));
    return static_cast<double>(objective(std::vector<long double>(z.begin(), z.end()), tasks, r, 0, 0));
  };
  int checked = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    tensor::Mlp p = t.net(), m = t.net();
    const double eps = 1e-5;
    p.parameters()(i) += eps;
    m.parameters()(i) -= eps;
    const double fd = (loss(p) - loss(m)) / (2 * eps);
    if (std::abs(fd) < 1e-8 && std::abs(g(i)) < 1e-8) continue;
    EXPECT_LE(std::abs(fd - g(i)), 1e-4 * std::max(std::abs(fd), std::abs(g(i))) + 1e-9) << i;
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(Replay, EvictsOldestBeyondCapacity) {
  ReplayBuffer b(3);
  for (int i = 0; i < 4; ++i) b.push({{}, {}, static_cast<double>(i), {}});
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].reward, 1.0);
  EXPECT_EQ(b[2].reward, 3.0);
}

TEST(MetaTeacher, SkipsUntilBufferHoldsBatch) {
  auto c = quiet();
  c.replay_batch = 3;
  c.replay_capacity = 10;
  MetaTeacher t(2, c, RngStream(1));
  for (int i = 0; i < 2; ++i) {
    feed(t, {0, 1}, {0.2, 0.3});
    auto s = t.update();
    EXPECT_TRUE(s.skipped);
    EXPECT_FALSE(s.note.empty());
  }
  feed(t, {0, 1}, {0.2, 0.3});
  EXPECT_TRUE(t.update().applied);
  EXPECT_EQ(t.replay().size(), 3u);
}

TEST(MetaTeacher, ZeroCriticLeavesActorUnchanged) {
  auto c = quiet(0.0);
  c.replay_batch = 2;
  MetaTeacher t(3, c, RngStream(4));
  t.critic().parameters().setZero();
  const Eigen::VectorXd before = t.actor().parameters();
  RngStream rng(2);
  for (int i = 0; i < 5; ++i) {
    MetaTransition tr{std::vector<double>(9, 0.1), {0.2, 0.3, 0.5}, 0.0, std::vector<double>(9, 0.2)};
    t.learn_transition(tr);
  }
  EXPECT_EQ(t.actor().parameters(), before);
}

TEST(MetaTeacher, CriticTdErrorVanishesUnderZeroReward) {
  auto c = quiet(0.0);
  c.replay_batch = 8;
  c.replay_capacity = 64;
  MetaTeacher t(3, c, RngStream(6));
  RngStream rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> s(9), s2(9);
    for (auto& v : s) v = rng.uniform();
    for (auto& v : s2) v = rng.uniform();
    t.learn_transition({s, t.policy(s).probs(), 0.0, s2});
  }
  EXPECT_LT(t.last_td_error(), 1e-4);

  MetaTeacher zero(3, c, RngStream(6));
  zero.actor().parameters().setZero();
  zero.critic().parameters().setZero();
  for (int i = 0; i < 50; ++i) zero.learn_transition({std::vector<double>(9, 0.5), {0.3, 0.3, 0.4}, 0.0, std::vector<double>(9, 0.5)});
  EXPECT_EQ(zero.last_td_error(), 0.0);
}
