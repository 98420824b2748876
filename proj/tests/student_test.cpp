#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hap/core/rng.hpp"
#include "hap/envs/nav.hpp"
#include "hap/student/policy.hpp"
#include "hap/tensor/checkpoint.hpp"

using namespace hap;
using namespace hap::student;
using envs::Observation;
using envs::Trajectory;

namespace {

// Two-state chain used for exact gradient checks: states are the two cells of a 1x2 grid.
envs::ObservationEncoder toy_encoder() {
  envs::ObservationEncoder e;
  e.rows = 1;
  e.cols = 2;
  e.code_count = 1;
  e.task_count = 1;
  return e;
}

Observation toy_obs(int state) {
  Observation o;
  o.rows = 1;
  o.cols = 2;
  o.grid = {0, 0};
  o.agent = {0, state};
  return o;
}

Trajectory toy_traj(std::vector<std::pair<int, double>> moves, double gamma = 1.0) {
  Trajectory t;
  t.gamma = gamma;
  t.terminated = true;
  int state = 0;
  for (auto [a, r] : moves) {
    t.steps.push_back({toy_obs(state), a, r, 0.0});
    t.discounted_return += r;
    state = 1;
  }
  t.final_obs = toy_obs(state);
  return t;
}

StudentConfig bare(std::vector<std::size_t> hidden = {}) {
  StudentConfig c;
  c.hidden = std::move(hidden);
  c.ent_coef = 0.0;
  c.max_grad_norm = 0.0;
  c.actor_output_scale = 1.0;
  c.gae_lambda = 1.0;
  return c;
}

double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }

std::vector<Trajectory> nav_batch(StudentPolicy& policy, std::uint64_t seed, int episodes) {
  envs::NavConfig nc;
  nc.step_cap = 6;
  envs::NavEnv env(nc);
  RngStream rng(seed);
  std::vector<Trajectory> out;
  for (int i = 0; i < episodes; ++i)
    out.push_back(rollout(env, policy, static_cast<std::size_t>(i) % 4, seed * 100 + static_cast<std::uint64_t>(i), rng));
  return out;
}

// Independent actor loss: -(1/N) sum logpi(a) A - c (1/N) sum H, with A from the critic-only advantages.
double actor_loss(const StudentPolicy& p, const std::vector<Trajectory>& batch,
                  const std::vector<AdvantageBatch>& adv) {
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

double critic_loss(const StudentPolicy& p, const std::vector<Trajectory>& batch, const std::vector<AdvantageBatch>& adv) {
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

void expect_fd_match(const Eigen::VectorXd& analytic, Eigen::VectorXd& params, const std::function<double()>& loss,
                     int* checked) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params(i), h = 1e-5;
    params(i) = keep + h;
    const double up = loss();
    params(i) = keep - h;
    const double down = loss();
    params(i) = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max(std::abs(fd), std::abs(analytic(i)));
    if (scale < 1e-7) continue;
    EXPECT_LE(std::abs(fd - analytic(i)), 1e-4 * scale + 1e-8) << "param " << i;
    ++*checked;
  }
}

}  // namespace

TEST(Gae, LambdaOneIsDiscountedReturnMinusValue) {
  RngStream rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> r(n), v(n);
    for (auto& x : r) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const double boot = rng.uniform() < 0.5 ? 0.0 : rng.uniform(-1, 1), gamma = rng.uniform(0.5, 1.0);
    auto out = compute_gae(r, v, boot, gamma, 1.0);
    for (std::size_t t = 0; t < n; ++t) {
      double g = 0, d = 1;
      for (std::size_t k = t; k < n; ++k, d *= gamma) g += d * r[k];
      g += d * boot;
      EXPECT_NEAR(out.advantages[t], g - v[t], 1e-9);
      EXPECT_NEAR(out.returns[t], g, 1e-9);
    }
  }
}

TEST(Gae, RecomputableFromDeltas) {
  RngStream rng(2);
  const std::size_t n = 12;
  std::vector<double> r(n), v(n);
  for (auto& x : r) x = rng.uniform(-1, 1);
  for (auto& x : v) x = rng.uniform(-1, 1);
  const double gamma = 0.99, lambda = 0.95, boot = 0.3;
  auto out = compute_gae(r, v, boot, gamma, lambda);
  ASSERT_EQ(out.advantages.size(), n);
  for (std::size_t t = 0; t < n; ++t) {
    double a = 0, w = 1;
    for (std::size_t k = t; k < n; ++k, w *= gamma * lambda) {
      const double next = k + 1 < n ? v[k + 1] : boot;
      a += w * (r[k] + gamma * next - v[k]);
    }
    EXPECT_NEAR(out.advantages[t], a, 1e-9);
  }
  EXPECT_THROW((void)compute_gae(r, std::vector<double>(3), 0, gamma, lambda), ContractViolation);
}

TEST(Act, ZeroActorIsUniformAndGreedyTakesLowestIndex) {
  StudentPolicy p(toy_encoder(), 3, bare({4}), RngStream(1));
  p.actor().parameters().setZero();
  auto d = p.action_distribution(toy_obs(0));
  for (auto v : d.probs()) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
  EXPECT_EQ(p.act_greedy(toy_obs(0)), 0);
  const std::vector<double> z{2, 1, 1, 1}, tie{0.5, 3, 3, 1};
  EXPECT_EQ(StudentPolicy::greedy_index(z), 0);
  EXPECT_EQ(StudentPolicy::greedy_index(tie), 1);
}

TEST(Act, FixedSeedReproducesActions) {
  StudentPolicy p(toy_encoder(), 4, bare({8}), RngStream(3));
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    double la = 0, lb = 0;
    EXPECT_EQ(p.act(toy_obs(i % 2), a, &la), p.act(toy_obs(i % 2), b, &lb));
    EXPECT_EQ(la, lb);
  }
}

TEST(A2C, ZeroAdvantagesLeaveActorUnchanged) {
  StudentPolicy p(toy_encoder(), 2, bare({4}), RngStream(5));
  p.critic().parameters().setZero();
  const Eigen::VectorXd before = p.actor().parameters();
  p.update_a2c({toy_traj({{0, 0.0}, {1, 0.0}}), toy_traj({{1, 0.0}})});
  EXPECT_EQ(p.actor().parameters(), before);
}

TEST(A2C, EmptyBatchIsContractViolation) {
  StudentPolicy p(toy_encoder(), 2, bare(), RngStream(5));
  EXPECT_THROW(p.update_a2c({}), ContractViolation);
}

TEST(A2C, SingleStepMatchesHandDerivedReinforceStep) {
  auto cfg = bare();
  cfg.policy_lr = 0.01;
  StudentPolicy p(toy_encoder(), 2, cfg, RngStream(7));
  p.critic().parameters().setZero();
  const auto tr = toy_traj({{1, 0.7}});
  // Linear actor: z = W x + b with x the dense encoding.
  const auto x = p.encoder().encode_dense(tr.steps[0].obs);
  const auto z = tensor::forward(p.actor(), std::span<const double>(x));
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
  const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
  const double dz[2] = {-0.7 * (0.0 - p0), -0.7 * (1.0 - p1)};
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.actor().parameter_count()));
  for (std::size_t j = 0; j < x.size(); ++j)
    for (int o = 0; o < 2; ++o) g(static_cast<Eigen::Index>(j * 2 + static_cast<std::size_t>(o))) = dz[o] * x[j];
  g(static_cast<Eigen::Index>(2 * x.size())) = dz[0];
  g(static_cast<Eigen::Index>(2 * x.size() + 1)) = dz[1];

  auto grads = p.loss_gradients({tr}, false);
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(grads.actor(i), g(i), 1e-12);

  const Eigen::VectorXd before = p.actor().parameters();
  p.update_a2c({tr});
  const Eigen::VectorXd delta = p.actor().parameters() - before;
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(delta(i), -0.01 * g(i) / (std::abs(g(i)) + 1e-8), 1e-8);
}

TEST(A2C, ExpectedUpdateMatchesFiniteDifferenceAscentOnToyMdp) {
  // s0: a0 -> s1 (r 0), a1 -> end (r 0.2); s1: a0 -> end (r 1), a1 -> end (r 0).
  RngStream seeds(17);
  for (int trial = 0; trial < 20; ++trial) {
    StudentPolicy p(toy_encoder(), 2, bare({6}), seeds.split(static_cast<std::uint64_t>(trial)));
    p.critic().parameters().setZero();
    auto expected_return = [&] {
      auto d0 = p.action_distribution(toy_obs(0)), d1 = p.action_distribution(toy_obs(1));
      return d0[1] * 0.2 + d0[0] * d1[0] * 1.0;
    };
    const auto d0 = p.action_distribution(toy_obs(0)), d1 = p.action_distribution(toy_obs(1));
    struct Branch {
      Trajectory tr;
      double prob;
    };
    std::vector<Branch> branches{{toy_traj({{1, 0.2}}), d0[1]},
                                 {toy_traj({{0, 0.0}, {0, 1.0}}), d0[0] * d1[0]},
                                 {toy_traj({{0, 0.0}, {1, 0.0}}), d0[0] * d1[1]}};
    Eigen::VectorXd ascent = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.actor().parameter_count()));
    for (const auto& b : branches)
      ascent -= b.prob * static_cast<double>(b.tr.length()) * p.loss_gradients({b.tr}, false).actor;

    Eigen::VectorXd fd(ascent.size());
    auto& params = p.actor().parameters();
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double keep = params(i), h = 1e-6;
      params(i) = keep + h;
      const double up = expected_return();
      params(i) = keep - h;
      const double down = expected_return();
      params(i) = keep;
      fd(i) = (up - down) / (2 * h);
    }
    const double cosine = dot(ascent, fd) / (ascent.norm() * fd.norm());
    EXPECT_LE(1.0 - cosine, 1e-3);
  }
}

TEST(Gradients, ActorAndCriticMatchFiniteDifferences) {
  auto cfg = bare({6, 5});
  cfg.ent_coef = 0.05;
  envs::NavEnv nav;
  cfg.gamma = 0.9;
  StudentPolicy q(nav.encoder(), 4, cfg, RngStream(10));
  auto batch = nav_batch(q, 3, 3);
  for (auto& tr : batch) tr.terminated = true;  // returns independent of the critic
  auto adv = q.advantages(batch);
  auto g = q.loss_gradients(batch, false);
  int checked = 0;
  expect_fd_match(g.actor, q.actor().parameters(), [&] { return actor_loss(q, batch, adv); }, &checked);
  expect_fd_match(g.critic, q.critic().parameters(), [&] { return critic_loss(q, batch, q.advantages(batch)); },
                  &checked);
  EXPECT_GT(checked, 100);
}

TEST(Gradients, EmbeddingTablesMatchFiniteDifferences) {
  auto cfg = bare({5});
  cfg.embedding_dim = 3;
  cfg.ent_coef = 0.02;
  envs::NavEnv nav;
  StudentPolicy q(nav.encoder(), 4, cfg, RngStream(12));
  auto batch = nav_batch(q, 5, 4);
  for (auto& tr : batch) tr.terminated = true;
  auto adv = q.advantages(batch);
  auto g = q.loss_gradients(batch, false);
  ASSERT_EQ(g.actor_embedding.size(), 12);
  int checked = 0;
  expect_fd_match(g.actor_embedding, q.actor_embedding(), [&] { return actor_loss(q, batch, adv); }, &checked);
  expect_fd_match(g.critic_embedding, q.critic_embedding(), [&] { return critic_loss(q, batch, q.advantages(batch)); },
                  &checked);
  EXPECT_GE(checked, 12);
}

TEST(Ppo, RatioOneMatchesA2cGradient) {
  auto cfg = bare({8});
  cfg.ent_coef = 0.01;
  envs::NavEnv nav;
  StudentPolicy q(nav.encoder(), 4, cfg, RngStream(14));
  auto batch = nav_batch(q, 7, 4);
  auto a2c = q.loss_gradients(batch, false);
  auto ppo = q.loss_gradients(batch, true);
  EXPECT_EQ(ppo.report.clip_fraction, 0.0);
  for (Eigen::Index i = 0; i < a2c.actor.size(); ++i)
    EXPECT_NEAR(ppo.actor(i), a2c.actor(i), 1e-12 * (1 + std::abs(a2c.actor(i))));
  EXPECT_EQ(ppo.critic, a2c.critic);
}

TEST(Ppo, SaturatedClipGivesZeroGradient) {
  auto cfg = bare({4});
  StudentPolicy p(toy_encoder(), 2, cfg, RngStream(15));
  p.critic().parameters().setZero();
  auto tr = toy_traj({{0, 1.0}});
  double logp = std::log(p.action_distribution(tr.steps[0].obs)[0]);
  tr.steps[0].logp = logp - 0.5;  // ratio e^0.5 > 1 + eps with positive advantage
  auto g = p.loss_gradients({tr}, true);
  EXPECT_EQ(g.report.clip_fraction, 1.0);
  EXPECT_EQ(g.actor.norm(), 0.0);
  tr.steps[0].logp = logp + 0.5;  // ratio below 1 - eps with positive advantage still gets gradient
  EXPECT_GT(p.loss_gradients({tr}, true).actor.norm(), 0.0);
}

TEST(Update, ReportsPreClipNormAndRunsBothAlgorithms) {
  StudentConfig cfg;
  cfg.hidden = {16};
  envs::NavEnv nav;
  StudentPolicy q(nav.encoder(), 4, cfg, RngStream(4));
  auto batch = nav_batch(q, 11, 4);
  const double raw = q.loss_gradients(batch, false).critic.norm();
  auto rep = q.update_a2c(batch);
  EXPECT_NEAR(rep.critic_grad_norm, raw, 1e-12);
  auto ppo = q.update_ppo(batch);
  EXPECT_GT(ppo.steps, 0u);
}

TEST(Evaluate, UntrainedPolicyFailsHardestNavTask) {
  envs::NavEnv nav;
  StudentPolicy q(nav.encoder(), 4, StudentConfig{}, RngStream(1));
  const auto task = nav.tasks().index_of("extremely_hard");
  EXPECT_LE(evaluate(nav, q, task, 100, 1), 0.05);
}

TEST(Evaluate, OracleControllerSucceedsAndZeroEpisodesRejected) {
  envs::NavEnv nav;
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(evaluate(nav, oracle_actor(), t, 20, 3), 1.0);
  EXPECT_THROW((void)evaluate(nav, oracle_actor(), 0, 0, 3), ContractViolation);
}

TEST(Evaluate, SeedsAreEvalTagged) {
  for (int i = 0; i < 20; ++i) EXPECT_EQ(seed_tag(eval_seed(5, 2, i)), SeedTag::kEval);
  EXPECT_NE(eval_seed(5, 2, 0), eval_seed(5, 2, 1));
}

TEST(Checkpoint, StudentRoundTripIsBitExact) {
  auto cfg = bare({7});
  cfg.embedding_dim = 2;
  envs::NavEnv nav;
  StudentPolicy a(nav.encoder(), 4, cfg, RngStream(1)), b(nav.encoder(), 4, cfg, RngStream(2));
  std::stringstream buf;
  tensor::write_checkpoint(buf, a.to_checkpoint(77));
  auto ck = tensor::read_checkpoint(buf);
  EXPECT_EQ(ck.seed, 77u);
  b.load_checkpoint(ck);
  EXPECT_EQ(b.actor().parameters(), a.actor().parameters());
  EXPECT_EQ(b.critic().parameters(), a.critic().parameters());
  EXPECT_EQ(b.actor_embedding(), a.actor_embedding());
  StudentPolicy other(nav.encoder(), 4, bare({3}), RngStream(1));
  EXPECT_THROW(other.load_checkpoint(ck), FormatError);
}
