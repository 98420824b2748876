#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hap/core/rng.hpp"
#include "hap/tensor/adam.hpp"
#include "hap/tensor/categorical.hpp"
#include "hap/tensor/checkpoint.hpp"
#include "hap/tensor/mlp.hpp"

using namespace hap;
using namespace hap::tensor;

namespace {

// Independent forward oracle: plain nested loops in long double over the flat
// parameter layout (per layer: column-major out x in weights, then bias).
std::vector<long double> oracle_forward(const Mlp& net, const std::vector<double>& x) {
  const auto& sizes = net.layer_sizes();
  const double* p = net.parameters().data();
  std::vector<long double> a(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    std::vector<long double> z(out, 0.0L);
    for (std::size_t o = 0; o < out; ++o) {
      long double s = p[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += static_cast<long double>(p[off + i * out + o]) * a[i];
      z[o] = (l + 2 < sizes.size()) ? std::max(0.0L, s) : s;
    }
    off += in * out + out;
    a = std::move(z);
  }
  return a;
}

std::vector<double> random_vector(RngStream& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

double dot_output(const Mlp& net, const std::vector<double>& x, const std::vector<double>& g) {
  auto y = forward(net, std::span<const double>(x));
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * g[i];
  return s;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  Mlp net({3, 5, 2});
  std::vector<double> x{1.0, -2.0, 3.5};
  auto y = forward(net, std::span<const double>(x));
  ASSERT_EQ(y.size(), 2u);
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, IdentityLayerReturnsInput) {
  Mlp net({3, 3});
  net.weight(0).setIdentity();
  std::vector<double> x{0.5, 2.0, 7.0};
  auto y = forward(net, std::span<const double>(x));
  EXPECT_EQ(y, x);
}

TEST(Mlp, ForwardMatchesLongDoubleOracle) {
  RngStream rng(7);
  Mlp net = Mlp::random({3, 4, 2}, rng);
  auto x = random_vector(rng, 3);
  auto y = forward(net, std::span<const double>(x));
  auto ref = oracle_forward(net, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], static_cast<double>(ref[i]), 1e-12);
}

TEST(Mlp, DimensionMismatchIsContractViolation) {
  Mlp net({3, 2});
  std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(forward(net, std::span<const double>(x)), ContractViolation);
  EXPECT_THROW(Mlp({3}), ContractViolation);
  EXPECT_THROW(Mlp({3, 0, 2}), ContractViolation);
}

TEST(Mlp, SparseAndDenseForwardAgree) {
  RngStream rng(3);
  Mlp net = Mlp::random({6, 5, 3}, rng);
  SparseVec s;
  s.push(1, 1.0);
  s.push(4, 0.5);
  const auto dense = s.dense(6);
  Matrix xd = Eigen::Map<const Vector>(dense.data(), 6);
  std::vector<SparseVec> batch{s};
  Matrix a = forward(net, xd);
  Matrix b = forward(net, std::span<const SparseVec>(batch));
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);

  MlpCache cd, cs;
  forward(net, xd, &cd);
  forward(net, std::span<const SparseVec>(batch), &cs);
  Matrix g = Matrix::Ones(3, 1);
  Vector gd, gs;
  backward(net, cd, g, gd);
  backward(net, cs, g, gs);
  EXPECT_LT((gd - gs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, ZeroOutputGradGivesZeroGradients) {
  RngStream rng(11);
  Mlp net = Mlp::random({4, 6, 3}, rng);
  auto x = random_vector(rng, 4);
  std::vector<double> g(3, 0.0);
  Vector grads = gradients(net, x, g);
  EXPECT_EQ(grads.size(), static_cast<Eigen::Index>(net.parameter_count()));
  EXPECT_EQ(grads.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, ScalarLinearWeightGradIsInput) {
  Mlp net({1, 1});
  net.weight(0)(0, 0) = 0.3;
  std::vector<double> x{2.5}, g{1.0};
  Vector grads = gradients(net, x, g);
  EXPECT_DOUBLE_EQ(grads(0), 2.5);
  EXPECT_DOUBLE_EQ(grads(1), 1.0);
}

TEST(Backward, MissingCacheIsContractViolation) {
  Mlp net({2, 2});
  MlpCache cache;
  Vector grads;
  EXPECT_THROW(backward(net, cache, Matrix::Ones(2, 1), grads), ContractViolation);
}

TEST(Backward, LinearInOutputGrad) {
  RngStream rng(5);
  Mlp net = Mlp::random({3, 4, 2}, rng);
  auto x = random_vector(rng, 3);
  std::vector<double> g1{1.0, -0.5}, g2{0.25, 2.0}, g12{1.0 * 3 + 0.25, -0.5 * 3 + 2.0};
  Vector a = gradients(net, x, g1), b = gradients(net, x, g2), c = gradients(net, x, g12);
  EXPECT_LT((3 * a + b - c).cwiseAbs().maxCoeff(), 1e-12);
}

// Property: 100 random (net, input) pairs, analytic vs central differences (h = 1e-5).
TEST(Backward, MatchesFiniteDifferencesOnRandomNets) {
  RngStream rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> sizes{1 + rng.below(5)};
    const auto depth = 1 + rng.below(3);
    for (std::uint64_t d = 0; d < depth; ++d) sizes.push_back(1 + rng.below(6));
    Mlp net = Mlp::random(sizes, rng);
    auto x = random_vector(rng, sizes.front(), 2.0);
    auto g = random_vector(rng, sizes.back());
    Vector analytic = gradients(net, x, g);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      Mlp plus = net, minus = net;
      plus.parameters()(i) += h;
      minus.parameters()(i) -= h;
      const double fd = (dot_output(plus, x, g) - dot_output(minus, x, g)) / (2 * h);
      // ReLU kinks make the difference quotient meaningless within h of zero.
      bool near_kink = false;
      {
        MlpCache cache;
        Matrix xm = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
        forward(net, xm, &cache);
        for (const auto& hmat : cache.hidden)
          for (Eigen::Index k = 0; k < hmat.size(); ++k)
            if (hmat(k) > 0 && hmat(k) < 1e-4) near_kink = true;
      }
      if (near_kink) continue;
      const double scale = std::max({1.0, std::abs(fd), std::abs(analytic(i))});
      EXPECT_LE(std::abs(fd - analytic(i)) / scale, 1e-4) << "trial " << trial << " param " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  RngStream rng(9);
  Mlp net = Mlp::random({4, 8, 3}, rng);
  auto x = random_vector(rng, 4);
  auto g = random_vector(rng, 3);
  MlpCache cache;
  Matrix xm = Eigen::Map<const Vector>(x.data(), 4);
  forward(net, xm, &cache);
  Vector grads;
  Matrix input_grad;
  backward(net, cache, Eigen::Map<const Vector>(g.data(), 3), grads, &input_grad);
  for (int i = 0; i < 4; ++i) {
    auto xp = x, xm2 = x;
    xp[i] += 1e-6;
    xm2[i] -= 1e-6;
    const double fd = (dot_output(net, xp, g) - dot_output(net, xm2, g)) / 2e-6;
    EXPECT_NEAR(input_grad(i, 0), fd, 1e-6);
  }
}

TEST(ClipGradNorm, ScalesToMaxAndReportsOriginalNorm) {
  Vector g(2);
  g << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g.norm(), 1.0, 1e-12);
  Vector h(2);
  h << 3.0, 4.0;
  clip_grad_norm(h, 0.0);
  EXPECT_DOUBLE_EQ(h(1), 4.0);
}

TEST(Softmax, UniformForEqualLogits) {
  std::vector<double> z(4, 0.0);
  auto p = softmax(z);
  for (double v : p.probs()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ShiftInvariant) {
  std::vector<double> a{0.0, 1.0};
  auto pa = softmax(a);
  for (double c : {-700.0, -3.5, 12.0, 1e4}) {
    std::vector<double> b{c, c + 1.0};
    auto pb = softmax(b);
    EXPECT_NEAR(pb[0], pa[0], 1e-15);
    EXPECT_NEAR(pb[1], pa[1], 1e-15);
  }
}

TEST(Softmax, ClosedFormTwoOutcomes) {
  std::vector<double> z{1.0, 0.0};
  auto p = softmax(z);
  const long double e = std::exp(1.0L);
  EXPECT_NEAR(p[0], static_cast<double>(e / (1 + e)), 1e-15);
  EXPECT_NEAR(p[1], static_cast<double>(1 / (1 + e)), 1e-15);
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
  std::vector<double> empty;
  EXPECT_THROW(softmax(empty), ContractViolation);
  std::vector<double> bad{0.0, std::nan("")};
  EXPECT_THROW(softmax(bad), ContractViolation);
}

TEST(Categorical, ValidatesInvariants) {
  EXPECT_THROW(Categorical(std::vector<double>{}), ContractViolation);
  EXPECT_THROW(Categorical(std::vector<double>{0.5, 0.6}), ContractViolation);
  EXPECT_THROW(Categorical(std::vector<double>{1.5, -0.5}), ContractViolation);
  EXPECT_NO_THROW(Categorical(std::vector<double>{0.3, 0.7}));
}

TEST(Entropy, OneHotAndUniform) {
  EXPECT_EQ(entropy(Categorical::one_hot(5, 2)), 0.0);
  EXPECT_NEAR(entropy(Categorical::uniform(4)), std::log(4.0), 1e-15);
}

TEST(Entropy, MatchesDirectEvaluation) {
  const long double a = 0.7311L, b = 0.2689L;
  const long double ref = -(a * std::log(a) + b * std::log(b));
  EXPECT_NEAR(entropy(Categorical({0.7311, 0.2689})), static_cast<double>(ref), 1e-14);
}

TEST(Entropy, MaximisedAtEqualLogits) {
  RngStream rng(17);
  std::vector<double> flat(6, 0.3);
  const double top = entropy(softmax(flat));
  for (int t = 0; t < 200; ++t) {
    auto z = flat;
    for (auto& v : z) v += rng.uniform(-1.0, 1.0);
    const double h = entropy(softmax(z));
    EXPECT_LE(h, top + 1e-12);
    EXPECT_GE(h, 0.0);
  }
}

TEST(Sample, OneHotAlwaysSameIndex) {
  RngStream rng(1);
  auto d = Categorical::one_hot(4, 3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample(d, rng), 3u);
}

TEST(Sample, UniformFrequency) {
  RngStream rng(99);
  auto d = Categorical::uniform(2);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample(d, rng) == 0;
  EXPECT_NEAR(zeros / 100000.0, 0.5, 0.01);
}

TEST(Sample, DeterministicForFixedSeed) {
  auto d = Categorical({0.1, 0.2, 0.3, 0.4});
  RngStream a(42), b(42);
  for (int i = 0; i < 500; ++i) EXPECT_EQ(sample(d, a), sample(d, b));
}

TEST(Adam, ZeroGradLeavesParams) {
  Vector p(3);
  p << 1, 2, 3;
  AdamState s(3, 0.1);
  adam_step(p, Vector::Zero(3), s);
  EXPECT_EQ(p, (Vector(3) << 1, 2, 3).finished());
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p(1);
  p << 0.0;
  AdamState s(1, 0.1);
  adam_step(p, Vector::Ones(1), s);
  EXPECT_NEAR(p(0), -0.1, 1e-8);
}

TEST(Adam, TwoStepsMatchScalarReference) {
  long double theta = 0.5L, m = 0, v = 0;
  const long double lr = 0.01L, b1 = 0.9L, b2 = 0.999L, eps = 1e-8L, g = 0.3L;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const long double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  Vector p(1);
  p << 0.5;
  AdamState s(1, 0.01);
  adam_step(p, Vector::Constant(1, 0.3), s);
  adam_step(p, Vector::Constant(1, 0.3), s);
  EXPECT_NEAR(p(0), static_cast<double>(theta), 1e-10);
  EXPECT_EQ(s.step, 2u);
}

TEST(Adam, ShapeMismatchIsContractViolation) {
  Vector p(2);
  AdamState s(3, 0.1);
  EXPECT_THROW(adam_step(p, Vector::Zero(2), s), ContractViolation);
}

TEST(Rng, SplitStreamsAreIndependentOfOrder) {
  RngStream root(123);
  auto a1 = root.split("teacher").next_u64();
  auto b1 = root.split("student").next_u64();
  RngStream root2(123);
  auto b2 = root2.split("student").next_u64();
  auto a2 = root2.split("teacher").next_u64();
  EXPECT_EQ(a1, a2);
  EXPECT_EQ(b1, b2);
  EXPECT_NE(a1, b1);
}

TEST(Rng, SeedTagsSeparateTrainAndEval) {
  const auto t = tagged_seed(77, SeedTag::kTrain), e = tagged_seed(77, SeedTag::kEval);
  EXPECT_NE(t, e);
  EXPECT_EQ(seed_tag(t), SeedTag::kTrain);
  EXPECT_EQ(seed_tag(e), SeedTag::kEval);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  RngStream rng(4);
  Checkpoint c;
  c.seed = 99;
  c.nets.push_back({"actor", Mlp::random({5, 7, 3}, rng)});
  c.arrays.push_back({"logits", {0.1, -1e-300, 3.0}});
  std::stringstream ss;
  write_checkpoint(ss, c);
  EXPECT_EQ(ss.str().rfind(kCheckpointMagic, 0), 0u);
  auto back = read_checkpoint(ss);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_TRUE(back.net("actor") == c.net("actor"));
  EXPECT_EQ(*back.array("logits"), c.arrays[0].values);
}

TEST(Checkpoint, RejectsWrongMagicAndTruncation) {
  std::stringstream bad("NOTCKPT\n");
  EXPECT_THROW(read_checkpoint(bad), FormatError);
  RngStream rng(4);
  Checkpoint c;
  c.nets.push_back({"n", Mlp::random({2, 2}, rng)});
  std::stringstream ss;
  write_checkpoint(ss, c);
  auto text = ss.str();
  std::stringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_checkpoint(cut), FormatError);
}
