#include <gtest/gtest.h>

#include <cmath>

#include "ags/diffnet.hpp"
#include "support.hpp"

using namespace ags;
using namespace ags::diffnet;
using ags::testing::central_difference;
using ags::testing::max_relative_error;

namespace {

RowMatrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n01;
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

// sum(forward(x) .* w) for fixed weights w.
double weighted_output(const NetworkSpec& spec, const Vector& params, const RowMatrix& x, const RowMatrix& w) {
  RowMatrix y = forward(spec, std::span<const double>(params.data(), static_cast<std::size_t>(params.size())), x);
  return (y.array() * w.array()).sum();
}

}  // namespace

TEST(Network, BackwardMatchesFiniteDifferences) {
  for (Activation out : {Activation::Identity, Activation::Sigmoid, Activation::Relu}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Rng rng(seed);
      const auto spec = mlp(5, {7, 4}, 3, out);
      const Vector params = init_params(spec, rng);
      const RowMatrix x = random_matrix(6, 5, rng);
      const RowMatrix w = random_matrix(6, 3, rng);
      Tape tape;
      std::span<const double> ps(params.data(), static_cast<std::size_t>(params.size()));
      forward(spec, ps, x, &tape);
      const auto g = backward(spec, ps, tape, w);
      const Vector fd = central_difference([&](const Vector& p) { return weighted_output(spec, p, x, w); }, params);
      EXPECT_LT(max_relative_error(g.params, fd), 1e-4) << to_string(out) << " seed " << seed;
      Vector xin = Eigen::Map<const Vector>(x.data(), x.size());
      const Vector fdx = central_difference(
          [&](const Vector& xv) {
            RowMatrix xm = Eigen::Map<const RowMatrix>(xv.data(), x.rows(), x.cols());
            return weighted_output(spec, params, xm, w);
          },
          xin);
      Vector gx = Eigen::Map<const Vector>(g.input.data(), g.input.size());
      EXPECT_LT(max_relative_error(gx, fdx), 1e-4);
    }
  }
}

TEST(Network, TapeIsSingleUse) {
  Rng rng(1);
  const auto spec = mlp(2, {3}, 1, Activation::Identity);
  const Vector params = init_params(spec, rng);
  std::span<const double> ps(params.data(), static_cast<std::size_t>(params.size()));
  Tape tape;
  RowMatrix x = RowMatrix::Ones(1, 2);
  forward(spec, ps, x, &tape);
  RowMatrix up = RowMatrix::Ones(1, 1);
  backward(spec, ps, tape, up);
  EXPECT_THROW(backward(spec, ps, tape, up), ContractViolation);
}

TEST(Network, ShapeErrors) {
  Rng rng(1);
  const auto spec = mlp(2, {3}, 1, Activation::Identity);
  const Vector params = init_params(spec, rng);
  std::span<const double> ps(params.data(), static_cast<std::size_t>(params.size()));
  EXPECT_THROW(forward(spec, ps, RowMatrix::Ones(1, 3)), InvalidArgument);
  EXPECT_THROW(forward(spec, ps.first(3), RowMatrix::Ones(1, 2)), InvalidArgument);
}

TEST(Network, ParameterCountAndLayout) {
  const auto spec = mlp(3, {4}, 2, Activation::Sigmoid);
  EXPECT_EQ(spec.parameter_count(), 4u * 3 + 4 + 2 * 4 + 2);
  // Identity single layer y = W x + b with W row-major.
  NetworkSpec lin{2, {{1, Activation::Identity}}};
  Vector p(3);
  p << 2.0, -1.0, 0.5;
  std::vector<double> x{3.0, 4.0};
  const Vector y = forward(lin, std::span<const double>(p.data(), 3), std::span<const double>(x));
  EXPECT_DOUBLE_EQ(y[0], 2.0 * 3.0 - 4.0 + 0.5);
}

TEST(MaskedSoftmax, ZeroOffMaskAndNormalized) {
  const std::vector<double> z{1.0, 2.0, 3.0, 4.0};
  const auto p = masked_softmax(z, {true, false, true, false});
  EXPECT_EQ(p[1], 0.0);
  EXPECT_EQ(p[3], 0.0);
  const double e1 = std::exp(1.0), e3 = std::exp(3.0);
  EXPECT_NEAR(p[0], e1 / (e1 + e3), 1e-15);
  EXPECT_NEAR(p[2], e3 / (e1 + e3), 1e-15);
  EXPECT_THROW(masked_softmax(z, {false, false, false, false}), EmptySupport);
  const auto big = masked_softmax(std::vector<double>{1000.0, 1001.0}, {true, true});
  EXPECT_NEAR(big[0] + big[1], 1.0, 1e-15);
}

TEST(MaskedSoftmax, LogProbAndEntropyGradients) {
  Rng rng(5);
  std::normal_distribution<double> n01;
  std::vector<double> z(6);
  for (auto& v : z) v = n01(rng);
  const std::vector<bool> mask{true, true, false, true, true, false};
  const auto p = masked_softmax(z, mask);
  const auto lg = log_softmax_grad(p, 3);
  const auto eg = entropy_grad(p);
  const Vector z0 = ags::testing::to_vector(z);
  auto logp = [&](const Vector& zz) {
    std::vector<double> v(zz.data(), zz.data() + zz.size());
    return std::log(masked_softmax(v, mask)[3]);
  };
  auto ent = [&](const Vector& zz) {
    std::vector<double> v(zz.data(), zz.data() + zz.size());
    double h = 0.0;
    for (double q : masked_softmax(v, mask))
      if (q > 0.0) h -= q * std::log(q);
    return h;
  };
  const Vector fd1 = central_difference(logp, z0), fd2 = central_difference(ent, z0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask[i]) continue;  // off-mask logits do not enter the softmax
    EXPECT_NEAR(lg[i], fd1[static_cast<Eigen::Index>(i)], 1e-8);
    EXPECT_NEAR(eg[i], fd2[static_cast<Eigen::Index>(i)], 1e-8);
  }
}

TEST(Sampling, FrequenciesAndArgmax) {
  const std::vector<double> p{0.2, 0.0, 0.5, 0.3};
  Rng rng(9);
  std::vector<int> hits(4, 0);
  const int n = 40000;
  for (int k = 0; k < n; ++k) ++hits[sample_categorical(p, rng)];
  EXPECT_EQ(hits[1], 0);
  for (int i : {0, 2, 3}) {
    const double se = std::sqrt(p[i] * (1 - p[i]) / n);
    EXPECT_NEAR(hits[i] / double(n), p[i], 4 * se);
  }
  EXPECT_EQ(argmax({0.0, 0.4, 0.4, 0.2}), 1u);
  EXPECT_THROW(argmax({0.0, 0.0}), EmptySupport);
  EXPECT_THROW(sample_categorical(std::vector<double>{0.0, 0.0}, rng), EmptySupport);
}

TEST(Bce, ValueAndGradient) {
  const std::vector<double> p{0.9, 0.2, 0.6, 0.5}, y{1, 0, 0, 1};
  const std::vector<bool> mask{true, true, true, false};
  const auto r = bce(p, y, mask);
  const double expect = -(std::log(0.9) + std::log(0.8) + std::log(0.4)) / 3.0;
  EXPECT_NEAR(r.loss, expect, 1e-15);
  EXPECT_EQ(r.grad[3], 0.0);
  const Vector p0 = ags::testing::to_vector(p);
  const Vector fd = central_difference(
      [&](const Vector& q) { return bce(std::vector<double>(q.data(), q.data() + q.size()), y, mask).loss; }, p0);
  EXPECT_LT(max_relative_error(ags::testing::to_vector(r.grad), fd), 1e-7);
  // Clamped entries carry no gradient.
  const auto c = bce(std::vector<double>{0.0, 1.0}, std::vector<double>{1, 0}, {true, true});
  EXPECT_TRUE(std::isfinite(c.loss));
  EXPECT_EQ(c.grad[0], 0.0);
  EXPECT_EQ(c.grad[1], 0.0);
}

TEST(Reinforce, RewardToGo) {
  const auto g = reward_to_go(std::vector<double>{1, 0, 1});
  EXPECT_EQ(g, (std::vector<double>{2, 1, 1}));
}

// The streaming accumulator must equal the explicit per-step formula
//   mean_e  -sum_t (G_et - b_t) g_et,   b_t = mean over episodes reaching t of G_et.
TEST(Reinforce, AccumulatorMatchesExplicitFormula) {
  Rng rng(17);
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.4);
  const std::size_t dim = 5, episodes = 6;
  std::vector<std::vector<Vector>> grads(episodes);
  std::vector<std::vector<double>> rewards(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    const std::size_t len = 3 + e % 3;
    for (std::size_t t = 0; t < len; ++t) {
      Vector g(dim);
      for (auto& v : g) v = n01(rng);
      grads[e].push_back(g);
      rewards[e].push_back(coin(rng) ? 1.0 : 0.0);
    }
  }
  for (auto mode : {ReturnMode::RewardToGo, ReturnMode::TotalReturn}) {
    ReinforceAccumulator acc(dim, mode);
    acc.reset();
    for (std::size_t e = 0; e < episodes; ++e) {
      acc.begin_episode();
      for (std::size_t t = 0; t < grads[e].size(); ++t) acc.add_step(grads[e][t], rewards[e][t]);
      acc.end_episode();
    }
    // Oracle.
    std::vector<std::vector<double>> G(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
      G[e].assign(grads[e].size(), 0.0);
      double total = 0.0;
      for (double r : rewards[e]) total += r;
      double tail = 0.0;
      for (std::size_t t = grads[e].size(); t-- > 0;) {
        tail += rewards[e][t];
        G[e][t] = mode == ReturnMode::RewardToGo ? tail : total;
      }
    }
    std::vector<double> base(8, 0.0), cnt(8, 0.0);
    if (mode == ReturnMode::RewardToGo)
      for (std::size_t e = 0; e < episodes; ++e)
        for (std::size_t t = 0; t < G[e].size(); ++t) {
          base[t] += G[e][t];
          cnt[t] += 1.0;
        }
    Vector expect = Vector::Zero(dim);
    for (std::size_t e = 0; e < episodes; ++e)
      for (std::size_t t = 0; t < G[e].size(); ++t) {
        const double b = cnt[t] > 0 ? base[t] / cnt[t] : 0.0;
        expect -= (G[e][t] - b) * grads[e][t];
      }
    expect /= static_cast<double>(episodes);
    EXPECT_LT((acc.gradient() - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Reinforce, MergeEqualsSingleAccumulator) {
  Rng rng(2);
  std::normal_distribution<double> n01;
  ReinforceAccumulator all(3, ReturnMode::RewardToGo), a(3, ReturnMode::RewardToGo), b(3, ReturnMode::RewardToGo);
  for (auto* acc : {&all, &a, &b}) acc->reset();
  for (int e = 0; e < 4; ++e) {
    auto& part = e < 2 ? a : b;
    all.begin_episode();
    part.begin_episode();
    for (int t = 0; t < 3 + e; ++t) {
      Vector g(3);
      for (auto& v : g) v = n01(rng);
      const double r = (t + e) % 2;
      all.add_step(g, r);
      part.add_step(g, r);
    }
    all.end_episode();
    part.end_episode();
  }
  a.merge(b);
  EXPECT_LT((a.gradient() - all.gradient()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adam, FirstStepsByHand) {
  Vector w(2);
  w << 1.0, -2.0;
  Vector g(2);
  g << 0.5, -4.0;
  AdamState st(2, StepDecay{0.1, 0, 0.5});
  adam_step(w, g, st);
  // First step moves every coordinate by lr * sign(g) (up to eps).
  EXPECT_NEAR(w[0], 1.0 - 0.1, 1e-7);
  EXPECT_NEAR(w[1], -2.0 + 0.1, 1e-7);
  const double w1 = w[0];
  Vector g2(2);
  g2 << 1.0, 0.0;
  adam_step(w, g2, st);
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 1.0, v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w[0], w1 - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
  Vector bad(2);
  bad << 1.0, std::nan("");
  EXPECT_THROW(adam_step(w, bad, st), NumericalError);
}

TEST(Adam, StepDecaySchedule) {
  StepDecay s{1e-4, 20, 0.5};
  EXPECT_EQ(s.at(0), 1e-4);
  EXPECT_EQ(s.at(19), 1e-4);
  EXPECT_EQ(s.at(20), 5e-5);
  EXPECT_EQ(s.at(45), 2.5e-5);
  EXPECT_EQ((StepDecay{0.3, 0, 0.5}).at(1000), 0.3);
}
