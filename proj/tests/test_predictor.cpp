#include <gtest/gtest.h>

#include "ags/predictor.hpp"
#include "support.hpp"

using namespace ags;
using ags::testing::central_difference;
using ags::testing::max_relative_error;
using ags::testing::random_task;

namespace {

std::vector<double> random_obs(const SearchTask& t, Rng& rng, std::vector<bool>* queried = nullptr) {
  std::bernoulli_distribution q(0.4);
  std::vector<double> o(t.size(), 0.0);
  if (queried) queried->assign(t.size(), false);
  for (ParcelId i = 0; i < t.size(); ++i)
    if (q(rng)) {
      o[i] = encode_observation(t.parcels()[i].label);
      if (queried) (*queried)[i] = true;
    }
  return o;
}

// sum_i w_i p_i
double weighted_p(const Predictor& m, const diffnet::Vector& phi, const RowMatrix& x, const std::vector<double>& o,
                  const std::vector<std::vector<ParcelId>>& scopes, const std::vector<double>& w) {
  const auto pass = predict(m, phi, x, o, scopes);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * pass.p[i];
  return s;
}

}  // namespace

TEST(Predictor, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (ContextScope scope : {ContextScope::Task, ContextScope::Region}) {
      for (std::size_t embed : {std::size_t{0}, std::size_t{4}}) {
        const auto task = random_task(12, 5, 0.3, 4.0, seed, ags::testing::block_regions(12, 5));
        Predictor m(PredictorSpec{5, embed, 6});
        Rng rng(seed * 31);
        const diffnet::Vector phi = m.init(rng);
        const auto o = random_obs(task, rng);
        std::normal_distribution<double> n01;
        std::vector<double> w(task.size());
        for (auto& v : w) v = n01(rng);
        const auto scopes = context_scopes(task, scope);
        auto pass = predict(m, phi, task.features(), o, scopes);
        const auto g = pass.backward(w);
        const diffnet::Vector fd =
            central_difference([&](const diffnet::Vector& p) { return weighted_p(m, p, task.features(), o, scopes, w); },
                               phi);
        EXPECT_LT(max_relative_error(g[0].params, fd), 1e-4) << "seed " << seed << " embed " << embed;
        const RowMatrix& x = task.features();
        diffnet::Vector xv = Eigen::Map<const diffnet::Vector>(x.data(), x.size());
        const diffnet::Vector fdx = central_difference(
            [&](const diffnet::Vector& v) {
              RowMatrix xm = Eigen::Map<const RowMatrix>(v.data(), x.rows(), x.cols());
              return weighted_p(m, phi, xm, o, scopes, w);
            },
            xv);
        diffnet::Vector gx = Eigen::Map<const diffnet::Vector>(g[0].features.data(), g[0].features.size());
        EXPECT_LT(max_relative_error(gx, fdx), 1e-4);
      }
    }
  }
}

TEST(Predictor, OutputsAreProbabilitiesAndScopesMatter) {
  const auto task = random_task(10, 3, 0.5, 4.0, 2, ags::testing::block_regions(10, 5));
  Predictor m(PredictorSpec{3, 4, 8});
  Rng rng(4);
  const auto phi = m.init(rng);
  std::vector<double> o(10, 0.0);
  o[0] = 1.0;
  const auto task_p = predict(m, phi, task, o, ContextScope::Task).p;
  const auto region_p = predict(m, phi, task, o, ContextScope::Region).p;
  for (double p : task_p) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  // An observation in region 0 reaches region 1 only through the task-wide context.
  auto o2 = o;
  o2[0] = -1.0;
  const auto region_p2 = predict(m, phi, task, o2, ContextScope::Region).p;
  for (ParcelId i = 5; i < 10; ++i) EXPECT_EQ(region_p[i], region_p2[i]);
  EXPECT_NE(task_p, region_p);
}

TEST(Predictor, RejectsBadInputs) {
  const auto task = random_task(6, 3, 0.5, 2.0, 2);
  Predictor m(PredictorSpec{4, 2, 3});
  Rng rng(1);
  const auto phi = m.init(rng);
  std::vector<double> o(6, 0.0);
  EXPECT_THROW(predict(m, phi, task, o, ContextScope::Task), InvalidArgument);
  Predictor ok(PredictorSpec{3, 2, 3});
  const auto phi2 = ok.init(rng);
  EXPECT_THROW(predict(ok, phi2, task, std::vector<double>(5, 0.0), ContextScope::Task), InvalidArgument);
  EXPECT_THROW(predict(ok, phi, task, o, ContextScope::Task), InvalidArgument);
}

TEST(Predictor, BackwardIsSingleUse) {
  const auto task = random_task(6, 3, 0.5, 2.0, 2);
  Predictor m(PredictorSpec{3, 2, 3});
  Rng rng(1);
  const auto phi = m.init(rng);
  auto pass = predict(m, phi, task, std::vector<double>(6, 0.0), ContextScope::Task);
  pass.backward(std::vector<double>(6, 1.0));
  EXPECT_THROW(pass.backward(std::vector<double>(6, 1.0)), ContractViolation);
}

// Full BCE against pseudo-labels (revealed labels on queried parcels, the
// prediction itself elsewhere) has zero gradient on unqueried entries, so its
// gradient equals the masked BCE gradient once both use the same normalizer.
TEST(PseudoLabels, GradientEqualsMaskedBce) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto task = random_task(40, 4, 0.2, 5.0, seed);
    Predictor m(PredictorSpec{4, 3, 8});
    Rng rng(seed);
    const auto phi = m.init(rng);
    std::vector<bool> queried;
    const auto o = random_obs(task, rng, &queried);
    auto pass = predict(m, phi, task, o, ContextScope::Task);
    const auto masked = adaptation_upstream(task, pass.p, queried);
    const auto pseudo = pseudo_label_upstream(task, pass.p, queried);
    for (std::size_t i = 0; i < masked.size(); ++i) EXPECT_NEAR(masked[i], pseudo[i], 1e-12);
    auto g = pass.backward(std::vector<std::vector<double>>{masked, pseudo});
    EXPECT_LT((g[0].params - g[1].params).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PseudoLabels, Targets) {
  const auto task = ags::testing::line_task({1, 0, 1});
  const std::vector<double> p{0.3, 0.6, 0.0};
  const auto y = pseudo_labels(task, p, {true, false, false});
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 0.6);
  EXPECT_EQ(y[2], diffnet::kProbEps);
}

TEST(Adaptation, StepLowersObservedLoss) {
  const auto task = random_task(30, 4, 0.3, 5.0, 8);
  Predictor m(PredictorSpec{4, 3, 8});
  Rng rng(8);
  auto phi = m.init(rng);
  std::vector<bool> queried;
  const auto o = random_obs(task, rng, &queried);
  auto loss = [&](const diffnet::Vector& w) {
    const auto p = predict(m, w, task, o, ContextScope::Task).p;
    std::vector<double> y(p.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = task.parcels()[i].label;
    return diffnet::bce(p, y, queried).loss;
  };
  const double before = loss(phi);
  adapt_online(m, phi, task, o, queried, ContextScope::Task, AdaptConfig{0.05, 1});
  EXPECT_LT(loss(phi), before);
  auto same = phi;
  adapt_online(m, same, task, o, std::vector<bool>(task.size(), false), ContextScope::Task, AdaptConfig{0.05, 1});
  EXPECT_EQ(same, phi);
}

TEST(RegionAggregate, UnqueriedOrAll) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const Region r{0, {0, 2, 3}};
  const std::vector<bool> q{false, false, true, false};
  EXPECT_DOUBLE_EQ(region_aggregate(p, r, q), 0.5);
  EXPECT_DOUBLE_EQ(region_aggregate(p, r, q, true), 0.8);
}
