#pragma once

// Comparison searchers: random, static greedy, greedy with online updates,
// greedy by unit count, and one-step kNN active search.

#include <algorithm>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"
#include "ags/predictor.hpp"
#include "ags/searcher.hpp"

namespace ags {

// Best-scoring admissible parcel; ties go to the lowest id.
inline ParcelId best_admissible(const std::vector<double>& score, const std::vector<bool>& admissible) {
  std::size_t best = score.size();
  for (std::size_t i = 0; i < score.size(); ++i)
    if (admissible[i] && (best == score.size() || score[i] > score[best])) best = i;
  if (best == score.size()) throw EmptySupport("no admissible parcel");
  return best;
}

class RandomSearcher final : public Searcher {
 public:
  std::string name() const override { return "random"; }
  void reset(const SearchTask&, const SearchState&) override {}
  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng& rng) override {
    const auto adm = admissible_actions(s, task, mode);
    if (adm.empty()) throw EmptySupport("no admissible parcel");
    std::uniform_int_distribution<std::size_t> u(0, adm.size() - 1);
    return {adm[u(rng)], std::nullopt};
  }
  void observe(const SearchTask&, const SearchState&, ParcelId) override {}
  std::vector<double> scores(const SearchTask& task, const SearchState&) override {
    return std::vector<double>(task.size(), 0.5);
  }
  std::vector<double> distribution(const SearchTask& task, const SearchState& s, BudgetMode mode) override {
    const auto adm = admissible_actions(s, task, mode);
    std::vector<double> d(task.size(), 0.0);
    for (auto i : adm) d[i] = 1.0 / static_cast<double>(adm.size());
    return d;
  }
  std::unique_ptr<Searcher> clone() const override { return std::make_unique<RandomSearcher>(*this); }
};

inline EpisodeTrace random_search(const SearchTask& task, double budget, BudgetMode mode, Rng& rng) {
  RandomSearcher s;
  return run_episode(task, s, budget, mode, rng);
}

// Features-only classifier for the greedy baselines.
struct GreedyClassifier {
  diffnet::NetworkSpec net;
  diffnet::Vector params;

  std::vector<double> score(const RowMatrix& features, const diffnet::Vector& w) const {
    std::span<const double> pw(w.data(), static_cast<std::size_t>(w.size()));
    RowMatrix out = diffnet::forward(net, pw, features);
    return {out.data(), out.data() + out.size()};
  }
  std::vector<double> score(const SearchTask& task) const { return score(task.features(), params); }
};

struct ClassifierConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

// Full-batch Adam on the BCE of every labeled parcel in the training tasks.
inline GreedyClassifier train_greedy_classifier(const std::vector<SearchTask>& tasks, const ClassifierConfig& cfg) {
  if (tasks.empty()) throw InvalidArgument("classifier training needs at least one task");
  const auto d = tasks.front().feature_width();
  std::size_t rows = 0;
  for (const auto& t : tasks) {
    if (t.feature_width() != d) throw InvalidArgument("training tasks differ in feature width");
    rows += t.size();
  }
  RowMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  std::vector<double> y(rows);
  std::size_t at = 0;
  for (const auto& t : tasks) {
    x.middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(t.size())) = t.features();
    for (const auto& p : t.parcels()) y[at++] = p.label;
  }
  GreedyClassifier c;
  c.net = cfg.hidden ? diffnet::mlp(d, {cfg.hidden}, 1, diffnet::Activation::Sigmoid)
                     : diffnet::NetworkSpec{d, {{1, diffnet::Activation::Sigmoid}}};
  Rng rng(cfg.seed);
  c.params = diffnet::init_params(c.net, rng);
  diffnet::AdamState opt(static_cast<std::size_t>(c.params.size()), diffnet::StepDecay{cfg.lr, 0, 1.0});
  const std::vector<bool> all(rows, true);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    diffnet::Tape tape;
    std::span<const double> w(c.params.data(), static_cast<std::size_t>(c.params.size()));
    RowMatrix p = diffnet::forward(c.net, w, x, &tape);
    auto loss = diffnet::bce({p.data(), static_cast<std::size_t>(p.size())}, y, all);
    RowMatrix up = Eigen::Map<const RowMatrix>(loss.grad.data(), static_cast<Eigen::Index>(rows), 1);
    auto g = diffnet::backward(c.net, w, tape, up);
    diffnet::adam_step(c.params, g.params, opt);
  }
  return c;
}

// Static ranking by classifier score.
class GreedySearcher final : public Searcher {
 public:
  explicit GreedySearcher(std::shared_ptr<const GreedyClassifier> clf) : clf_(std::move(clf)) {}
  // Scores supplied directly (tests, precomputed rankings).
  explicit GreedySearcher(std::vector<double> fixed) : fixed_(std::move(fixed)) {}

  std::string name() const override { return "greedy"; }
  void reset(const SearchTask& task, const SearchState&) override {
    score_ = clf_ ? clf_->score(task) : fixed_;
    if (score_.size() != task.size()) throw InvalidArgument("score vector does not match task size");
  }
  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng&) override {
    return {best_admissible(score_, admissible_mask(s, task, mode)), std::nullopt};
  }
  void observe(const SearchTask&, const SearchState&, ParcelId) override {}
  std::vector<double> scores(const SearchTask&, const SearchState&) override { return score_; }
  std::unique_ptr<Searcher> clone() const override { return std::make_unique<GreedySearcher>(*this); }

 private:
  std::shared_ptr<const GreedyClassifier> clf_;
  std::vector<double> fixed_;
  std::vector<double> score_;
};

// Greedy ranking with one masked-BCE SGD step on a per-episode classifier copy
// after every revealed label.
class GreedyAdaptiveSearcher final : public Searcher {
 public:
  GreedyAdaptiveSearcher(std::shared_ptr<const GreedyClassifier> clf, AdaptConfig adapt)
      : clf_(std::move(clf)), adapt_(adapt) {}

  std::string name() const override { return "greedy-adaptive"; }
  void reset(const SearchTask& task, const SearchState&) override {
    w_ = clf_->params;
    score_ = clf_->score(task.features(), w_);
  }
  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng&) override {
    return {best_admissible(score_, admissible_mask(s, task, mode)), std::nullopt};
  }
  void observe(const SearchTask& task, const SearchState& s, ParcelId) override {
    if (adapt_.lr != 0.0) {
      for (std::size_t k = 0; k < adapt_.steps; ++k) {
        diffnet::Tape tape;
        std::span<const double> pw(w_.data(), static_cast<std::size_t>(w_.size()));
        RowMatrix p = diffnet::forward(clf_->net, pw, task.features(), &tape);
        const auto up = adaptation_upstream(task, {p.data(), static_cast<std::size_t>(p.size())}, s.queried_mask());
        RowMatrix u = Eigen::Map<const RowMatrix>(up.data(), p.rows(), 1);
        auto g = diffnet::backward(clf_->net, pw, tape, u);
        diffnet::sgd_step(w_, g.params, adapt_.lr);
      }
    }
    score_ = clf_->score(task.features(), w_);
  }
  std::vector<double> scores(const SearchTask&, const SearchState&) override { return score_; }
  std::unique_ptr<Searcher> clone() const override { return std::make_unique<GreedyAdaptiveSearcher>(*this); }

 private:
  std::shared_ptr<const GreedyClassifier> clf_;
  AdaptConfig adapt_;
  diffnet::Vector w_;
  std::vector<double> score_;
};

class UnitCountSearcher final : public Searcher {
 public:
  std::string name() const override { return "greedy-units"; }
  void reset(const SearchTask& task, const SearchState&) override {
    units_.resize(task.size());
    for (ParcelId i = 0; i < task.size(); ++i) units_[i] = task.parcels()[i].features[task.unit_feature()];
  }
  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng&) override {
    return {best_admissible(units_, admissible_mask(s, task, mode)), std::nullopt};
  }
  void observe(const SearchTask&, const SearchState&, ParcelId) override {}
  std::vector<double> scores(const SearchTask&, const SearchState&) override {
    // Display only: rescaled unit counts.
    const double mx = *std::max_element(units_.begin(), units_.end());
    std::vector<double> out(units_.size());
    for (std::size_t i = 0; i < units_.size(); ++i) out[i] = units_[i] / mx;
    return out;
  }
  std::unique_ptr<Searcher> clone() const override { return std::make_unique<UnitCountSearcher>(*this); }

 private:
  std::vector<double> units_;
};

struct KnnConfig {
  std::size_t k = 10;
  double a = 1.0;  // prior pseudo-count for positives
  double b = 1.0;  // prior pseudo-count for negatives
};

// Column z-scored features; constant columns map to 0.
inline RowMatrix standardized_features(const SearchTask& task) {
  RowMatrix x = task.features();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = (x.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd > 0.0)
      x.col(c) = ((x.col(c).array() - mean) / sd).matrix();
    else
      x.col(c).setZero();
  }
  return x;
}

// k nearest neighbors of every parcel (excluding itself) by Euclidean distance
// on standardized features; ties broken by lower id.
inline std::vector<std::vector<ParcelId>> knn_graph(const SearchTask& task, std::size_t k) {
  const RowMatrix x = standardized_features(task);
  const std::size_t n = task.size();
  const std::size_t kk = std::min(k, n - 1);
  std::vector<std::vector<ParcelId>> nbrs(n);
  std::vector<std::pair<double, ParcelId>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        d.emplace_back((x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    for (std::size_t q = 0; q < kk; ++q) nbrs[i].push_back(d[q].second);
  }
  return nbrs;
}

inline double knn_posterior(const std::vector<ParcelId>& nbrs, const SearchState& s, const SearchTask& task,
                            const KnnConfig& cfg) {
  double pos = 0.0, cnt = 0.0;
  for (auto j : nbrs)
    if (s.is_queried(j)) {
      pos += task.parcels()[j].label;
      cnt += 1.0;
    }
  return (cfg.a + pos) / (cfg.a + cfg.b + cnt);
}

// One-step greedy active search under a kNN label-propagation posterior.
class KnnSearcher final : public Searcher {
 public:
  explicit KnnSearcher(KnnConfig cfg) : cfg_(cfg) {
    if (cfg.k < 1) throw InvalidArgument("k must be >= 1");
  }
  std::string name() const override { return "knn-as"; }
  void reset(const SearchTask& task, const SearchState&) override { nbrs_ = knn_graph(task, cfg_.k); }
  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng&) override {
    return {best_admissible(scores(task, s), admissible_mask(s, task, mode)), std::nullopt};
  }
  void observe(const SearchTask&, const SearchState&, ParcelId) override {}
  std::vector<double> scores(const SearchTask& task, const SearchState& s) override {
    std::vector<double> post(task.size());
    for (ParcelId i = 0; i < task.size(); ++i) post[i] = knn_posterior(nbrs_[i], s, task, cfg_);
    return post;
  }
  std::unique_ptr<Searcher> clone() const override { return std::make_unique<KnnSearcher>(*this); }
  const std::vector<std::vector<ParcelId>>& neighbors() const { return nbrs_; }

 private:
  KnnConfig cfg_;
  std::vector<std::vector<ParcelId>> nbrs_;
};

}  // namespace ags
