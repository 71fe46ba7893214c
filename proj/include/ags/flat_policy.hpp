#pragma once

// Small-area search: p = f(x, o) feeds a fixed-width search module g(p, o, B).
// Training alternates stochastic rollouts (with in-episode adaptation of the
// predictor) and batch updates of g by REINFORCE and of f by the collected
// labels' BCE weighted by lambda.

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"
#include "ags/policy_net.hpp"
#include "ags/predictor.hpp"
#include "ags/searcher.hpp"

namespace ags {

struct AgsModel {
  Predictor predictor;
  diffnet::Vector phi;
  SearchModule policy;
  diffnet::Vector zeta;

  std::size_t slots() const { return slots_of(policy); }
};

inline AgsModel make_ags_model(PredictorSpec pspec, std::size_t slots, std::size_t hidden, std::uint64_t seed,
                               bool skip = true) {
  Rng rng(seed);
  AgsModel m;
  m.predictor = Predictor(pspec);
  m.phi = m.predictor.init(rng);
  m.policy = search_module(slots, hidden, skip);
  m.zeta = init_search_params(m.policy, rng);
  return m;
}

struct TrainConfig {
  double lambda = 0.1;
  diffnet::StepDecay policy_lr{1e-4, 20, 0.5};
  diffnet::StepDecay predictor_lr{1e-4, 20, 0.5};
  std::size_t batch = 24;
  std::size_t epochs = 300;
  double budget = 25.0;  // <= 0 uses each task's own budget
  BudgetMode mode = BudgetMode::PaperLiteral;
  diffnet::ReturnMode returns = diffnet::ReturnMode::RewardToGo;
  AdaptConfig adapt;
  double entropy = 0.0;
  std::uint64_t seed = 1;
  // Hierarchical only.
  double temperature = 1.0;
  bool include_queried = false;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double mean_return = 0.0;
  double bce_loss = 0.0;
  double lr = 0.0;
};

inline double episode_budget(const TrainConfig& cfg, const SearchTask& task) {
  return cfg.budget > 0.0 ? cfg.budget : task.budget();
}

inline std::vector<ParcelId> all_ids(const SearchTask& task) {
  std::vector<ParcelId> ids(task.size());
  std::iota(ids.begin(), ids.end(), ParcelId{0});
  return ids;
}

// Upstream dL/dp for the BCE of one parcel's label at a given prediction.
inline std::vector<double> single_label_upstream(std::span<const double> p, ParcelId i, int label, double* loss) {
  std::vector<double> up(p.size(), 0.0);
  const double pc = std::clamp(p[i], diffnet::kProbEps, 1.0 - diffnet::kProbEps);
  if (loss) *loss = -(label ? std::log(pc) : std::log(1.0 - pc));
  if (p[i] > diffnet::kProbEps && p[i] < 1.0 - diffnet::kProbEps) up[i] = (pc - label) / (pc * (1.0 - pc));
  return up;
}

inline std::vector<double> flat_distribution(const AgsModel& m, std::span<const double> p, const SearchState& s,
                                             const SearchTask& task, BudgetMode mode) {
  const auto ids = all_ids(task);
  auto d = slot_distribution(m.policy, m.zeta, ids, p, s.observations(), s.remaining() / s.total_budget(),
                             admissible_mask(s, task, mode));
  d.probs.resize(task.size());
  return d.probs;
}

struct FlatRollout {
  EpisodeTrace trace;
  std::vector<diffnet::Vector> log_prob_grads;  // d log g(a_t) / d zeta
  diffnet::Vector entropy_grad;                  // sum_t dH_t / d zeta
  diffnet::Vector bce_grad;                      // d mean_t BCE(p_t[a_t], y) / d phi
  double bce_loss = 0.0;
  diffnet::Vector phi_within;
};

// One stochastic training episode from the persistent parameters.
inline FlatRollout run_training_episode(const SearchTask& task, const AgsModel& m, const TrainConfig& cfg, Rng& rng) {
  const double budget = episode_budget(cfg, task);
  SearchState s(task, budget);
  FlatRollout out;
  out.phi_within = m.phi;
  out.bce_grad = diffnet::Vector::Zero(m.phi.size());
  if (cfg.entropy > 0.0) out.entropy_grad = diffnet::Vector::Zero(m.zeta.size());
  const auto ids = all_ids(task);
  double loss_sum = 0.0;
  while (!is_terminated(s, task, cfg.mode)) {
    auto pass = predict(m.predictor, out.phi_within, task, s.observations(), ContextScope::Task);
    auto dist = slot_distribution(m.policy, m.zeta, ids, pass.p, s.observations(), s.remaining() / budget,
                                  admissible_mask(s, task, cfg.mode));
    const std::size_t a = diffnet::sample_categorical(dist.probs, rng);
    auto sg = slot_gradients(m.policy, m.zeta, dist, a, cfg.entropy > 0.0);
    out.log_prob_grads.push_back(std::move(sg.log_prob));
    if (cfg.entropy > 0.0) out.entropy_grad += sg.entropy;

    const auto outcome = apply_query(s, task, a, cfg.mode);
    double loss = 0.0;
    std::vector<std::vector<double>> ups;
    ups.push_back(single_label_upstream(pass.p, a, outcome.label, &loss));
    ups.push_back(adaptation_upstream(task, pass.p, s.queried_mask()));
    auto g = pass.backward(ups);
    out.bce_grad += g[0].params;
    loss_sum += loss;
    diffnet::sgd_step(out.phi_within, g[1].params, cfg.adapt.lr);
    if (cfg.adapt.steps > 1) {
      AdaptConfig extra = cfg.adapt;
      extra.steps -= 1;
      adapt_online(m.predictor, out.phi_within, task, s.observations(), s.queried_mask(), ContextScope::Task, extra);
    }
  }
  out.trace = s.trace();
  const double steps = static_cast<double>(std::max<std::size_t>(out.trace.size(), 1));
  out.bce_grad /= steps;
  out.bce_loss = loss_sum / steps;
  return out;
}

struct FlatTrainResult {
  AgsModel model;
  diffnet::AdamState policy_opt;
  diffnet::AdamState predictor_opt;
  std::vector<TrainLogRow> log;
};

using EpochCallback = std::function<void(const TrainLogRow&)>;
// Receives the model as it was when a non-finite gradient aborted training.
template <class Model>
using AbortCallback = std::function<void(const Model&, const NumericalError&)>;

inline FlatTrainResult train_ags(const std::vector<SearchTask>& tasks, AgsModel model, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {}, const AbortCallback<AgsModel>& on_abort = {}) {
  if (tasks.empty()) throw InvalidArgument("training needs at least one task");
  if (cfg.batch == 0) throw InvalidArgument("batch must be >= 1");
  if (cfg.lambda < 0.0) throw InvalidArgument("lambda must be >= 0");
  for (const auto& t : tasks)
    if (t.size() > model.slots()) throw InvalidArgument("task larger than the policy's slot count");
  FlatTrainResult r{std::move(model), {}, {}, {}};
  r.policy_opt = diffnet::AdamState(static_cast<std::size_t>(r.model.zeta.size()), cfg.policy_lr);
  r.predictor_opt = diffnet::AdamState(static_cast<std::size_t>(r.model.phi.size()), cfg.predictor_lr);
  Rng pick(mix_seed(cfg.seed, 0xA65));
  std::uniform_int_distribution<std::size_t> which(0, tasks.size() - 1);
  diffnet::ReinforceAccumulator acc(static_cast<std::size_t>(r.model.zeta.size()), cfg.returns);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    acc.reset();
    diffnet::Vector bce = diffnet::Vector::Zero(r.model.phi.size());
    diffnet::Vector ent = diffnet::Vector::Zero(r.model.zeta.size());
    double ret = 0.0, loss = 0.0;
    for (std::size_t e = 0; e < cfg.batch; ++e) {
      const auto& task = tasks[which(pick)];
      Rng rng(mix_seed(cfg.seed, epoch, e));
      auto roll = run_training_episode(task, r.model, cfg, rng);
      acc.begin_episode();
      for (std::size_t t = 0; t < roll.trace.size(); ++t)
        acc.add_step(roll.log_prob_grads[t], static_cast<double>(roll.trace[t].reward));
      acc.end_episode();
      bce += roll.bce_grad;
      if (cfg.entropy > 0.0) ent += roll.entropy_grad;
      ret += episode_return(roll.trace);
      loss += roll.bce_loss;
    }
    const double nb = static_cast<double>(cfg.batch);
    diffnet::Vector gz = acc.gradient();
    if (cfg.entropy > 0.0) gz -= cfg.entropy * ent / nb;
    diffnet::Vector gp = cfg.lambda * bce / nb;
    const TrainLogRow row{epoch, ret / nb, loss / nb, r.policy_opt.lr()};
    try {
      diffnet::check_finite(gz);
      diffnet::check_finite(gp);
    } catch (const NumericalError& e) {
      if (on_abort) on_abort(r.model, e);
      throw;
    }
    diffnet::adam_step(r.model.zeta, gz, r.policy_opt);
    if (cfg.lambda > 0.0) diffnet::adam_step(r.model.phi, gp, r.predictor_opt);
    r.policy_opt.episodes += cfg.batch;
    r.predictor_opt.episodes += cfg.batch;
    r.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return r;
}

enum class Selection { Argmax, Sample };

// Inference with the search module frozen and the predictor adapted after
// every observation.
class AgsSearcher final : public Searcher {
 public:
  AgsSearcher(std::shared_ptr<const AgsModel> model, Selection sel, AdaptConfig adapt)
      : model_(std::move(model)), sel_(sel), adapt_(adapt) {}

  std::string name() const override { return "ags"; }

  void reset(const SearchTask& task, const SearchState&) override {
    if (task.size() > model_->slots()) throw InvalidArgument("task larger than the policy's slot count");
    phi_ = model_->phi;
    pass_.reset();
  }

  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng& rng) override {
    ensure_pass(task, s);
    const auto probs = flat_distribution(*model_, pass_->p, s, task, mode);
    const std::size_t a = sel_ == Selection::Argmax ? diffnet::argmax(probs) : diffnet::sample_categorical(probs, rng);
    return {a, std::nullopt};
  }

  void observe(const SearchTask& task, const SearchState& s, ParcelId parcel) override {
    // Gradient is taken at the prediction made before the label was revealed.
    if (!pass_ || pass_step_ != s.step() - 1) {
      const auto pre = pre_query_observations(s, parcel);
      pass_ = predict(model_->predictor, phi_, task, pre, ContextScope::Task);
    }
    if (adapt_.lr != 0.0) {
      auto g = pass_->backward(adaptation_upstream(task, pass_->p, s.queried_mask()));
      diffnet::sgd_step(phi_, g[0].params, adapt_.lr);
      if (adapt_.steps > 1) {
        AdaptConfig extra = adapt_;
        extra.steps -= 1;
        adapt_online(model_->predictor, phi_, task, s.observations(), s.queried_mask(), ContextScope::Task, extra);
      }
    }
    pass_.reset();
  }

  std::vector<double> scores(const SearchTask& task, const SearchState& s) override {
    ensure_pass(task, s);
    return pass_->p;
  }

  std::vector<double> distribution(const SearchTask& task, const SearchState& s, BudgetMode mode) override {
    ensure_pass(task, s);
    return flat_distribution(*model_, pass_->p, s, task, mode);
  }

  std::unique_ptr<Searcher> clone() const override { return std::unique_ptr<Searcher>(new AgsSearcher(*this)); }

  const diffnet::Vector& adapted_phi() const { return phi_; }

 private:
  void ensure_pass(const SearchTask& task, const SearchState& s) {
    if (pass_ && pass_step_ == s.step()) return;
    pass_ = predict(model_->predictor, phi_, task, s.observations(), ContextScope::Task);
    pass_step_ = s.step();
  }

  AgsSearcher(const AgsSearcher& o) : Searcher(), model_(o.model_), sel_(o.sel_), adapt_(o.adapt_), phi_(o.phi_) {}

  std::shared_ptr<const AgsModel> model_;
  Selection sel_;
  AdaptConfig adapt_;
  diffnet::Vector phi_;
  std::optional<PredictorPass> pass_;
  std::size_t pass_step_ = 0;
};

inline EpisodeTrace run_search(const SearchTask& task, std::shared_ptr<const AgsModel> model, double budget,
                               BudgetMode mode, Selection sel, const AdaptConfig& adapt, Rng& rng) {
  AgsSearcher s(std::move(model), sel, adapt);
  return run_episode(task, s, budget, mode, rng);
}

}  // namespace ags
