#pragma once

// Hierarchical search. Level 1 picks a region by a softmax over region
// aggregates of p (so its only learnable parameters are the predictor's);
// a single level-2 search module shared by every region picks the parcel.

#include <memory>
#include <string>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"
#include "ags/flat_policy.hpp"
#include "ags/policy_net.hpp"
#include "ags/predictor.hpp"
#include "ags/searcher.hpp"

namespace ags {

struct HagsModel {
  Predictor predictor;
  diffnet::Vector phi;
  SearchModule level2;
  diffnet::Vector theta;
  double temperature = 1.0;
  bool include_queried = false;  // paper-literal region sums

  std::size_t region_slots() const { return slots_of(level2); }
};

inline HagsModel make_hags_model(PredictorSpec pspec, std::size_t region_slots, std::size_t hidden,
                                 std::uint64_t seed, bool skip = true) {
  Rng rng(seed);
  HagsModel m;
  m.predictor = Predictor(pspec);
  m.phi = m.predictor.init(rng);
  m.level2 = search_module(region_slots, hidden, skip);
  m.theta = init_search_params(m.level2, rng);
  return m;
}

struct Level1 {
  std::vector<double> aggregates;  // p-bar per region
  std::vector<double> probs;
};

// Softmax over region aggregates; regions without an admissible parcel get 0.
inline Level1 level1_distribution(const SearchTask& task, std::span<const double> p,
                                  const std::vector<bool>& admissible, const std::vector<bool>& queried,
                                  double temperature = 1.0, bool include_queried = false) {
  Level1 l;
  const auto& regions = task.regions();
  l.aggregates.resize(regions.size());
  std::vector<double> logits(regions.size());
  std::vector<bool> mask(regions.size(), false);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    l.aggregates[r] = region_aggregate(p, regions[r], queried, include_queried);
    logits[r] = l.aggregates[r] / temperature;
    for (auto i : regions[r].members) mask[r] = mask[r] || admissible[i];
  }
  l.probs = diffnet::masked_softmax(logits, mask);
  return l;
}

// dL/dp of log pi1(region) through the region sums.
inline std::vector<double> level1_upstream(const SearchTask& task, const Level1& l1, RegionId chosen,
                                           const std::vector<bool>& queried, double temperature,
                                           bool include_queried) {
  std::vector<double> up(task.size(), 0.0);
  for (const auto& r : task.regions()) {
    const double g = ((r.id == chosen ? 1.0 : 0.0) - l1.probs[r.id]) / temperature;
    for (auto i : r.members)
      if (include_queried || !queried[i]) up[i] = g;
  }
  return up;
}

inline std::vector<bool> region_slot_mask(const Region& region, const std::vector<bool>& admissible) {
  std::vector<bool> m(region.members.size());
  for (std::size_t s = 0; s < region.members.size(); ++s) m[s] = admissible[region.members[s]];
  return m;
}

// Level-2 distribution over the region's member slots.
inline SlotDistribution level2_distribution(const HagsModel& m, const Region& region, std::span<const double> p,
                                            std::span<const double> o, double budget_fraction,
                                            const std::vector<bool>& admissible) {
  return slot_distribution(m.level2, m.theta, region.members, p, o, budget_fraction,
                           region_slot_mask(region, admissible));
}

struct HierRollout {
  EpisodeTrace trace;
  std::vector<diffnet::Vector> level1_grads;  // d log pi1(j_t) / d phi
  std::vector<diffnet::Vector> level2_grads;  // d log pi2(r_t) / d theta
  diffnet::Vector entropy_grad;
  diffnet::Vector bce_grad;
  double bce_loss = 0.0;
  diffnet::Vector phi_within;
};

inline HierRollout run_training_episode_h(const SearchTask& task, const HagsModel& m, const TrainConfig& cfg,
                                          Rng& rng) {
  for (const auto& r : task.regions())
    if (r.members.size() > m.region_slots()) throw InvalidArgument("region larger than level-2 slot count");
  const double budget = episode_budget(cfg, task);
  SearchState s(task, budget);
  HierRollout out;
  out.phi_within = m.phi;
  out.bce_grad = diffnet::Vector::Zero(m.phi.size());
  if (cfg.entropy > 0.0) out.entropy_grad = diffnet::Vector::Zero(m.theta.size());
  double loss_sum = 0.0;
  while (!is_terminated(s, task, cfg.mode)) {
    auto pass = predict(m.predictor, out.phi_within, task, s.observations(), ContextScope::Region);
    const auto adm = admissible_mask(s, task, cfg.mode);
    const auto l1 = level1_distribution(task, pass.p, adm, s.queried_mask(), m.temperature, m.include_queried);
    const RegionId j = diffnet::sample_categorical(l1.probs, rng);
    const Region& region = task.regions()[j];
    auto l2 = level2_distribution(m, region, pass.p, s.observations(), s.remaining() / budget, adm);
    const std::size_t slot = diffnet::sample_categorical(l2.probs, rng);
    const ParcelId parcel = region.members[slot];
    auto sg = slot_gradients(m.level2, m.theta, l2, slot, cfg.entropy > 0.0);
    out.level2_grads.push_back(std::move(sg.log_prob));
    if (cfg.entropy > 0.0) out.entropy_grad += sg.entropy;

    const auto queried_before = s.queried_mask();
    const auto outcome = apply_query(s, task, parcel, cfg.mode, j);
    double loss = 0.0;
    std::vector<std::vector<double>> ups;
    ups.push_back(level1_upstream(task, l1, j, queried_before, m.temperature, m.include_queried));
    ups.push_back(single_label_upstream(pass.p, parcel, outcome.label, &loss));
    ups.push_back(adaptation_upstream(task, pass.p, s.queried_mask()));
    auto g = pass.backward(ups);
    out.level1_grads.push_back(std::move(g[0].params));
    out.bce_grad += g[1].params;
    loss_sum += loss;
    diffnet::sgd_step(out.phi_within, g[2].params, cfg.adapt.lr);
    if (cfg.adapt.steps > 1) {
      AdaptConfig extra = cfg.adapt;
      extra.steps -= 1;
      adapt_online(m.predictor, out.phi_within, task, s.observations(), s.queried_mask(), ContextScope::Region,
                   extra);
    }
  }
  out.trace = s.trace();
  const double steps = static_cast<double>(std::max<std::size_t>(out.trace.size(), 1));
  out.bce_grad /= steps;
  out.bce_loss = loss_sum / steps;
  return out;
}

struct HierTrainResult {
  HagsModel model;
  diffnet::AdamState level2_opt;
  diffnet::AdamState predictor_opt;
  std::vector<TrainLogRow> log;
};

inline HierTrainResult train_hags(const std::vector<SearchTask>& tasks, HagsModel model, const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {}, const AbortCallback<HagsModel>& on_abort = {}) {
  if (tasks.empty()) throw InvalidArgument("training needs at least one task");
  if (cfg.batch == 0) throw InvalidArgument("batch must be >= 1");
  if (cfg.lambda < 0.0) throw InvalidArgument("lambda must be >= 0");
  model.temperature = cfg.temperature;
  model.include_queried = cfg.include_queried;
  HierTrainResult r{std::move(model), {}, {}, {}};
  r.level2_opt = diffnet::AdamState(static_cast<std::size_t>(r.model.theta.size()), cfg.policy_lr);
  r.predictor_opt = diffnet::AdamState(static_cast<std::size_t>(r.model.phi.size()), cfg.predictor_lr);
  Rng pick(mix_seed(cfg.seed, 0x4A65));
  std::uniform_int_distribution<std::size_t> which(0, tasks.size() - 1);
  const auto nphi = static_cast<std::size_t>(r.model.phi.size());
  const auto ntheta = static_cast<std::size_t>(r.model.theta.size());
  diffnet::ReinforceAccumulator acc1(nphi, cfg.returns), acc2(ntheta, cfg.returns);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    acc1.reset();
    acc2.reset();
    diffnet::Vector bce = diffnet::Vector::Zero(r.model.phi.size());
    diffnet::Vector ent = diffnet::Vector::Zero(r.model.theta.size());
    double ret = 0.0, loss = 0.0;
    for (std::size_t e = 0; e < cfg.batch; ++e) {
      const auto& task = tasks[which(pick)];
      Rng rng(mix_seed(cfg.seed, epoch, e));
      auto roll = run_training_episode_h(task, r.model, cfg, rng);
      acc1.begin_episode();
      acc2.begin_episode();
      for (std::size_t t = 0; t < roll.trace.size(); ++t) {
        const double rew = roll.trace[t].reward;  // both levels receive the parcel's reward
        acc1.add_step(roll.level1_grads[t], rew);
        acc2.add_step(roll.level2_grads[t], rew);
      }
      acc1.end_episode();
      acc2.end_episode();
      bce += roll.bce_grad;
      if (cfg.entropy > 0.0) ent += roll.entropy_grad;
      ret += episode_return(roll.trace);
      loss += roll.bce_loss;
    }
    const double nb = static_cast<double>(cfg.batch);
    diffnet::Vector g2 = acc2.gradient();
    if (cfg.entropy > 0.0) g2 -= cfg.entropy * ent / nb;
    diffnet::Vector gphi = acc1.gradient() + cfg.lambda * bce / nb;
    const TrainLogRow row{epoch, ret / nb, loss / nb, r.level2_opt.lr()};
    try {
      diffnet::check_finite(g2);
      diffnet::check_finite(gphi);
    } catch (const NumericalError& e) {
      if (on_abort) on_abort(r.model, e);
      throw;
    }
    diffnet::adam_step(r.model.theta, g2, r.level2_opt);
    diffnet::adam_step(r.model.phi, gphi, r.predictor_opt);
    r.level2_opt.episodes += cfg.batch;
    r.predictor_opt.episodes += cfg.batch;
    r.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return r;
}

// Argmax at both levels; level-2 parameters frozen, predictor adapted online.
class HagsSearcher final : public Searcher {
 public:
  HagsSearcher(std::shared_ptr<const HagsModel> model, Selection sel, AdaptConfig adapt)
      : model_(std::move(model)), sel_(sel), adapt_(adapt) {}

  std::string name() const override { return "hags"; }

  void reset(const SearchTask& task, const SearchState&) override {
    for (const auto& r : task.regions())
      if (r.members.size() > model_->region_slots()) throw InvalidArgument("region larger than level-2 slot count");
    phi_ = model_->phi;
    pass_.reset();
  }

  Choice select(const SearchTask& task, const SearchState& s, BudgetMode mode, Rng& rng) override {
    ensure_pass(task, s);
    const auto adm = admissible_mask(s, task, mode);
    const auto l1 = level1_distribution(task, pass_->p, adm, s.queried_mask(), model_->temperature,
                                        model_->include_queried);
    const RegionId j = pick(l1.probs, rng);
    const Region& region = task.regions()[j];
    auto l2 = level2_distribution(*model_, region, pass_->p, s.observations(), s.remaining() / s.total_budget(), adm);
    return {region.members[pick(l2.probs, rng)], j};
  }

  void observe(const SearchTask& task, const SearchState& s, ParcelId parcel) override {
    if (!pass_ || pass_step_ != s.step() - 1) {
      const auto pre = pre_query_observations(s, parcel);
      pass_ = predict(model_->predictor, phi_, task, pre, ContextScope::Region);
    }
    if (adapt_.lr != 0.0) {
      auto g = pass_->backward(adaptation_upstream(task, pass_->p, s.queried_mask()));
      diffnet::sgd_step(phi_, g[0].params, adapt_.lr);
      if (adapt_.steps > 1) {
        AdaptConfig extra = adapt_;
        extra.steps -= 1;
        adapt_online(model_->predictor, phi_, task, s.observations(), s.queried_mask(), ContextScope::Region, extra);
      }
    }
    pass_.reset();
  }

  std::vector<double> scores(const SearchTask& task, const SearchState& s) override {
    ensure_pass(task, s);
    return pass_->p;
  }

  // Joint probability pi1(region) * pi2(parcel | region).
  std::vector<double> distribution(const SearchTask& task, const SearchState& s, BudgetMode mode) override {
    ensure_pass(task, s);
    const auto adm = admissible_mask(s, task, mode);
    const auto l1 = level1_distribution(task, pass_->p, adm, s.queried_mask(), model_->temperature,
                                        model_->include_queried);
    std::vector<double> d(task.size(), 0.0);
    for (const auto& r : task.regions()) {
      if (l1.probs[r.id] == 0.0) continue;
      auto l2 = level2_distribution(*model_, r, pass_->p, s.observations(), s.remaining() / s.total_budget(), adm);
      for (std::size_t k = 0; k < r.members.size(); ++k) d[r.members[k]] = l1.probs[r.id] * l2.probs[k];
    }
    return d;
  }

  std::unique_ptr<Searcher> clone() const override { return std::unique_ptr<Searcher>(new HagsSearcher(*this)); }

 private:
  HagsSearcher(const HagsSearcher& o) : Searcher(), model_(o.model_), sel_(o.sel_), adapt_(o.adapt_), phi_(o.phi_) {}

  std::size_t pick(const std::vector<double>& probs, Rng& rng) const {
    return sel_ == Selection::Argmax ? diffnet::argmax(probs) : diffnet::sample_categorical(probs, rng);
  }

  void ensure_pass(const SearchTask& task, const SearchState& s) {
    if (pass_ && pass_step_ == s.step()) return;
    pass_ = predict(model_->predictor, phi_, task, s.observations(), ContextScope::Region);
    pass_step_ = s.step();
  }

  std::shared_ptr<const HagsModel> model_;
  Selection sel_;
  AdaptConfig adapt_;
  diffnet::Vector phi_;
  std::optional<PredictorPass> pass_;
  std::size_t pass_step_ = 0;
};

inline EpisodeTrace run_search_h(const SearchTask& task, std::shared_ptr<const HagsModel> model, double budget,
                                 BudgetMode mode, const AdaptConfig& adapt, Rng& rng) {
  HagsSearcher s(std::move(model), Selection::Argmax, adapt);
  return run_episode(task, s, budget, mode, rng);
}

}  // namespace ags
