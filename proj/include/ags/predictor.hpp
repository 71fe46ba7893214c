#pragma once

// Per-parcel target probabilities p = f(x, o).
//
// Two shared networks: an embedding of [x_j, o_j] that is mean-pooled over a
// context scope, and a head on [x_i, o_i, context] with a sigmoid output. The
// scope is the whole task for flat search and the parcel's region for
// hierarchical search.

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"

namespace ags {

struct PredictorSpec {
  std::size_t feature_width = 42;
  std::size_t embed_width = 8;
  std::size_t hidden = 64;
  friend bool operator==(const PredictorSpec&, const PredictorSpec&) = default;
};

enum class ContextScope { Task, Region };

class Predictor {
 public:
  Predictor() = default;
  explicit Predictor(PredictorSpec spec)
      : spec_(spec),
        embed_{spec.feature_width + 1, {{spec.embed_width, diffnet::Activation::Relu}}},
        head_(diffnet::mlp(spec.feature_width + 1 + spec.embed_width, {spec.hidden}, 1,
                           diffnet::Activation::Sigmoid)) {
    if (spec.embed_width == 0) embed_.layers.clear();
  }

  const PredictorSpec& spec() const { return spec_; }
  const diffnet::NetworkSpec& embed_net() const { return embed_; }
  const diffnet::NetworkSpec& head_net() const { return head_; }
  std::size_t embed_params() const { return spec_.embed_width ? embed_.parameter_count() : 0; }
  std::size_t parameter_count() const { return embed_params() + head_.parameter_count(); }

  template <class Rng>
  diffnet::Vector init(Rng& rng) const {
    diffnet::Vector p(static_cast<Eigen::Index>(parameter_count()));
    if (embed_params()) p.head(static_cast<Eigen::Index>(embed_params())) = diffnet::init_params(embed_, rng);
    p.tail(static_cast<Eigen::Index>(head_.parameter_count())) = diffnet::init_params(head_, rng);
    return p;
  }

 private:
  PredictorSpec spec_;
  diffnet::NetworkSpec embed_;
  diffnet::NetworkSpec head_;
};

struct PredictorGradients {
  diffnet::Vector params;
  RowMatrix features;  // d/dx, one row per parcel
};

// One forward pass with everything needed for exact reverse passes.
class PredictorPass {
 public:
  std::vector<double> p;

  // One reverse pass per upstream dL/dp; may be called once.
  std::vector<PredictorGradients> backward(std::span<const std::vector<double>> upstreams) {
    const auto n = static_cast<Eigen::Index>(p.size());
    const std::size_t d = model_->spec().feature_width;
    const std::size_t e = model_->spec().embed_width;
    std::vector<RowMatrix> head_up;
    head_up.reserve(upstreams.size());
    for (const auto& u : upstreams) {
      if (u.size() != p.size()) throw InvalidArgument("predictor upstream length mismatch");
      head_up.push_back(Eigen::Map<const RowMatrix>(u.data(), n, 1));
    }
    const auto ne = static_cast<Eigen::Index>(model_->embed_params());
    std::span<const double> phi(params_.data(), params_.size());
    auto hg = diffnet::backward_multi(model_->head_net(), phi.subspan(static_cast<std::size_t>(ne)), head_tape_,
                                      head_up);
    std::vector<PredictorGradients> out(upstreams.size());
    std::vector<RowMatrix> embed_up;
    for (std::size_t k = 0; k < hg.size(); ++k) {
      out[k].params.resize(static_cast<Eigen::Index>(model_->parameter_count()));
      out[k].params.tail(hg[k].params.size()) = hg[k].params;
      out[k].features = hg[k].input.leftCols(static_cast<Eigen::Index>(d));
      if (e == 0) continue;
      // Context gradient is shared by every member of a scope.
      const auto ctx = hg[k].input.rightCols(static_cast<Eigen::Index>(e));
      RowMatrix up(n, static_cast<Eigen::Index>(e));
      for (const auto& scope : scopes_) {
        Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(e));
        for (auto i : scope) s += ctx.row(static_cast<Eigen::Index>(i));
        s /= static_cast<double>(scope.size());
        for (auto i : scope) up.row(static_cast<Eigen::Index>(i)) = s;
      }
      embed_up.push_back(std::move(up));
    }
    if (e != 0) {
      auto eg = diffnet::backward_multi(model_->embed_net(), phi.first(static_cast<std::size_t>(ne)), embed_tape_,
                                        embed_up);
      for (std::size_t k = 0; k < eg.size(); ++k) {
        out[k].params.head(ne) = eg[k].params;
        out[k].features += eg[k].input.leftCols(static_cast<Eigen::Index>(d));
      }
    }
    return out;
  }

  std::vector<PredictorGradients> backward(const std::vector<double>& upstream) {
    return backward(std::span<const std::vector<double>>(&upstream, 1));
  }

 private:
  friend PredictorPass predict(const Predictor&, const diffnet::Vector&, const RowMatrix&, std::span<const double>,
                               std::vector<std::vector<ParcelId>>);
  const Predictor* model_ = nullptr;
  diffnet::Vector params_;
  std::vector<std::vector<ParcelId>> scopes_;
  diffnet::Tape embed_tape_;
  diffnet::Tape head_tape_;
};

inline std::vector<std::vector<ParcelId>> context_scopes(const SearchTask& task, ContextScope scope) {
  std::vector<std::vector<ParcelId>> out;
  if (scope == ContextScope::Task) {
    out.push_back(task.regions().size() == 1 ? task.regions()[0].members : std::vector<ParcelId>{});
    if (out[0].empty())
      for (ParcelId i = 0; i < task.size(); ++i) out[0].push_back(i);
  } else {
    for (const auto& r : task.regions()) out.push_back(r.members);
  }
  return out;
}

// Core prediction over an explicit feature matrix and scope partition.
inline PredictorPass predict(const Predictor& model, const diffnet::Vector& params, const RowMatrix& features,
                             std::span<const double> obs, std::vector<std::vector<ParcelId>> scopes) {
  const std::size_t d = model.spec().feature_width;
  const std::size_t e = model.spec().embed_width;
  if (static_cast<std::size_t>(features.cols()) != d)
    throw InvalidArgument("feature width " + std::to_string(features.cols()) + " does not match predictor width " +
                          std::to_string(d));
  if (obs.size() != static_cast<std::size_t>(features.rows())) throw InvalidArgument("observation length mismatch");
  if (static_cast<std::size_t>(params.size()) != model.parameter_count())
    throw InvalidArgument("predictor parameter count mismatch");
  const auto n = features.rows();
  PredictorPass pass;
  pass.model_ = &model;
  pass.params_ = params;
  pass.scopes_ = std::move(scopes);
  std::span<const double> phi(params.data(), static_cast<std::size_t>(params.size()));
  const auto ne = model.embed_params();

  RowMatrix head_in(n, static_cast<Eigen::Index>(d + 1 + e));
  head_in.leftCols(static_cast<Eigen::Index>(d)) = features;
  for (Eigen::Index i = 0; i < n; ++i) head_in(i, static_cast<Eigen::Index>(d)) = obs[static_cast<std::size_t>(i)];
  if (e != 0) {
    RowMatrix embed_in = head_in.leftCols(static_cast<Eigen::Index>(d + 1));
    RowMatrix emb = diffnet::forward(model.embed_net(), phi.first(ne), embed_in, &pass.embed_tape_);
    std::vector<bool> covered(static_cast<std::size_t>(n), false);
    for (const auto& scope : pass.scopes_) {
      if (scope.empty()) throw InvalidArgument("empty context scope");
      Eigen::RowVectorXd ctx = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(e));
      for (auto i : scope) {
        if (i >= static_cast<std::size_t>(n) || covered[i]) throw InvalidArgument("context scopes must partition parcels");
        covered[i] = true;
        ctx += emb.row(static_cast<Eigen::Index>(i));
      }
      ctx /= static_cast<double>(scope.size());
      for (auto i : scope) head_in.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d + 1), 1,
                                         static_cast<Eigen::Index>(e)) = ctx;
    }
    for (bool c : covered)
      if (!c) throw InvalidArgument("context scopes must cover every parcel");
  }
  RowMatrix out = diffnet::forward(model.head_net(), phi.subspan(ne), head_in, &pass.head_tape_);
  pass.p.assign(out.data(), out.data() + out.size());
  return pass;
}

inline PredictorPass predict(const Predictor& model, const diffnet::Vector& params, const SearchTask& task,
                             std::span<const double> obs, ContextScope scope) {
  return predict(model, params, task.features(), obs, context_scopes(task, scope));
}

// Sum of p over a region's unqueried parcels (or all members when include_queried).
inline double region_aggregate(std::span<const double> p, const Region& region, const std::vector<bool>& queried,
                               bool include_queried = false) {
  double s = 0.0;
  for (auto i : region.members)
    if (include_queried || !queried[i]) s += p[i];
  return s;
}

// dL/dp of the masked BCE between p and revealed labels over queried parcels.
inline std::vector<double> adaptation_upstream(const SearchTask& task, std::span<const double> p,
                                               const std::vector<bool>& queried) {
  std::vector<double> y(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (queried[i]) y[i] = task.parcels()[i].label;
  return diffnet::bce(p, y, queried).grad;
}

// Pseudo-label targets: revealed label where observed, the (clamped) prediction elsewhere.
inline std::vector<double> pseudo_labels(const SearchTask& task, std::span<const double> p,
                                         const std::vector<bool>& queried) {
  std::vector<double> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    y[i] = queried[i] ? task.parcels()[i].label : std::clamp(p[i], diffnet::kProbEps, 1.0 - diffnet::kProbEps);
  return y;
}

// Gradient of the full pseudo-label BCE, normalized per observed entry so it is
// directly comparable with the masked form.
inline std::vector<double> pseudo_label_upstream(const SearchTask& task, std::span<const double> p,
                                                 const std::vector<bool>& queried) {
  const auto y = pseudo_labels(task, p, queried);
  const std::vector<bool> all(p.size(), true);
  auto g = diffnet::bce(p, y, all).grad;
  std::size_t observed = 0;
  for (bool q : queried) observed += q ? 1 : 0;
  if (observed == 0) return std::vector<double>(p.size(), 0.0);
  const double scale = static_cast<double>(p.size()) / static_cast<double>(observed);
  for (auto& v : g) v *= scale;
  return g;
}

struct AdaptConfig {
  double lr = 0.05;
  std::size_t steps = 1;
};

// One (or cfg.steps) SGD steps of masked BCE on the queried parcels.
inline void adapt_online(const Predictor& model, diffnet::Vector& params, const SearchTask& task,
                         std::span<const double> obs, const std::vector<bool>& queried, ContextScope scope,
                         const AdaptConfig& cfg) {
  bool any = false;
  for (bool q : queried) any = any || q;
  if (!any || cfg.lr == 0.0) return;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    auto pass = predict(model, params, task, obs, scope);
    auto g = pass.backward(adaptation_upstream(task, pass.p, queried));
    diffnet::sgd_step(params, g[0].params, cfg.lr);
  }
}

}  // namespace ags
