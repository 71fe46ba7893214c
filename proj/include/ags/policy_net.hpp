#pragma once

// Search-module network shared by the flat policy and the level-2 policy:
// [p_slots, o_slots, B/C] -> one logit per slot.
//
// With the skip path enabled, slot k's logit also receives beta * logit(p_k),
// where beta is a single learned gain stored as the last parameter.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"

namespace ags {

struct SearchModule {
  diffnet::NetworkSpec net;
  bool skip = true;

  std::size_t slots() const { return net.output(); }
  std::size_t mlp_parameters() const { return net.parameter_count(); }
  std::size_t parameter_count() const { return net.parameter_count() + (skip ? 1 : 0); }
};

inline SearchModule search_module(std::size_t slots, std::size_t hidden, bool skip = true) {
  return {diffnet::mlp(2 * slots + 1, {hidden}, slots, diffnet::Activation::Identity), skip};
}

inline diffnet::Vector init_search_params(const SearchModule& m, Rng& rng, double skip_gain = 1.0) {
  diffnet::Vector w = diffnet::init_params(m.net, rng);
  if (!m.skip) return w;
  diffnet::Vector out(static_cast<Eigen::Index>(m.parameter_count()));
  out.head(w.size()) = w;
  out(out.size() - 1) = skip_gain;
  return out;
}

inline std::size_t slots_of(const SearchModule& m) { return m.slots(); }

// Slot s holds parcel ids[s]; remaining slots are zero padding.
inline RowMatrix search_input(std::size_t slots, std::span<const ParcelId> ids, std::span<const double> p,
                              std::span<const double> o, double budget_fraction) {
  if (ids.size() > slots)
    throw InvalidArgument("scope of " + std::to_string(ids.size()) + " parcels exceeds " + std::to_string(slots) +
                          " policy slots");
  RowMatrix x = RowMatrix::Zero(1, static_cast<Eigen::Index>(2 * slots + 1));
  for (std::size_t s = 0; s < ids.size(); ++s) {
    x(0, static_cast<Eigen::Index>(s)) = p[ids[s]];
    x(0, static_cast<Eigen::Index>(slots + s)) = o[ids[s]];
  }
  x(0, static_cast<Eigen::Index>(2 * slots)) = budget_fraction;
  return x;
}

// logit(p) with p clamped to [eps, 1-eps], and its derivative (0 outside the clamp).
inline double clamped_logit(double p, double* dlogit = nullptr) {
  const double e = diffnet::kProbEps;
  const double pc = std::clamp(p, e, 1.0 - e);
  if (dlogit) *dlogit = (p > e && p < 1.0 - e) ? 1.0 / (pc * (1.0 - pc)) : 0.0;
  return std::log(pc) - std::log1p(-pc);
}

struct SlotDistribution {
  std::vector<double> probs;  // over slots
  RowMatrix input;
  diffnet::Tape tape;
  std::vector<double> skip;   // logit(p) per used slot
  std::vector<double> dskip;  // d logit(p) / dp per used slot
};

// Masked softmax over the module's logits; slot_mask has one entry per used slot.
inline SlotDistribution slot_distribution(const SearchModule& mod, const diffnet::Vector& params,
                                          std::span<const ParcelId> ids, std::span<const double> p,
                                          std::span<const double> o, double budget_fraction,
                                          const std::vector<bool>& slot_mask) {
  if (static_cast<std::size_t>(params.size()) != mod.parameter_count())
    throw InvalidArgument("search module parameter count mismatch");
  const std::size_t slots = mod.slots();
  SlotDistribution d;
  d.input = search_input(slots, ids, p, o, budget_fraction);
  std::span<const double> w(params.data(), mod.mlp_parameters());
  RowMatrix logits = diffnet::forward(mod.net, w, d.input, &d.tape);
  std::vector<bool> mask(slots, false);
  for (std::size_t s = 0; s < slot_mask.size() && s < slots; ++s) mask[s] = slot_mask[s];
  std::vector<double> z(logits.data(), logits.data() + logits.size());
  if (mod.skip) {
    const double beta = params(params.size() - 1);
    d.skip.resize(ids.size());
    d.dskip.resize(ids.size());
    for (std::size_t s = 0; s < ids.size(); ++s) {
      d.skip[s] = clamped_logit(p[ids[s]], &d.dskip[s]);
      z[s] += beta * d.skip[s];
    }
  }
  d.probs = diffnet::masked_softmax(z, mask);
  return d;
}

struct SlotGradients {
  diffnet::Vector log_prob;  // d log pi(action) / d params
  diffnet::Vector entropy;   // d H / d params (empty unless requested)
  RowMatrix input;           // d log pi(action) / d input
};

inline SlotGradients slot_gradients(const SearchModule& mod, const diffnet::Vector& params, SlotDistribution& dist,
                                    std::size_t action, bool with_entropy) {
  const auto k = static_cast<Eigen::Index>(dist.probs.size());
  std::vector<RowMatrix> up;
  const auto lg = diffnet::log_softmax_grad(dist.probs, action);
  up.push_back(Eigen::Map<const RowMatrix>(lg.data(), 1, k));
  std::vector<double> eg;
  if (with_entropy) {
    eg = diffnet::entropy_grad(dist.probs);
    up.push_back(Eigen::Map<const RowMatrix>(eg.data(), 1, k));
  }
  std::span<const double> w(params.data(), mod.mlp_parameters());
  auto g = diffnet::backward_multi(mod.net, w, dist.tape, up);
  SlotGradients out;
  auto widen = [&](const diffnet::Vector& mlp, const std::vector<double>& dz) {
    if (!mod.skip) return mlp;
    diffnet::Vector full(static_cast<Eigen::Index>(mod.parameter_count()));
    full.head(mlp.size()) = mlp;
    double gb = 0.0;
    for (std::size_t s = 0; s < dist.skip.size(); ++s) gb += dz[s] * dist.skip[s];
    full(full.size() - 1) = gb;
    return full;
  };
  out.log_prob = widen(g[0].params, lg);
  out.input = std::move(g[0].input);
  if (mod.skip) {
    const double beta = params(params.size() - 1);
    for (std::size_t s = 0; s < dist.skip.size(); ++s)
      out.input(0, static_cast<Eigen::Index>(s)) += lg[s] * beta * dist.dskip[s];
  }
  if (with_entropy) out.entropy = widen(g[1].params, eg);
  return out;
}

}  // namespace ags
