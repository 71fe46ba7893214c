#pragma once

// Synthetic parcel pools and bootstrapped search tasks.
//
// Feature layout: [unit_count, neighborhood features..., parcel features...].
// Neighborhood features are shared (up to noise) by every parcel of a spatial
// cluster, the way tract-level census attributes are. Labels are Bernoulli
// draws from sigmoid(intercept + w.x + cluster effect + noise).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ags/core.hpp"
#include "ags/errors.hpp"
#include "ags/searcher.hpp"

namespace ags {

struct GeneratorConfig {
  std::size_t pool_size = 20000;
  std::size_t feature_width = 42;
  std::size_t neighborhood_features = 8;
  double extent = 10000.0;  // meters, square map
  std::size_t clusters = 200;
  double cluster_radius = 150.0;  // std of member offsets, meters
  double intercept = 0.0;
  // Explicit weights (size feature_width); when empty they are drawn from
  // N(0, weight_scale^2) for the first `informative` parcel features.
  std::vector<double> weights;
  double weight_scale = 1.0;
  std::size_t informative = 6;
  double neighborhood_weight_scale = 0.3;
  double neighborhood_noise = 0.2;  // sd of a parcel's deviation from its cluster latent
  double cluster_effect_sd = 1.0;  // residual per-cluster effect not explained by features
  double noise_sd = 0.5;
  std::size_t unit_feature = 0;
  double unit_mean_extra = 1.5;  // units = 2 + Poisson(unit_mean_extra)
  double unit_weight = 0.3;      // label coefficient on the centered unit count
  std::uint64_t seed = 1;
};

struct PoolParcel {
  Point location;
  std::vector<double> features;
  int label = 0;
  std::size_t cluster = 0;
};

struct ParcelPool {
  std::vector<PoolParcel> parcels;
  std::vector<Point> cluster_centers;
  std::vector<double> cluster_effects;
  std::vector<double> weights;  // ground-truth label weights, unit feature included
  double intercept = 0.0;
  double unit_center = 0.0;
  std::size_t unit_feature = 0;
  double positive_rate() const {
    double s = 0;
    for (const auto& p : parcels) s += p.label;
    return parcels.empty() ? 0.0 : s / static_cast<double>(parcels.size());
  }
};

inline ParcelPool generate_pool(const GeneratorConfig& cfg) {
  if (cfg.clusters == 0) throw InvalidArgument("generator needs at least one cluster");
  if (cfg.pool_size == 0) throw InvalidArgument("pool size must be > 0");
  if (cfg.feature_width < 1 + cfg.neighborhood_features)
    throw InvalidArgument("feature width too small for the unit-count and neighborhood features");
  if (cfg.unit_feature != 0) throw InvalidArgument("unit-count feature must be index 0 in generated pools");
  if (!cfg.weights.empty() && cfg.weights.size() != cfg.feature_width)
    throw InvalidArgument("weight vector length must equal feature width");
  Rng rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, cfg.extent);
  const std::size_t d = cfg.feature_width;
  const std::size_t nb = cfg.neighborhood_features;

  ParcelPool pool;
  pool.unit_feature = 0;
  pool.intercept = cfg.intercept;
  pool.unit_center = 2.0 + cfg.unit_mean_extra;
  if (!cfg.weights.empty()) {
    pool.weights = cfg.weights;
  } else {
    pool.weights.assign(d, 0.0);
    pool.weights[0] = cfg.unit_weight;
    for (std::size_t f = 1; f <= nb; ++f) pool.weights[f] = cfg.neighborhood_weight_scale * n01(rng);
    for (std::size_t f = 1 + nb; f < std::min(d, 1 + nb + cfg.informative); ++f)
      pool.weights[f] = cfg.weight_scale * n01(rng);
  }

  std::vector<std::vector<double>> latent(cfg.clusters, std::vector<double>(nb));
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    pool.cluster_centers.push_back({u(rng), u(rng)});
    pool.cluster_effects.push_back(cfg.cluster_effect_sd * n01(rng));
    for (auto& z : latent[c]) z = n01(rng);
  }
  std::uniform_int_distribution<std::size_t> pick_cluster(0, cfg.clusters - 1);
  std::poisson_distribution<int> extra_units(cfg.unit_mean_extra);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  pool.parcels.reserve(cfg.pool_size);
  for (std::size_t i = 0; i < cfg.pool_size; ++i) {
    PoolParcel p;
    p.cluster = pick_cluster(rng);
    const Point c = pool.cluster_centers[p.cluster];
    p.location = {c.x + cfg.cluster_radius * n01(rng), c.y + cfg.cluster_radius * n01(rng)};
    p.features.resize(d);
    p.features[0] = 2.0 + extra_units(rng);
    for (std::size_t f = 0; f < nb; ++f) p.features[1 + f] = latent[p.cluster][f] + cfg.neighborhood_noise * n01(rng);
    for (std::size_t f = 1 + nb; f < d; ++f) p.features[f] = n01(rng);
    double z = pool.intercept + pool.cluster_effects[p.cluster] + cfg.noise_sd * n01(rng);
    z += pool.weights[0] * (p.features[0] - pool.unit_center);
    for (std::size_t f = 1; f < d; ++f) z += pool.weights[f] * p.features[f];
    p.label = u01(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
    pool.parcels.push_back(std::move(p));
  }
  return pool;
}

// Balanced spatial grid: columns of equal count by x, each split into rows of
// equal count by y. Every cell holds floor or ceil of size/N parcels.
inline std::vector<Region> grid_partition(std::span<const Point> locations, std::size_t n_regions,
                                          std::size_t region_size) {
  const std::size_t total = locations.size();
  if (n_regions == 0 || region_size == 0) throw InvalidArgument("region count and size must be > 0");
  if (n_regions * region_size < total)
    throw InvalidArgument("N x K = " + std::to_string(n_regions * region_size) + " cannot hold " +
                          std::to_string(total) + " parcels");
  if (n_regions > total) throw InvalidArgument("more regions than parcels");
  std::size_t cols = 1;
  for (std::size_t c = 1; c * c <= n_regions; ++c)
    if (n_regions % c == 0) cols = c;
  const std::size_t rows = n_regions / cols;
  std::vector<ParcelId> order(total);
  std::iota(order.begin(), order.end(), ParcelId{0});
  std::stable_sort(order.begin(), order.end(), [&](ParcelId a, ParcelId b) {
    if (locations[a].x != locations[b].x) return locations[a].x < locations[b].x;
    return locations[a].y < locations[b].y;
  });
  // Even split of [0, n) into k chunks.
  auto chunk = [](std::size_t n, std::size_t k, std::size_t i) { return n * i / k; };
  std::vector<Region> out;
  for (std::size_t c = 0; c < cols; ++c) {
    // Column c receives `rows` cells' worth of parcels.
    const std::size_t lo = chunk(total, n_regions, c * rows), hi = chunk(total, n_regions, (c + 1) * rows);
    std::vector<ParcelId> col(order.begin() + static_cast<std::ptrdiff_t>(lo),
                              order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::stable_sort(col.begin(), col.end(), [&](ParcelId a, ParcelId b) {
      if (locations[a].y != locations[b].y) return locations[a].y < locations[b].y;
      return locations[a].x < locations[b].x;
    });
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t a = chunk(total, n_regions, c * rows + r) - lo;
      const std::size_t b = chunk(total, n_regions, c * rows + r + 1) - lo;
      Region reg;
      reg.id = out.size();
      reg.members.assign(col.begin() + static_cast<std::ptrdiff_t>(a), col.begin() + static_cast<std::ptrdiff_t>(b));
      std::sort(reg.members.begin(), reg.members.end());
      out.push_back(std::move(reg));
    }
  }
  return out;
}

inline std::vector<Region> partition_regions(const SearchTask& task, std::size_t n_regions, std::size_t region_size) {
  std::vector<Point> loc;
  loc.reserve(task.size());
  for (const auto& p : task.parcels()) loc.push_back(p.location);
  return grid_partition(loc, n_regions, region_size);
}

struct BootstrapSpec {
  std::size_t task_size = 100;
  double rate_mean = 0.10;
  double rate_sd = 0.0001;
  // Candidates are the `locality` pool parcels nearest a random anchor; 0 uses the whole pool.
  std::size_t locality = 400;
  double budget = 25.0;
  CostKind cost = CostKind::Uniform;
  std::size_t regions = 1;
  std::size_t region_size = 0;  // 0: task_size / regions rounded up
};

inline SearchTask bootstrap_task(const ParcelPool& pool, const BootstrapSpec& spec, Rng& rng) {
  if (spec.task_size == 0) throw InvalidArgument("task size must be > 0");
  if (pool.parcels.empty()) throw InfeasibleSpec("empty pool");
  std::normal_distribution<double> rate_draw(spec.rate_mean, spec.rate_sd);
  double rate = spec.rate_sd > 0.0 ? rate_draw(rng) : spec.rate_mean;
  rate = std::clamp(rate, 1e-9, 1.0 - 1e-9);
  const auto n_pos = static_cast<std::size_t>(std::llround(rate * static_cast<double>(spec.task_size)));

  std::vector<std::size_t> cand(pool.parcels.size());
  std::iota(cand.begin(), cand.end(), std::size_t{0});
  if (spec.locality > 0 && spec.locality < pool.parcels.size()) {
    std::uniform_int_distribution<std::size_t> anchor_pick(0, pool.parcels.size() - 1);
    const Point anchor = pool.parcels[anchor_pick(rng)].location;
    auto dist = [&](std::size_t i) {
      const Point q = pool.parcels[i].location;
      return (q.x - anchor.x) * (q.x - anchor.x) + (q.y - anchor.y) * (q.y - anchor.y);
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(spec.locality), cand.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = dist(a), db = dist(b);
                        return da != db ? da < db : a < b;
                      });
    cand.resize(spec.locality);
    std::sort(cand.begin(), cand.end());
  }
  std::vector<std::size_t> pos, neg;
  for (auto i : cand) (pool.parcels[i].label ? pos : neg).push_back(i);
  if (n_pos > 0 && pos.empty()) throw InfeasibleSpec("no positive parcels among the candidates");
  if (n_pos < spec.task_size && neg.empty()) throw InfeasibleSpec("no negative parcels among the candidates");

  std::vector<std::size_t> chosen;
  chosen.reserve(spec.task_size);
  if (n_pos > 0) {
    std::uniform_int_distribution<std::size_t> up(0, pos.size() - 1);
    for (std::size_t k = 0; k < n_pos; ++k) chosen.push_back(pos[up(rng)]);
  }
  if (n_pos < spec.task_size) {
    std::uniform_int_distribution<std::size_t> un(0, neg.size() - 1);
    for (std::size_t k = n_pos; k < spec.task_size; ++k) chosen.push_back(neg[un(rng)]);
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);

  std::vector<Parcel> parcels;
  parcels.reserve(chosen.size());
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const auto& src = pool.parcels[chosen[k]];
    parcels.push_back(Parcel{k, src.location, src.features, src.label});
  }
  CostModel cm{spec.cost, centroid(parcels)};
  std::vector<Region> regions;
  if (spec.regions > 1) {
    std::vector<Point> loc;
    for (const auto& p : parcels) loc.push_back(p.location);
    const std::size_t k = spec.region_size ? spec.region_size : (spec.task_size + spec.regions - 1) / spec.regions;
    regions = grid_partition(loc, spec.regions, k);
  }
  return SearchTask(std::move(parcels), std::move(regions), cm, spec.budget, pool.unit_feature);
}

inline std::vector<SearchTask> bootstrap_tasks(const ParcelPool& pool, const BootstrapSpec& spec, std::size_t count,
                                               std::uint64_t seed) {
  std::vector<SearchTask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    out.push_back(bootstrap_task(pool, spec, rng));
  }
  return out;
}

}  // namespace ags
