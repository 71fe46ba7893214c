#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ags/core.hpp"
#include "ags/diffnet.hpp"
#include "ags/searcher.hpp"

namespace ags::testing {

// Parcels on a line at x = 10*i, unit-count feature 2 + i, the given labels and
// d-2 extra seeded features.
inline SearchTask line_task(const std::vector<int>& labels, std::size_t d = 4, double budget = 3.0,
                            CostKind cost = CostKind::Uniform, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::vector<Parcel> ps;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Parcel p;
    p.id = i;
    p.location = {10.0 * static_cast<double>(i), 0.0};
    p.features.push_back(2.0 + static_cast<double>(i));
    for (std::size_t f = 1; f < d; ++f) p.features.push_back(n01(rng));
    p.label = labels[i];
    ps.push_back(p);
  }
  return SearchTask(ps, {}, CostModel{cost, {0.0, 0.0}}, budget);
}

// Random task with n parcels scattered in a 1000 m square.
inline SearchTask random_task(std::size_t n, std::size_t d, double rate, double budget, std::uint64_t seed,
                              std::vector<Region> regions = {}, CostKind cost = CostKind::Uniform) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::bernoulli_distribution lab(rate);
  std::poisson_distribution<int> units(2.0);
  std::vector<Parcel> ps;
  for (std::size_t i = 0; i < n; ++i) {
    Parcel p;
    p.id = i;
    p.location = {u(rng), u(rng)};
    p.features.push_back(2.0 + units(rng));
    for (std::size_t f = 1; f < d; ++f) p.features.push_back(n01(rng));
    p.label = lab(rng) ? 1 : 0;
    ps.push_back(p);
  }
  return SearchTask(ps, std::move(regions), CostModel{cost, {500.0, 500.0}}, budget);
}

// Contiguous blocks of `size` ids.
inline std::vector<Region> block_regions(std::size_t n, std::size_t size) {
  std::vector<Region> out;
  for (std::size_t a = 0; a < n; a += size) {
    Region r;
    for (std::size_t i = a; i < std::min(n, a + size); ++i) r.members.push_back(i);
    out.push_back(r);
  }
  return out;
}

// Central difference of f at x along each coordinate.
inline diffnet::Vector central_difference(const std::function<double(const diffnet::Vector&)>& f,
                                          const diffnet::Vector& x, double h = 1e-5) {
  diffnet::Vector g(x.size());
  diffnet::Vector y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = y[i];
    y[i] = x0 + h;
    const double fp = f(y);
    y[i] = x0 - h;
    const double fm = f(y);
    y[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor only matters for
// entries that are zero up to finite-difference noise.
inline double max_relative_error(const diffnet::Vector& a, const diffnet::Vector& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({floor, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline diffnet::Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const diffnet::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace ags::testing
