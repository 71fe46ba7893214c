#pragma once

// Summary statistics and the paired one-sided t-test used for method comparisons.

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ags/errors.hpp"

namespace ags {

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double std_error(std::span<const double> v) {
  return v.empty() ? 0.0 : stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

struct PairedResult {
  double mean_difference = 0.0;  // mean of a - b
  double t = 0.0;
  double p_value = 0.5;  // one-sided, H1: mean(a - b) > 0
  std::size_t n = 0;
};

// Paired t-test of a against b. Zero-variance differences are decided by sign:
// p = 0 when every difference is positive, 1 when negative, 0.5 when all zero.
inline PairedResult paired_comparison(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("paired comparison needs equal-length result vectors");
  if (a.size() < 2) throw InvalidArgument("paired comparison needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  PairedResult r;
  r.n = d.size();
  r.mean_difference = mean(d);
  const double se = std_error(d);
  if (se == 0.0) {
    r.t = r.mean_difference == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_difference);
    r.p_value = r.mean_difference > 0.0 ? 0.0 : (r.mean_difference < 0.0 ? 1.0 : 0.5);
    return r;
  }
  r.t = r.mean_difference / se;
  const boost::math::students_t dist(static_cast<double>(r.n - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace ags
