#pragma once

// Problem instances, episode state and exact budget bookkeeping shared by
// every searcher.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ags/errors.hpp"

namespace ags {

using ParcelId = std::size_t;
using RegionId = std::size_t;
using Rng = std::mt19937_64;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double manhattan(Point a, Point b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

struct Parcel {
  ParcelId id = 0;
  Point location;
  std::vector<double> features;
  int label = 0;
};

struct Region {
  RegionId id = 0;
  std::vector<ParcelId> members;
};

enum class CostKind { Uniform, Manhattan };

struct CostModel {
  CostKind kind = CostKind::Uniform;
  Point depot;  // dummy start parcel; only Manhattan uses it
};

enum class BudgetMode { PaperLiteral, StrictAffordable };

inline std::string to_string(CostKind k) { return k == CostKind::Uniform ? "uniform" : "manhattan"; }
inline std::string to_string(BudgetMode m) {
  return m == BudgetMode::PaperLiteral ? "paper-literal" : "strict-affordable";
}
inline CostKind parse_cost_kind(const std::string& s) {
  if (s == "uniform") return CostKind::Uniform;
  if (s == "manhattan") return CostKind::Manhattan;
  throw InvalidArgument("unknown cost model kind '" + s + "'");
}
inline BudgetMode parse_budget_mode(const std::string& s) {
  if (s == "paper-literal") return BudgetMode::PaperLiteral;
  if (s == "strict-affordable") return BudgetMode::StrictAffordable;
  throw InvalidArgument("unknown budget mode '" + s + "'");
}

inline Point centroid(std::span<const Parcel> parcels) {
  Point c;
  if (parcels.empty()) return c;
  for (const auto& p : parcels) {
    c.x += p.location.x;
    c.y += p.location.y;
  }
  c.x /= static_cast<double>(parcels.size());
  c.y /= static_cast<double>(parcels.size());
  return c;
}

// Immutable search instance. Construction validates every invariant and throws
// InvalidArgument naming the first violation.
class SearchTask {
 public:
  SearchTask(std::vector<Parcel> parcels, std::vector<Region> regions, CostModel cost, double budget,
             std::size_t unit_feature = 0)
      : parcels_(std::move(parcels)),
        regions_(std::move(regions)),
        cost_(cost),
        budget_(budget),
        unit_feature_(unit_feature) {
    validate();
    build_cache();
  }

  // Single region covering every parcel.
  static std::vector<Region> single_region(std::size_t n) {
    Region r;
    r.members.resize(n);
    std::iota(r.members.begin(), r.members.end(), ParcelId{0});
    return {r};
  }

  std::size_t size() const { return parcels_.size(); }
  std::size_t feature_width() const { return width_; }
  std::size_t unit_feature() const { return unit_feature_; }
  const std::vector<Parcel>& parcels() const { return parcels_; }
  const Parcel& parcel(ParcelId id) const {
    check_id(id);
    return parcels_[id];
  }
  const std::vector<Region>& regions() const { return regions_; }
  RegionId region_of(ParcelId id) const {
    check_id(id);
    return region_of_[id];
  }
  // Index of the parcel within its region's member list.
  std::size_t slot_of(ParcelId id) const {
    check_id(id);
    return slot_of_[id];
  }
  const CostModel& cost_model() const { return cost_; }
  double budget() const { return budget_; }
  double positive_rate() const { return positive_rate_; }
  std::size_t positives() const { return positives_; }
  // K x d feature matrix in parcel-id order.
  const RowMatrix& features() const { return features_; }

  void check_id(ParcelId id) const {
    if (id >= parcels_.size()) throw InvalidArgument("unknown parcel id " + std::to_string(id));
  }

  SearchTask with_budget(double budget) const {
    SearchTask t = *this;
    if (!(budget > 0.0)) throw InvalidArgument("budget must be > 0");
    t.budget_ = budget;
    return t;
  }
  SearchTask with_cost_model(CostModel cost) const {
    SearchTask t = *this;
    t.cost_ = cost;
    return t;
  }
  SearchTask with_regions(std::vector<Region> regions) const {
    return SearchTask(parcels_, std::move(regions), cost_, budget_, unit_feature_);
  }
  SearchTask with_label(ParcelId id, int label) const {
    check_id(id);
    auto parcels = parcels_;
    parcels[id].label = label;
    return SearchTask(std::move(parcels), regions_, cost_, budget_, unit_feature_);
  }

 private:
  void validate() {
    if (parcels_.empty()) throw InvalidArgument("task has no parcels");
    if (!(budget_ > 0.0) || !std::isfinite(budget_)) throw InvalidArgument("budget must be a positive finite number");
    width_ = parcels_.front().features.size();
    if (width_ == 0) throw InvalidArgument("parcel 0: empty feature vector");
    if (unit_feature_ >= width_) throw InvalidArgument("unit-count feature index out of range");
    for (std::size_t i = 0; i < parcels_.size(); ++i) {
      const auto& p = parcels_[i];
      const std::string where = "parcel " + std::to_string(i) + ": ";
      if (p.id != i) throw InvalidArgument(where + "id must equal its index");
      if (p.features.size() != width_) throw InvalidArgument(where + "feature width mismatch");
      if (p.label != 0 && p.label != 1) throw InvalidArgument(where + "label must be 0 or 1");
      if (!(p.features[unit_feature_] >= 2.0)) throw InvalidArgument(where + "unit count must be >= 2");
      if (!std::isfinite(p.location.x) || !std::isfinite(p.location.y))
        throw InvalidArgument(where + "non-finite location");
      for (double f : p.features)
        if (!std::isfinite(f)) throw InvalidArgument(where + "non-finite feature");
    }
    if (regions_.empty()) regions_ = single_region(parcels_.size());
    std::vector<int> seen(parcels_.size(), 0);
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      regions_[r].id = r;
      if (regions_[r].members.empty()) throw InvalidArgument("region " + std::to_string(r) + ": empty");
      for (ParcelId m : regions_[r].members) {
        if (m >= parcels_.size())
          throw InvalidArgument("region " + std::to_string(r) + ": unknown parcel " + std::to_string(m));
        if (seen[m]++) throw InvalidArgument("parcel " + std::to_string(m) + " belongs to more than one region");
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw InvalidArgument("parcel " + std::to_string(i) + " is not in any region");
  }

  void build_cache() {
    const std::size_t n = parcels_.size();
    features_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width_));
    positives_ = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < width_; ++f) features_(i, f) = parcels_[i].features[f];
      positives_ += static_cast<std::size_t>(parcels_[i].label);
    }
    positive_rate_ = static_cast<double>(positives_) / static_cast<double>(n);
    region_of_.assign(n, 0);
    slot_of_.assign(n, 0);
    for (const auto& r : regions_)
      for (std::size_t s = 0; s < r.members.size(); ++s) {
        region_of_[r.members[s]] = r.id;
        slot_of_[r.members[s]] = s;
      }
  }

  std::vector<Parcel> parcels_;
  std::vector<Region> regions_;
  CostModel cost_;
  double budget_;
  std::size_t unit_feature_;
  std::size_t width_ = 0;
  std::size_t positives_ = 0;
  double positive_rate_ = 0.0;
  RowMatrix features_;
  std::vector<RegionId> region_of_;
  std::vector<std::size_t> slot_of_;
};

// nullopt is the depot.
using Position = std::optional<ParcelId>;

inline double query_cost(const SearchTask& task, Position from, ParcelId to) {
  task.check_id(to);
  if (from) task.check_id(*from);
  const auto& cm = task.cost_model();
  if (cm.kind == CostKind::Uniform) return 1.0;
  const Point a = from ? task.parcels()[*from].location : cm.depot;
  return manhattan(a, task.parcels()[to].location);
}

inline int encode_observation(int label) {
  if (label != 0 && label != 1) throw InvalidArgument("label must be 0 or 1");
  return 2 * label - 1;
}

struct Transition {
  ParcelId parcel = 0;
  std::optional<RegionId> region;
  int reward = 0;
  double cost = 0.0;
  double budget_after = 0.0;
  // Region picked at the following step; recorded for completeness, unused by REINFORCE.
  std::optional<RegionId> next_region;
  friend bool operator==(const Transition&, const Transition&) = default;
};

using EpisodeTrace = std::vector<Transition>;

inline int episode_return(const EpisodeTrace& trace) {
  int total = 0;
  for (const auto& t : trace) total += t.reward;
  return total;
}

struct QueryOutcome {
  int reward = 0;
  int label = 0;
  double cost = 0.0;
};

// Mutable single-episode state.
class SearchState {
 public:
  SearchState(const SearchTask& task, double budget)
      : obs_(task.size(), 0.0), queried_(task.size(), false), total_(budget), remaining_(budget) {
    if (!(budget > 0.0)) throw InvalidArgument("budget must be > 0");
  }
  explicit SearchState(const SearchTask& task) : SearchState(task, task.budget()) {}

  std::span<const double> observations() const { return obs_; }
  double observation(ParcelId i) const { return obs_.at(i); }
  bool is_queried(ParcelId i) const { return queried_.at(i); }
  const std::vector<bool>& queried_mask() const { return queried_; }
  std::size_t queried_count() const { return trace_.size(); }
  std::size_t step() const { return trace_.size(); }
  double remaining() const { return remaining_; }
  double total_budget() const { return total_; }
  Position position() const { return position_; }
  const EpisodeTrace& trace() const { return trace_; }
  EpisodeTrace& mutable_trace() { return trace_; }
  int found() const { return episode_return(trace_); }

 private:
  friend QueryOutcome apply_query(SearchState&, const SearchTask&, ParcelId, BudgetMode, std::optional<RegionId>);
  std::vector<double> obs_;
  std::vector<bool> queried_;
  double total_;
  double remaining_;
  Position position_;
  EpisodeTrace trace_;
};

inline bool is_admissible(const SearchState& s, const SearchTask& task, ParcelId i, BudgetMode mode) {
  if (s.is_queried(i) || !(s.remaining() > 0.0)) return false;
  if (mode == BudgetMode::PaperLiteral) return true;
  return query_cost(task, s.position(), i) <= s.remaining();
}

inline std::vector<ParcelId> admissible_actions(const SearchState& s, const SearchTask& task, BudgetMode mode) {
  std::vector<ParcelId> out;
  if (!(s.remaining() > 0.0)) return out;
  for (ParcelId i = 0; i < task.size(); ++i)
    if (is_admissible(s, task, i, mode)) out.push_back(i);
  return out;
}

inline std::vector<bool> admissible_mask(const SearchState& s, const SearchTask& task, BudgetMode mode) {
  std::vector<bool> m(task.size(), false);
  if (!(s.remaining() > 0.0)) return m;
  for (ParcelId i = 0; i < task.size(); ++i) m[i] = is_admissible(s, task, i, mode);
  return m;
}

inline bool is_terminated(const SearchState& s, const SearchTask& task, BudgetMode mode) {
  if (!(s.remaining() > 0.0)) return true;
  for (ParcelId i = 0; i < task.size(); ++i)
    if (is_admissible(s, task, i, mode)) return false;
  return true;
}

inline QueryOutcome apply_query(SearchState& s, const SearchTask& task, ParcelId parcel, BudgetMode mode,
                                std::optional<RegionId> region = std::nullopt) {
  task.check_id(parcel);
  if (s.queried_[parcel]) throw ContractViolation("parcel " + std::to_string(parcel) + " was already queried");
  if (is_terminated(s, task, mode)) throw StateError("episode is terminated");
  const double cost = query_cost(task, s.position_, parcel);
  if (mode == BudgetMode::StrictAffordable && cost > s.remaining_)
    throw InvalidArgument("parcel " + std::to_string(parcel) + " is not affordable");
  const int label = task.parcels()[parcel].label;
  s.obs_[parcel] = encode_observation(label);
  s.queried_[parcel] = true;
  s.remaining_ -= cost;
  s.position_ = parcel;
  if (!s.trace_.empty() && region && s.trace_.back().region) s.trace_.back().next_region = region;
  s.trace_.push_back(Transition{parcel, region, label, cost, s.remaining_, std::nullopt});
  return {label, label, cost};
}

// Rebuilds a state by re-applying the trace's parcel sequence.
inline SearchState replay(const SearchTask& task, double budget, const EpisodeTrace& trace, BudgetMode mode) {
  SearchState s(task, budget);
  for (const auto& t : trace) apply_query(s, task, t.parcel, mode, t.region);
  return s;
}

// Checks the trace-level invariants; returns an empty string when all hold.
inline std::string check_trace(const SearchTask& task, double budget, const EpisodeTrace& trace, BudgetMode mode) {
  std::vector<bool> seen(task.size(), false);
  double b = budget;
  double cost_sum = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& tr = trace[t];
    const std::string at = "step " + std::to_string(t) + ": ";
    if (tr.parcel >= task.size()) return at + "unknown parcel";
    if (seen[tr.parcel]) return at + "parcel re-queried";
    seen[tr.parcel] = true;
    if (!(b > 0.0)) return at + "query issued with no budget left";
    if (tr.reward != task.parcels()[tr.parcel].label) return at + "reward differs from label";
    if (mode == BudgetMode::StrictAffordable && tr.cost > b) return at + "unaffordable query";
    b -= tr.cost;
    cost_sum += tr.cost;
    if (b != tr.budget_after) return at + "budget bookkeeping mismatch";
    if (tr.region && task.region_of(tr.parcel) != *tr.region) return at + "parcel outside chosen region";
  }
  const double drift = std::abs((budget - b) - cost_sum);
  const double ulp_bound = static_cast<double>(trace.size() + 1) * 4.0 *
                           std::numeric_limits<double>::epsilon() * std::max({budget, cost_sum, 1.0});
  if (drift > ulp_bound) return "budget conservation violated";
  return {};
}

}  // namespace ags
