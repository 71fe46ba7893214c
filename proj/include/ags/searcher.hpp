#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ags/core.hpp"

namespace ags {

struct Choice {
  ParcelId parcel = 0;
  std::optional<RegionId> region;
};

// Stepwise searcher contract shared by learned policies and baselines.
// A searcher owns whatever per-episode state it adapts (copies of model
// parameters); the task and state are owned by the caller.
class Searcher {
 public:
  virtual ~Searcher() = default;
  virtual std::string name() const = 0;
  virtual void reset(const SearchTask& task, const SearchState& state) = 0;
  // Requires a non-terminated state.
  virtual Choice select(const SearchTask& task, const SearchState& state, BudgetMode mode, Rng& rng) = 0;
  // Called after apply_query revealed `parcel`.
  virtual void observe(const SearchTask& task, const SearchState& state, ParcelId parcel) = 0;
  // Current per-parcel target probability (or score) for display.
  virtual std::vector<double> scores(const SearchTask& task, const SearchState& state) = 0;
  // Action distribution over parcels behind select(); empty for deterministic rankers.
  virtual std::vector<double> distribution(const SearchTask&, const SearchState&, BudgetMode) { return {}; }
  virtual std::unique_ptr<Searcher> clone() const = 0;
};

inline EpisodeTrace run_episode(const SearchTask& task, Searcher& searcher, double budget, BudgetMode mode, Rng& rng) {
  SearchState state(task, budget);
  searcher.reset(task, state);
  while (!is_terminated(state, task, mode)) {
    const Choice c = searcher.select(task, state, mode, rng);
    apply_query(state, task, c.parcel, mode, c.region);
    searcher.observe(task, state, c.parcel);
  }
  return state.trace();
}

// Observations as they were just before `parcel` was revealed.
inline std::vector<double> pre_query_observations(const SearchState& state, ParcelId parcel) {
  std::vector<double> o(state.observations().begin(), state.observations().end());
  o[parcel] = 0.0;
  return o;
}

inline std::vector<bool> pre_query_mask(const SearchState& state, ParcelId parcel) {
  std::vector<bool> q = state.queried_mask();
  q[parcel] = false;
  return q;
}

// splitmix64 finalizer; keyed sub-seeds for common random numbers.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix_seed(mix_seed(a, b), c); }

}  // namespace ags
