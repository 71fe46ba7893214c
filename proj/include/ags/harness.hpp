#pragma once

// Method x budget x family sweeps with common random numbers, report files,
// and gradient-based feature importance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ags/baselines.hpp"
#include "ags/checkpoint.hpp"
#include "ags/flat_policy.hpp"
#include "ags/hier_policy.hpp"
#include "ags/stats.hpp"
#include "ags/task_io.hpp"
#include "ags/taskgen.hpp"

namespace ags {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"random", "greedy", "greedy-adaptive", "greedy-units",
                                              "knn-as", "ags",    "hags"};
  return names;
}

// Empty when d is a valid distribution supported on the admissible set.
inline std::string check_distribution(const std::vector<double>& d, const std::vector<bool>& admissible) {
  if (d.size() != admissible.size()) return "distribution length mismatch";
  double sum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i]) || d[i] < 0.0) return "entry " + std::to_string(i) + " is not a probability";
    if (!admissible[i] && d[i] != 0.0) return "mass on inadmissible parcel " + std::to_string(i);
    sum += d[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) return "distribution sums to " + std::to_string(sum);
  return "";
}

struct CheckedEpisode {
  EpisodeTrace trace;
  std::size_t distributions_checked = 0;
};

// run_episode plus every invariant check; throws InvariantViolation.
inline CheckedEpisode run_checked_episode(const SearchTask& task, Searcher& searcher, double budget, BudgetMode mode,
                                          Rng& rng) {
  SearchState state(task, budget);
  searcher.reset(task, state);
  CheckedEpisode out;
  auto fail = [&](const std::string& why) {
    throw InvariantViolation(searcher.name() + ", step " + std::to_string(state.step()) + ": " + why);
  };
  while (!is_terminated(state, task, mode)) {
    const auto adm = admissible_mask(state, task, mode);
    const auto dist = searcher.distribution(task, state, mode);
    if (!dist.empty()) {
      const auto why = check_distribution(dist, adm);
      if (!why.empty()) fail(why);
      ++out.distributions_checked;
    }
    const Choice c = searcher.select(task, state, mode, rng);
    if (c.parcel >= task.size() || !adm[c.parcel]) fail("selected inadmissible parcel " + std::to_string(c.parcel));
    if (!dist.empty() && dist[c.parcel] <= 0.0) fail("selected a zero-probability parcel");
    if (c.region && task.region_of(c.parcel) != *c.region) fail("parcel outside the chosen region");
    apply_query(state, task, c.parcel, mode, c.region);
    searcher.observe(task, state, c.parcel);
  }
  out.trace = state.trace();
  const auto why = check_trace(task, budget, out.trace, mode);
  if (!why.empty()) fail(why);
  const SearchState re = replay(task, budget, out.trace, mode);
  const auto o1 = re.observations(), o2 = state.observations();
  if (!std::equal(o1.begin(), o1.end(), o2.begin(), o2.end()) || re.remaining() != state.remaining())
    fail("replay does not reproduce o and B");
  return out;
}

// Hierarchical searchers need regions no larger than their level-2 width.
inline SearchTask fit_regions(const SearchTask& task, std::size_t region_slots) {
  bool fits = true;
  for (const auto& r : task.regions()) fits = fits && r.members.size() <= region_slots;
  if (fits) return task;
  const std::size_t n = (task.size() + region_slots - 1) / region_slots;
  return task.with_regions(partition_regions(task, n, region_slots));
}

struct MethodModels {
  std::shared_ptr<const AgsModel> ags;
  std::shared_ptr<const HagsModel> hags;
  std::shared_ptr<const GreedyClassifier> greedy;
  AdaptConfig adapt;
  KnnConfig knn;
};

inline std::unique_ptr<Searcher> make_searcher(const std::string& method, const MethodModels& m) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError("method '" + method + "' needs a " + what + " checkpoint");
  };
  if (method == "random") return std::make_unique<RandomSearcher>();
  if (method == "greedy") {
    need(m.greedy != nullptr, "greedy");
    return std::make_unique<GreedySearcher>(m.greedy);
  }
  if (method == "greedy-adaptive") {
    need(m.greedy != nullptr, "greedy");
    return std::make_unique<GreedyAdaptiveSearcher>(m.greedy, m.adapt);
  }
  if (method == "greedy-units") return std::make_unique<UnitCountSearcher>();
  if (method == "knn-as") return std::make_unique<KnnSearcher>(m.knn);
  if (method == "ags") {
    need(m.ags != nullptr, "ags");
    return std::make_unique<AgsSearcher>(m.ags, Selection::Argmax, m.adapt);
  }
  if (method == "hags") {
    need(m.hags != nullptr, "hags");
    return std::make_unique<HagsSearcher>(m.hags, Selection::Argmax, m.adapt);
  }
  throw ConfigError("unknown method '" + method + "'");
}

struct EvalOptions {
  BudgetMode mode = BudgetMode::PaperLiteral;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

// Per-(task, run) targets found. The rng stream of (task, run) depends only on
// the seed, so every method sees the same streams.
inline std::vector<double> evaluate_method(const Searcher& prototype, const std::vector<SearchTask>& tasks,
                                           double budget, const EvalOptions& opt, std::size_t* checked = nullptr) {
  const std::size_t runs = std::max<std::size_t>(opt.runs, 1);
  const std::size_t total = tasks.size() * runs;
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> nchecked(total, 0);
  auto work = [&](std::size_t begin, std::size_t stride) {
    auto s = prototype.clone();
    for (std::size_t k = begin; k < total; k += stride) {
      const std::size_t t = k / runs, r = k % runs;
      Rng rng(mix_seed(opt.seed, t, r));
      auto ep = run_checked_episode(tasks[t], *s, budget, opt.mode, rng);
      out[k] = episode_return(ep.trace);
      nchecked[k] = ep.distributions_checked;
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, total));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t i = 0; i < threads; ++i)
      pool.emplace_back([&, i] {
        try {
          work(i, threads);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  if (checked) *checked = std::accumulate(nchecked.begin(), nchecked.end(), std::size_t{0});
  return out;
}

struct ANTCell {
  std::string family;
  std::string method;
  double budget = 0.0;
  double rate = 0.0;
  std::vector<double> runs;
  double ant_mean = 0.0;
  double ant_std = 0.0;
  double wall_seconds = 0.0;  // not written to the CSVs, which must be reproducible
};

inline ANTCell make_cell(std::string family, std::string method, double budget, double rate, std::vector<double> runs) {
  ANTCell c{std::move(family), std::move(method), budget, rate, std::move(runs), 0.0, 0.0, 0.0};
  c.ant_mean = mean(c.runs);
  c.ant_std = stddev(c.runs);
  return c;
}

struct FamilySpec {
  std::string name;
  std::string tasks;  // directory
  double rate = -1.0;  // < 0: mean realized rate of the tasks
};

struct SweepSpec {
  std::vector<std::string> methods;
  std::vector<double> budgets;
  std::vector<FamilySpec> families;
  std::size_t runs = 1;
  BudgetMode mode = BudgetMode::PaperLiteral;
  std::optional<CostKind> cost;  // overrides the task files' cost model
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::map<std::string, std::string> checkpoints;  // "ags", "hags", "greedy" -> path
  AdaptConfig adapt;
  KnnConfig knn;
  std::string output;
};

inline SweepSpec parse_sweep(const Json& j, const std::filesystem::path& base = {}) {
  try {
    SweepSpec s;
    for (const auto& m : j.at("methods")) {
      const auto name = m.get<std::string>();
      if (std::find(method_names().begin(), method_names().end(), name) == method_names().end())
        throw ConfigError("sweep: unknown method '" + name + "'");
      s.methods.push_back(name);
    }
    for (const auto& b : j.at("budgets")) s.budgets.push_back(b.get<double>());
    for (const auto& f : j.at("families")) {
      FamilySpec fs;
      fs.tasks = f.at("tasks").get<std::string>();
      if (!base.empty() && std::filesystem::path(fs.tasks).is_relative()) fs.tasks = (base / fs.tasks).string();
      fs.name = f.value("name", std::filesystem::path(fs.tasks).filename().string());
      fs.rate = f.value("rate", -1.0);
      s.families.push_back(std::move(fs));
    }
    if (s.methods.empty() || s.budgets.empty() || s.families.empty())
      throw ConfigError("sweep: methods, budgets and families must be non-empty");
    s.runs = j.value("runs", std::size_t{1});
    s.mode = parse_budget_mode(j.value("mode", std::string("paper-literal")));
    if (j.contains("cost") && !j["cost"].is_null()) s.cost = parse_cost_kind(j["cost"].get<std::string>());
    s.seed = j.value("seed", std::uint64_t{1});
    s.threads = j.value("threads", std::size_t{1});
    if (j.contains("checkpoints"))
      for (auto it = j["checkpoints"].begin(); it != j["checkpoints"].end(); ++it) {
        std::string p = it.value().get<std::string>();
        if (!base.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
        s.checkpoints[it.key()] = p;
      }
    if (j.contains("adapt")) {
      s.adapt.lr = j["adapt"].value("lr", s.adapt.lr);
      s.adapt.steps = j["adapt"].value("steps", s.adapt.steps);
    }
    if (j.contains("knn")) {
      s.knn.k = j["knn"].value("k", s.knn.k);
      s.knn.a = j["knn"].value("a", s.knn.a);
      s.knn.b = j["knn"].value("b", s.knn.b);
    }
    s.output = j.value("output", std::string());
    if (!s.output.empty() && !base.empty() && std::filesystem::path(s.output).is_relative())
      s.output = (base / s.output).string();
    return s;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
}

inline MethodModels load_models(const SweepSpec& s) {
  MethodModels m;
  m.adapt = s.adapt;
  m.knn = s.knn;
  auto load = [&](const std::string& key, const std::string& kind) -> std::optional<Checkpoint> {
    auto it = s.checkpoints.find(key);
    if (it == s.checkpoints.end()) return std::nullopt;
    auto c = load_checkpoint(it->second);
    if (c.kind != kind) throw ConfigError("checkpoint '" + it->second + "' is " + c.kind + ", expected " + kind);
    return c;
  };
  if (auto c = load("ags", "ags")) m.ags = std::make_shared<AgsModel>(std::move(*c->ags));
  if (auto c = load("hags", "hags")) m.hags = std::make_shared<HagsModel>(std::move(*c->hags));
  if (auto c = load("greedy", "greedy")) m.greedy = std::make_shared<GreedyClassifier>(std::move(*c->greedy));
  return m;
}

inline double mean_rate(const std::vector<SearchTask>& tasks) {
  double s = 0.0;
  for (const auto& t : tasks) s += t.positive_rate();
  return tasks.empty() ? 0.0 : s / static_cast<double>(tasks.size());
}

// One cell for a single method over prepared tasks.
inline ANTCell evaluate_cell(const std::string& family, const std::string& method, const MethodModels& models,
                             const std::vector<SearchTask>& tasks, double budget, double rate,
                             const EvalOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  auto proto = make_searcher(method, models);
  std::vector<double> runs;
  if (method == "hags") {
    std::vector<SearchTask> fitted;
    fitted.reserve(tasks.size());
    for (const auto& t : tasks) fitted.push_back(fit_regions(t, models.hags->region_slots()));
    runs = evaluate_method(*proto, fitted, budget, opt);
  } else {
    runs = evaluate_method(*proto, tasks, budget, opt);
  }
  auto c = make_cell(family, method, budget, rate, std::move(runs));
  c.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

inline std::vector<ANTCell> evaluate(const SweepSpec& s, const MethodModels& models) {
  EvalOptions opt{s.mode, s.runs, s.seed, s.threads};
  std::vector<ANTCell> cells;
  for (std::size_t f = 0; f < s.families.size(); ++f) {
    auto tasks = load_task_set(s.families[f].tasks);
    if (s.cost)
      for (auto& t : tasks) t = t.with_cost_model(CostModel{*s.cost, t.cost_model().depot});
    const double rate = s.families[f].rate >= 0.0 ? s.families[f].rate : mean_rate(tasks);
    EvalOptions fo = opt;
    fo.seed = mix_seed(s.seed, f);
    for (const auto& method : s.methods)
      for (double b : s.budgets) {
        try {
          cells.push_back(evaluate_cell(s.families[f].name, method, models, tasks, b, rate, fo));
        } catch (const ConfigError& e) {
          throw ConfigError("cell (" + s.families[f].name + ", " + method + ", C=" + std::to_string(b) + "): " + e.what());
        }
      }
  }
  return cells;
}

inline std::vector<ANTCell> evaluate(const SweepSpec& s) { return evaluate(s, load_models(s)); }

// ---------------------------------------------------------------------------
// Reports

inline std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr const char* kSummaryHeader = "method,budget,rate,ant_mean,ant_std,n";
inline constexpr const char* kRunsHeader = "family,method,budget,rate,run,targets";

// Summary rows pool every family of a (method, budget, rate) triple.
inline std::vector<ANTCell> pool_families(const std::vector<ANTCell>& cells) {
  std::vector<ANTCell> out;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ANTCell& o) {
      return o.method == c.method && o.budget == c.budget && o.rate == c.rate;
    });
    if (it == out.end()) {
      out.push_back(c);
      out.back().family = "";
    } else {
      it->runs.insert(it->runs.end(), c.runs.begin(), c.runs.end());
    }
  }
  for (auto& c : out) {
    c.ant_mean = mean(c.runs);
    c.ant_std = stddev(c.runs);
  }
  return out;
}

inline std::string summary_csv(const std::vector<ANTCell>& cells) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& c : pool_families(cells))
    out += c.method + "," + fmt_num(c.budget) + "," + fmt_num(c.rate) + "," + fmt_num(c.ant_mean) + "," +
           fmt_num(c.ant_std) + "," + std::to_string(c.runs.size()) + "\n";
  return out;
}

inline std::string runs_csv(const std::vector<ANTCell>& cells) {
  std::string out = std::string(kRunsHeader) + "\n";
  for (const auto& c : cells)
    for (std::size_t r = 0; r < c.runs.size(); ++r)
      out += c.family + "," + c.method + "," + fmt_num(c.budget) + "," + fmt_num(c.rate) + "," + std::to_string(r) +
             "," + fmt_num(c.runs[r]) + "\n";
  return out;
}

// Methods as rows, budgets as columns, ANT (sd) per cell.
inline std::string text_table(const std::vector<ANTCell>& cells) {
  const auto pooled = pool_families(cells);
  std::vector<double> budgets;
  std::vector<std::string> methods;
  std::vector<double> rates;
  for (const auto& c : pooled) {
    if (std::find(budgets.begin(), budgets.end(), c.budget) == budgets.end()) budgets.push_back(c.budget);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(rates.begin(), rates.end(), c.rate) == rates.end()) rates.push_back(c.rate);
  }
  std::sort(budgets.begin(), budgets.end());
  std::ostringstream os;
  char buf[128];
  for (double rate : rates) {
    std::snprintf(buf, sizeof buf, "positive rate %.4g\n", rate);
    os << buf;
    std::snprintf(buf, sizeof buf, "%-18s", "method");
    os << buf;
    for (double b : budgets) {
      std::snprintf(buf, sizeof buf, " | C=%-13g", b);
      os << buf;
    }
    os << "\n";
    for (const auto& m : methods) {
      std::snprintf(buf, sizeof buf, "%-18s", m.c_str());
      os << buf;
      for (double b : budgets) {
        auto it = std::find_if(pooled.begin(), pooled.end(),
                               [&](const ANTCell& c) { return c.method == m && c.budget == b && c.rate == rate; });
        if (it == pooled.end())
          std::snprintf(buf, sizeof buf, " | %-15s", "-");
        else
          std::snprintf(buf, sizeof buf, " | %6.3f (%6.3f)", it->ant_mean, it->ant_std);
        os << buf;
      }
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

inline void emit_reports(const std::vector<ANTCell>& cells, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.csv", summary_csv(cells));
  write_file(dir / "runs.csv", runs_csv(cells));
  write_file(dir / "table.txt", text_table(cells));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

struct SummaryRow {
  std::string method;
  double budget = 0.0, rate = 0.0, ant_mean = 0.0, ant_std = 0.0;
  std::size_t n = 0;
};

inline std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSummaryHeader) throw InvalidArgument("summary CSV: unexpected header");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw InvalidArgument("summary CSV: expected 6 fields in '" + line + "'");
    rows.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                    static_cast<std::size_t>(std::stoull(f[5]))});
  }
  return rows;
}

// Rebuilds cells (run vectors included) from runs.csv.
inline std::vector<ANTCell> parse_runs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRunsHeader) throw InvalidArgument("runs CSV: unexpected header");
  std::vector<ANTCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw InvalidArgument("runs CSV: expected 6 fields in '" + line + "'");
    const double budget = std::stod(f[2]), rate = std::stod(f[3]);
    const std::size_t run = std::stoull(f[4]);
    if (run == 0) cells.push_back(ANTCell{f[0], f[1], budget, rate, {}, 0.0, 0.0, 0.0});
    if (cells.empty() || cells.back().runs.size() != run) throw InvalidArgument("runs CSV: runs out of order");
    cells.back().runs.push_back(std::stod(f[5]));
  }
  for (auto& c : cells) {
    c.ant_mean = mean(c.runs);
    c.ant_std = stddev(c.runs);
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Feature importance: |d log pi(a_t) / d x| of the argmax action, summed over
// parcels, averaged over steps and tasks, then min-max normalized.

inline std::vector<double> normalize_importance(std::vector<double> raw) {
  if (raw.empty()) return raw;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double a = *lo, b = *hi;
  for (auto& v : raw) v = b > a ? (v - a) / (b - a) : 0.5;
  return raw;
}

inline void accumulate_abs_columns(const RowMatrix& g, std::vector<double>& acc) {
  for (Eigen::Index c = 0; c < g.cols(); ++c) acc[static_cast<std::size_t>(c)] += g.col(c).cwiseAbs().sum();
}

inline std::vector<double> feature_importance(const AgsModel& m, const std::vector<SearchTask>& tasks, double budget,
                                              BudgetMode mode, const AdaptConfig& adapt) {
  const std::size_t d = m.predictor.spec().feature_width;
  std::vector<double> acc(d, 0.0);
  std::size_t steps = 0;
  for (const auto& task : tasks) {
    diffnet::Vector phi = m.phi;
    SearchState s(task, budget > 0.0 ? budget : task.budget());
    const auto ids = all_ids(task);
    while (!is_terminated(s, task, mode)) {
      auto pass = predict(m.predictor, phi, task, s.observations(), ContextScope::Task);
      auto dist = slot_distribution(m.policy, m.zeta, ids, pass.p, s.observations(), s.remaining() / s.total_budget(),
                                    admissible_mask(s, task, mode));
      const std::size_t a = diffnet::argmax(dist.probs);
      auto sg = slot_gradients(m.policy, m.zeta, dist, a, false);
      std::vector<double> up(task.size());
      for (std::size_t i = 0; i < task.size(); ++i) up[i] = sg.input(0, static_cast<Eigen::Index>(i));
      apply_query(s, task, a, mode);
      std::vector<std::vector<double>> ups{up, adaptation_upstream(task, pass.p, s.queried_mask())};
      auto g = pass.backward(ups);
      accumulate_abs_columns(g[0].features, acc);
      ++steps;
      if (adapt.lr != 0.0) diffnet::sgd_step(phi, g[1].params, adapt.lr);
    }
  }
  for (auto& v : acc) v /= static_cast<double>(std::max<std::size_t>(steps, 1));
  return normalize_importance(acc);
}

inline std::vector<double> feature_importance(const HagsModel& m, const std::vector<SearchTask>& tasks, double budget,
                                              BudgetMode mode, const AdaptConfig& adapt) {
  const std::size_t d = m.predictor.spec().feature_width;
  std::vector<double> acc(d, 0.0);
  std::size_t steps = 0;
  for (const auto& raw : tasks) {
    const SearchTask task = fit_regions(raw, m.region_slots());
    diffnet::Vector phi = m.phi;
    SearchState s(task, budget > 0.0 ? budget : task.budget());
    while (!is_terminated(s, task, mode)) {
      auto pass = predict(m.predictor, phi, task, s.observations(), ContextScope::Region);
      const auto adm = admissible_mask(s, task, mode);
      const auto queried = s.queried_mask();
      const auto l1 = level1_distribution(task, pass.p, adm, queried, m.temperature, m.include_queried);
      const RegionId j = diffnet::argmax(l1.probs);
      const Region& region = task.regions()[j];
      auto l2 = level2_distribution(m, region, pass.p, s.observations(), s.remaining() / s.total_budget(), adm);
      const std::size_t slot = diffnet::argmax(l2.probs);
      auto sg = slot_gradients(m.level2, m.theta, l2, slot, false);
      auto up = level1_upstream(task, l1, j, queried, m.temperature, m.include_queried);
      for (std::size_t k = 0; k < region.members.size(); ++k)
        up[region.members[k]] += sg.input(0, static_cast<Eigen::Index>(k));
      apply_query(s, task, region.members[slot], mode, j);
      std::vector<std::vector<double>> ups{up, adaptation_upstream(task, pass.p, s.queried_mask())};
      auto g = pass.backward(ups);
      accumulate_abs_columns(g[0].features, acc);
      ++steps;
      if (adapt.lr != 0.0) diffnet::sgd_step(phi, g[1].params, adapt.lr);
    }
  }
  for (auto& v : acc) v /= static_cast<double>(std::max<std::size_t>(steps, 1));
  return normalize_importance(acc);
}

inline std::string importance_csv(const std::vector<double>& imp) {
  std::string out = "feature,importance\n";
  for (std::size_t f = 0; f < imp.size(); ++f) out += std::to_string(f) + "," + fmt_num(imp[f]) + "\n";
  return out;
}

}  // namespace ags
