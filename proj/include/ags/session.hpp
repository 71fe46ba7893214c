#pragma once

// Interactive search sessions: the engine suggests a parcel, an operator
// reports the observed label, and the searcher adapts. Every session is
// journaled as JSON lines (one create record, one record per observation) and
// can be rebuilt by replaying its journal.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "ags/harness.hpp"
#include "ags/task_io.hpp"

namespace ags {

enum class SessionStatus { Active, Exhausted, Closed };

inline std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Exhausted: return "exhausted";
    case SessionStatus::Closed: return "closed";
  }
  return "?";
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct SessionConfig {
  std::string task_id;
  std::string method = "ags";
  double budget = 0.0;  // <= 0: the task's budget
  BudgetMode mode = BudgetMode::PaperLiteral;
  std::uint64_t seed = 1;
};

struct Suggestion {
  ParcelId parcel = 0;
  std::optional<RegionId> region;
  double probability = 0.0;  // predicted target probability of the parcel
  double cost = 0.0;         // travel cost from the current position
  double remaining = 0.0;
};

inline Json suggestion_json(const Suggestion& s) {
  Json j = {{"parcel_id", s.parcel}, {"p", s.probability}, {"cost", s.cost}, {"remaining_budget", s.remaining}};
  j["region_id"] = s.region ? Json(*s.region) : Json(nullptr);
  return j;
}

class Session {
 public:
  Session(std::string id, SessionConfig cfg, SearchTask task, std::unique_ptr<Searcher> searcher)
      : id_(std::move(id)),
        cfg_(std::move(cfg)),
        task_(std::move(task)),
        searcher_(std::move(searcher)),
        state_(task_, cfg_.budget > 0.0 ? cfg_.budget : task_.budget()),
        rng_(cfg_.seed),
        created_(utc_now()),
        updated_(created_) {
    searcher_->reset(task_, state_);
    refresh_status();
  }

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  SessionStatus status() const { return status_; }
  const SearchState& state() const { return state_; }
  const std::optional<Suggestion>& pending() const { return pending_; }

  // Repeated calls without an observation return the pending suggestion.
  Suggestion suggest() {
    if (status_ != SessionStatus::Active) throw StateError("session " + id_ + " is " + to_string(status_));
    if (pending_) return *pending_;
    const Choice c = searcher_->select(task_, state_, cfg_.mode, rng_);
    const auto p = searcher_->scores(task_, state_);
    pending_ = Suggestion{c.parcel, c.region, p[c.parcel], query_cost(task_, state_.position(), c.parcel),
                          state_.remaining()};
    return *pending_;
  }

  // Applies an observed label. Without override the parcel must be the pending suggestion.
  void observe(ParcelId parcel, int label, bool override_plan) {
    if (status_ != SessionStatus::Active) throw StateError("session " + id_ + " is " + to_string(status_));
    if (label != 0 && label != 1) throw InvalidArgument("label must be 0 or 1");
    task_.check_id(parcel);
    if (state_.is_queried(parcel)) throw SequencingError("parcel " + std::to_string(parcel) + " was already observed");
    if (!override_plan) {
      if (!pending_) throw SequencingError("no pending suggestion; request one or set override");
      if (pending_->parcel != parcel)
        throw SequencingError("parcel " + std::to_string(parcel) + " is not the pending suggestion " +
                              std::to_string(pending_->parcel));
    }
    if (!is_admissible(state_, task_, parcel, cfg_.mode))
      throw SequencingError("parcel " + std::to_string(parcel) + " is not admissible under the session's budget mode");
    std::optional<RegionId> region;
    if (pending_ && pending_->parcel == parcel) region = pending_->region;
    else if (task_.regions().size() > 1) region = task_.region_of(parcel);
    if (task_.parcels()[parcel].label != label) task_ = task_.with_label(parcel, label);
    apply_query(state_, task_, parcel, cfg_.mode, region);
    searcher_->observe(task_, state_, parcel);
    pending_.reset();
    updated_ = utc_now();
    refresh_status();
  }

  void close() {
    status_ = SessionStatus::Closed;
    pending_.reset();
    updated_ = utc_now();
  }

  // Read-only snapshot; timestamps are the only non-replayable fields.
  Json snapshot() {
    Json j;
    j["id"] = id_;
    j["task_id"] = cfg_.task_id;
    j["method"] = cfg_.method;
    j["mode"] = to_string(cfg_.mode);
    j["status"] = to_string(status_);
    j["budget"] = {{"total", state_.total_budget()}, {"remaining", state_.remaining()}};
    j["step"] = state_.step();
    j["found"] = state_.found();
    j["position"] = state_.position() ? Json(*state_.position()) : Json(nullptr);
    Json order = Json::array();
    Json costs = Json::array();
    for (const auto& t : state_.trace()) {
      order.push_back(t.parcel);
      costs.push_back(t.cost);
    }
    j["queried_order"] = order;
    j["costs"] = costs;
    j["pending_suggestion"] = pending_ ? suggestion_json(*pending_) : Json(nullptr);
    const auto p = searcher_->scores(task_, state_);
    Json parcels = Json::array();
    for (const auto& pc : task_.parcels())
      parcels.push_back({{"id", pc.id},
                         {"loc", {pc.location.x, pc.location.y}},
                         {"o", state_.observation(pc.id)},
                         {"p", p[pc.id]},
                         {"queried", state_.is_queried(pc.id)}});
    j["parcels"] = std::move(parcels);
    j["created"] = created_;
    j["updated"] = updated_;
    return j;
  }

 private:
  void refresh_status() {
    if (status_ == SessionStatus::Closed) return;
    status_ = is_terminated(state_, task_, cfg_.mode) ? SessionStatus::Exhausted : SessionStatus::Active;
  }

  std::string id_;
  SessionConfig cfg_;
  SearchTask task_;
  std::unique_ptr<Searcher> searcher_;
  SearchState state_;
  Rng rng_;
  std::optional<Suggestion> pending_;
  SessionStatus status_ = SessionStatus::Active;
  std::string created_;
  std::string updated_;
};

// Task registry, searcher models and the live sessions. Each session is guarded
// by its own mutex; the session map by a shared mutex.
class SessionManager {
 public:
  SessionManager(std::map<std::string, SearchTask> tasks, MethodModels models,
                 std::optional<std::filesystem::path> journal_dir = std::nullopt)
      : tasks_(std::move(tasks)), models_(std::move(models)), journal_dir_(std::move(journal_dir)) {
    if (journal_dir_) std::filesystem::create_directories(*journal_dir_);
    std::random_device rd;
    ids_.seed((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  }

  Json list_tasks() const {
    Json out = Json::array();
    for (const auto& [id, t] : tasks_)
      out.push_back({{"id", id},
                     {"parcels", t.size()},
                     {"regions", t.regions().size()},
                     {"budget", t.budget()},
                     {"cost_model", to_string(t.cost_model().kind)}});
    return out;
  }

  const std::map<std::string, SearchTask>& tasks() const { return tasks_; }

  Json create(const SessionConfig& cfg) {
    auto session = build(new_id(), cfg);
    const std::string id = session->id();
    journal(id, {{"type", "create"},
                 {"id", id},
                 {"task_id", cfg.task_id},
                 {"method", cfg.method},
                 {"budget", session->state().total_budget()},
                 {"mode", to_string(cfg.mode)},
                 {"seed", cfg.seed}},
            true);
    auto entry = std::make_shared<Entry>(std::move(session));
    std::unique_lock lk(map_mu_);
    sessions_[id] = entry;
    std::lock_guard g(entry->mu);
    return entry->session->snapshot();
  }

  Json suggestion(const std::string& id) {
    auto e = find(id);
    std::lock_guard g(e->mu);
    return suggestion_json(e->session->suggest());
  }

  Json observe(const std::string& id, ParcelId parcel, int label, bool override_plan) {
    auto e = find(id);
    std::lock_guard g(e->mu);
    const auto& pend = e->session->pending();
    const Json suggested = pend ? Json(pend->parcel) : Json(nullptr);
    e->session->observe(parcel, label, override_plan);
    journal(id, {{"type", "observation"},
                 {"parcel_id", parcel},
                 {"label", label},
                 {"override", override_plan},
                 {"suggested", suggested}},
            false);
    return e->session->snapshot();
  }

  Json state(const std::string& id) {
    auto e = find(id);
    std::lock_guard g(e->mu);
    return e->session->snapshot();
  }

  // Rebuilds a session from journal lines.
  std::unique_ptr<Session> replay(const std::vector<Json>& records) const {
    if (records.empty() || records[0].value("type", "") != "create") throw ConfigError("journal must start with create");
    const auto& c = records[0];
    SessionConfig cfg{c.at("task_id").get<std::string>(), c.at("method").get<std::string>(),
                      c.at("budget").get<double>(), parse_budget_mode(c.at("mode").get<std::string>()),
                      c.at("seed").get<std::uint64_t>()};
    auto s = build(c.at("id").get<std::string>(), cfg);
    for (std::size_t k = 1; k < records.size(); ++k) {
      const auto& r = records[k];
      if (r.value("type", "") != "observation") throw ConfigError("journal line " + std::to_string(k + 1) + ": bad type");
      // Re-issue the suggestion the operator saw so stochastic searchers consume the same rng draws.
      if (!r.at("suggested").is_null()) {
        const auto sug = s->suggest();
        if (sug.parcel != r["suggested"].get<ParcelId>())
          throw InvariantViolation("journal replay diverged at line " + std::to_string(k + 1));
      }
      s->observe(r.at("parcel_id").get<ParcelId>(), r.at("label").get<int>(), r.at("override").get<bool>());
    }
    return s;
  }

  static std::vector<Json> read_journal(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open journal " + path.string());
    std::vector<Json> out;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) out.push_back(Json::parse(line));
    return out;
  }

  std::optional<std::filesystem::path> journal_path(const std::string& id) const {
    if (!journal_dir_) return std::nullopt;
    return *journal_dir_ / (id + ".jsonl");
  }

  // Loads every journal in the journal directory; returns the recovered ids.
  std::vector<std::string> recover() {
    std::vector<std::string> ids;
    if (!journal_dir_) return ids;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(*journal_dir_))
      if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto s = replay(read_journal(f));
      const std::string id = s->id();
      std::unique_lock lk(map_mu_);
      sessions_[id] = std::make_shared<Entry>(std::move(s));
      ids.push_back(id);
    }
    return ids;
  }

 private:
  struct Entry {
    explicit Entry(std::unique_ptr<Session> s) : session(std::move(s)) {}
    std::mutex mu;
    std::unique_ptr<Session> session;
  };

  std::unique_ptr<Session> build(std::string id, const SessionConfig& cfg) const {
    auto it = tasks_.find(cfg.task_id);
    if (it == tasks_.end()) throw NotFound("unknown task '" + cfg.task_id + "'");
    if (std::find(method_names().begin(), method_names().end(), cfg.method) == method_names().end())
      throw InvalidArgument("unknown method '" + cfg.method + "'");
    if (cfg.budget < 0.0 || !std::isfinite(cfg.budget)) throw InvalidArgument("budget must be a positive number");
    auto searcher = make_searcher(cfg.method, models_);
    SearchTask task = it->second;
    if (cfg.method == "hags") task = fit_regions(task, models_.hags->region_slots());
    if (cfg.method == "ags" && task.size() > models_.ags->slots())
      throw InvalidArgument("task has more parcels than the ags policy's slots");
    return std::make_unique<Session>(std::move(id), cfg, std::move(task), std::move(searcher));
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lk(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  std::string new_id() {
    std::lock_guard g(id_mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(ids_()));
    return buf;
  }

  void journal(const std::string& id, const Json& record, bool fresh) const {
    const auto path = journal_path(id);
    if (!path) return;
    std::ofstream out(*path, fresh ? std::ios::trunc : std::ios::app);
    if (!out) throw std::runtime_error("cannot write journal " + path->string());
    out << record.dump() << "\n";
    out.flush();
  }

  std::map<std::string, SearchTask> tasks_;
  MethodModels models_;
  std::optional<std::filesystem::path> journal_dir_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex id_mu_;
  std::mt19937_64 ids_;
};

}  // namespace ags
