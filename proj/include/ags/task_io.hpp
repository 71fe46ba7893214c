#pragma once

// JSON task files and task-set directories.
//
//   {"schema_version": 1,
//    "cost_model": {"kind": "uniform"|"manhattan", "depot": [x, y]},
//    "budget": C,
//    "unit_feature": u,
//    "partition": "grid"|"single",
//    "positive_rate": r,
//    "parcels": [{"id": i, "loc": [x, y], "features": [...], "label": 0|1}, ...],
//    "regions": [[ids...], ...]}
//
// unit_feature, partition and positive_rate are optional on input; a present
// positive_rate must match the labels.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ags/core.hpp"
#include "ags/errors.hpp"

namespace ags {

using Json = nlohmann::json;

inline constexpr int kTaskSchemaVersion = 1;

class TaskFormatError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline Json task_to_json(const SearchTask& task, const std::string& partition = "") {
  Json j;
  j["schema_version"] = kTaskSchemaVersion;
  const auto& cm = task.cost_model();
  j["cost_model"] = {{"kind", to_string(cm.kind)}, {"depot", {cm.depot.x, cm.depot.y}}};
  j["budget"] = task.budget();
  j["unit_feature"] = task.unit_feature();
  j["partition"] = partition.empty() ? (task.regions().size() == 1 ? "single" : "grid") : partition;
  j["positive_rate"] = task.positive_rate();
  Json ps = Json::array();
  for (const auto& p : task.parcels())
    ps.push_back({{"id", p.id}, {"loc", {p.location.x, p.location.y}}, {"features", p.features}, {"label", p.label}});
  j["parcels"] = std::move(ps);
  Json rs = Json::array();
  for (const auto& r : task.regions()) rs.push_back(r.members);
  j["regions"] = std::move(rs);
  return j;
}

namespace detail {

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw TaskFormatError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw TaskFormatError(where + "." + key + ": missing");
  return *it;
}

inline double number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw TaskFormatError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw TaskFormatError(where + ": not finite");
  return x;
}

inline std::size_t index(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw TaskFormatError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline Point point(const Json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw TaskFormatError(where + ": expected [x, y]");
  return {number(v[0], where + "[0]"), number(v[1], where + "[1]")};
}

}  // namespace detail

inline SearchTask task_from_json(const Json& j) {
  using namespace detail;
  const std::string root = "task";
  const auto& ver = field(j, "schema_version", root);
  if (!ver.is_number_integer() || ver.get<int>() != kTaskSchemaVersion)
    throw TaskFormatError("task.schema_version: unsupported (expected " + std::to_string(kTaskSchemaVersion) + ")");
  const auto& cmj = field(j, "cost_model", root);
  const auto& kind = field(cmj, "kind", "task.cost_model");
  if (!kind.is_string()) throw TaskFormatError("task.cost_model.kind: expected a string");
  CostModel cm;
  try {
    cm.kind = parse_cost_kind(kind.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw TaskFormatError(std::string("task.cost_model.kind: ") + e.what());
  }
  const double budget = number(field(j, "budget", root), "task.budget");
  std::size_t unit = 0;
  if (j.contains("unit_feature")) unit = index(j["unit_feature"], "task.unit_feature");
  if (j.contains("partition") && !j["partition"].is_string()) throw TaskFormatError("task.partition: expected a string");

  const auto& pj = field(j, "parcels", root);
  if (!pj.is_array() || pj.empty()) throw TaskFormatError("task.parcels: expected a non-empty array");
  std::vector<Parcel> parcels;
  parcels.reserve(pj.size());
  for (std::size_t i = 0; i < pj.size(); ++i) {
    const std::string at = "task.parcels[" + std::to_string(i) + "]";
    Parcel p;
    p.id = index(field(pj[i], "id", at), at + ".id");
    if (p.id != i) throw TaskFormatError(at + ".id: expected " + std::to_string(i) + " (ids must be 0..n-1 in order)");
    p.location = point(field(pj[i], "loc", at), at + ".loc");
    const auto& fj = field(pj[i], "features", at);
    if (!fj.is_array()) throw TaskFormatError(at + ".features: expected an array");
    for (std::size_t f = 0; f < fj.size(); ++f) p.features.push_back(number(fj[f], at + ".features[" + std::to_string(f) + "]"));
    const auto& lj = field(pj[i], "label", at);
    if (!lj.is_number_integer() || (lj.get<int>() != 0 && lj.get<int>() != 1))
      throw TaskFormatError(at + ".label: expected 0 or 1");
    p.label = lj.get<int>();
    parcels.push_back(std::move(p));
  }
  // Depot defaults to the parcel centroid when omitted.
  cm.depot = cmj.contains("depot") ? point(cmj["depot"], "task.cost_model.depot") : centroid(parcels);

  std::vector<Region> regions;
  if (j.contains("regions")) {
    const auto& rj = j["regions"];
    if (!rj.is_array()) throw TaskFormatError("task.regions: expected an array of id arrays");
    for (std::size_t r = 0; r < rj.size(); ++r) {
      const std::string at = "task.regions[" + std::to_string(r) + "]";
      if (!rj[r].is_array()) throw TaskFormatError(at + ": expected an array of parcel ids");
      Region reg;
      reg.id = r;
      for (std::size_t k = 0; k < rj[r].size(); ++k)
        reg.members.push_back(index(rj[r][k], at + "[" + std::to_string(k) + "]"));
      regions.push_back(std::move(reg));
    }
  }
  std::optional<SearchTask> task;
  try {
    task.emplace(std::move(parcels), std::move(regions), cm, budget, unit);
  } catch (const InvalidArgument& e) {
    throw TaskFormatError(std::string("task: ") + e.what());
  }
  if (j.contains("positive_rate")) {
    const double r = number(j["positive_rate"], "task.positive_rate");
    if (r != task->positive_rate())
      throw TaskFormatError("task.positive_rate: " + std::to_string(r) + " does not match labels (" +
                            std::to_string(task->positive_rate()) + ")");
  }
  return std::move(*task);
}

inline SearchTask parse_task(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw TaskFormatError(std::string("task: malformed JSON: ") + e.what());
  }
  return task_from_json(j);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline SearchTask load_task(const std::filesystem::path& path) {
  try {
    return parse_task(read_file(path));
  } catch (const TaskFormatError& e) {
    throw TaskFormatError(path.filename().string() + ": " + e.what());
  }
}

inline void save_task(const std::filesystem::path& path, const SearchTask& task, const std::string& partition = "") {
  write_file(path, task_to_json(task, partition).dump() + "\n");
}

inline std::string task_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task_%05zu.json", i);
  return buf;
}

// Writes task_00000.json ... plus manifest.json listing them in order.
inline void save_task_set(const std::filesystem::path& dir, const std::vector<SearchTask>& tasks, Json provenance = {}) {
  std::filesystem::create_directories(dir);
  Json files = Json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    save_task(dir / task_file_name(i), tasks[i]);
    files.push_back(task_file_name(i));
  }
  Json manifest = {{"schema_version", kTaskSchemaVersion}, {"count", tasks.size()}, {"files", files}};
  if (!provenance.is_null()) manifest["generator"] = std::move(provenance);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

// Loads in manifest order, or sorted *.json when there is no manifest.
inline std::vector<SearchTask> load_task_set(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("task directory not found: " + dir.string());
  std::vector<std::string> names;
  const auto manifest = dir / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    const Json m = Json::parse(read_file(manifest));
    for (const auto& f : m.at("files")) names.push_back(f.get<std::string>());
  } else {
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".json") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
  }
  std::vector<SearchTask> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(load_task(dir / n));
  if (out.empty()) throw NotFound("no task files in " + dir.string());
  return out;
}

}  // namespace ags
