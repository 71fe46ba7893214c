#pragma once

// Versioned JSON checkpoints. Doubles are written in shortest round-trip form,
// so save/load reproduces parameters and optimizer moments bit for bit.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "ags/baselines.hpp"
#include "ags/diffnet.hpp"
#include "ags/flat_policy.hpp"
#include "ags/hier_policy.hpp"
#include "ags/predictor.hpp"
#include "ags/task_io.hpp"

namespace ags {

inline constexpr const char* kCheckpointFormat = "ags-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace ckpt {

inline Json vec(const diffnet::Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline diffnet::Vector vec(const Json& a, std::size_t expected, const std::string& what) {
  if (!a.is_array() || a.size() != expected)
    throw ConfigError("checkpoint " + what + ": expected " + std::to_string(expected) + " values");
  diffnet::Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

inline Json net(const diffnet::NetworkSpec& s) {
  Json layers = Json::array();
  for (const auto& l : s.layers) layers.push_back({{"width", l.width}, {"activation", diffnet::to_string(l.activation)}});
  return {{"input", s.input}, {"layers", layers}};
}

inline diffnet::NetworkSpec net(const Json& j) {
  diffnet::NetworkSpec s;
  s.input = j.at("input").get<std::size_t>();
  for (const auto& l : j.at("layers"))
    s.layers.push_back({l.at("width").get<std::size_t>(), diffnet::parse_activation(l.at("activation").get<std::string>())});
  return s;
}

inline Json predictor(const PredictorSpec& p) {
  return {{"feature_width", p.feature_width}, {"embed_width", p.embed_width}, {"hidden", p.hidden}};
}

inline PredictorSpec predictor(const Json& j) {
  return {j.at("feature_width").get<std::size_t>(), j.at("embed_width").get<std::size_t>(),
          j.at("hidden").get<std::size_t>()};
}

inline Json module(const SearchModule& m) { return {{"net", net(m.net)}, {"skip", m.skip}}; }
inline SearchModule module(const Json& j) { return {net(j.at("net")), j.at("skip").get<bool>()}; }

inline Json adam(const diffnet::AdamState& s) {
  return {{"m", vec(s.m)},
          {"v", vec(s.v)},
          {"step", s.step},
          {"episodes", s.episodes},
          {"schedule", {{"base_lr", s.schedule.base_lr}, {"interval", s.schedule.interval}, {"factor", s.schedule.factor}}},
          {"beta1", s.beta1},
          {"beta2", s.beta2},
          {"eps", s.eps}};
}

inline diffnet::AdamState adam(const Json& j, std::size_t dim) {
  diffnet::AdamState s;
  s.m = vec(j.at("m"), dim, "adam.m");
  s.v = vec(j.at("v"), dim, "adam.v");
  s.step = j.at("step").get<std::size_t>();
  s.episodes = j.at("episodes").get<std::size_t>();
  const auto& sc = j.at("schedule");
  s.schedule = {sc.at("base_lr").get<double>(), sc.at("interval").get<std::size_t>(), sc.at("factor").get<double>()};
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  return s;
}

}  // namespace ckpt

struct Checkpoint {
  std::string kind;  // "ags", "hags" or "greedy"
  std::optional<AgsModel> ags;
  std::optional<HagsModel> hags;
  std::optional<GreedyClassifier> greedy;
  std::optional<diffnet::AdamState> policy_opt;
  std::optional<diffnet::AdamState> predictor_opt;
  // Region geometry a hierarchical model was trained for.
  std::size_t regions = 0;
  std::size_t region_size = 0;
  Json meta = Json::object();
};

inline Checkpoint make_checkpoint(const AgsModel& m) {
  Checkpoint c;
  c.kind = "ags";
  c.ags = m;
  return c;
}

inline Checkpoint make_checkpoint(const HagsModel& m, std::size_t regions) {
  Checkpoint c;
  c.kind = "hags";
  c.hags = m;
  c.regions = regions;
  c.region_size = m.region_slots();
  return c;
}

inline Checkpoint make_checkpoint(const GreedyClassifier& g) {
  Checkpoint c;
  c.kind = "greedy";
  c.greedy = g;
  return c;
}

inline Json checkpoint_to_json(const Checkpoint& c) {
  Json j = {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", c.kind}, {"meta", c.meta}};
  if (c.kind == "ags") {
    if (!c.ags) throw InvalidArgument("ags checkpoint without a model");
    j["predictor"] = ckpt::predictor(c.ags->predictor.spec());
    j["phi"] = ckpt::vec(c.ags->phi);
    j["policy"] = ckpt::module(c.ags->policy);
    j["zeta"] = ckpt::vec(c.ags->zeta);
  } else if (c.kind == "hags") {
    if (!c.hags) throw InvalidArgument("hags checkpoint without a model");
    j["predictor"] = ckpt::predictor(c.hags->predictor.spec());
    j["phi"] = ckpt::vec(c.hags->phi);
    j["level2"] = ckpt::module(c.hags->level2);
    j["theta"] = ckpt::vec(c.hags->theta);
    j["temperature"] = c.hags->temperature;
    j["include_queried"] = c.hags->include_queried;
    j["regions"] = c.regions;
    j["region_size"] = c.region_size;
  } else if (c.kind == "greedy") {
    if (!c.greedy) throw InvalidArgument("greedy checkpoint without a classifier");
    j["classifier"] = ckpt::net(c.greedy->net);
    j["params"] = ckpt::vec(c.greedy->params);
  } else {
    throw InvalidArgument("unknown checkpoint kind '" + c.kind + "'");
  }
  if (c.policy_opt) j["policy_optimizer"] = ckpt::adam(*c.policy_opt);
  if (c.predictor_opt) j["predictor_optimizer"] = ckpt::adam(*c.predictor_opt);
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ConfigError("not an ags checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    if (j.contains("meta")) c.meta = j["meta"];
    std::size_t policy_dim = 0, predictor_dim = 0;
    if (c.kind == "ags") {
      AgsModel m;
      m.predictor = Predictor(ckpt::predictor(j.at("predictor")));
      m.phi = ckpt::vec(j.at("phi"), m.predictor.parameter_count(), "phi");
      m.policy = ckpt::module(j.at("policy"));
      m.zeta = ckpt::vec(j.at("zeta"), m.policy.parameter_count(), "zeta");
      policy_dim = m.policy.parameter_count();
      predictor_dim = m.predictor.parameter_count();
      c.ags = std::move(m);
    } else if (c.kind == "hags") {
      HagsModel m;
      m.predictor = Predictor(ckpt::predictor(j.at("predictor")));
      m.phi = ckpt::vec(j.at("phi"), m.predictor.parameter_count(), "phi");
      m.level2 = ckpt::module(j.at("level2"));
      m.theta = ckpt::vec(j.at("theta"), m.level2.parameter_count(), "theta");
      m.temperature = j.at("temperature").get<double>();
      m.include_queried = j.at("include_queried").get<bool>();
      c.regions = j.at("regions").get<std::size_t>();
      c.region_size = j.at("region_size").get<std::size_t>();
      policy_dim = m.level2.parameter_count();
      predictor_dim = m.predictor.parameter_count();
      c.hags = std::move(m);
    } else if (c.kind == "greedy") {
      GreedyClassifier g;
      g.net = ckpt::net(j.at("classifier"));
      g.params = ckpt::vec(j.at("params"), g.net.parameter_count(), "params");
      c.greedy = std::move(g);
    } else {
      throw ConfigError("unknown checkpoint kind '" + c.kind + "'");
    }
    if (j.contains("policy_optimizer")) c.policy_opt = ckpt::adam(j["policy_optimizer"], policy_dim);
    if (j.contains("predictor_optimizer")) c.predictor_opt = ckpt::adam(j["predictor_optimizer"], predictor_dim);
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file(path, checkpoint_to_json(c).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

// Diagnostic dump of per-parcel predictions.
inline std::string p_csv(std::span<const double> p) {
  std::string out = "parcel_id,p\n";
  char buf[64];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, p[i]);
    out += buf;
  }
  return out;
}

}  // namespace ags
