#pragma once

// Experiment configuration: one JSON document with nested sections.
// Schedules are data: a list of {from, coef, exponent} segments.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfq/errors.hpp"
#include "mfq/jump_models.hpp"
#include "mfq/mean_flow.hpp"
#include "mfq/mv_model.hpp"
#include "mfq/oracles.hpp"
#include "mfq/params.hpp"
#include "mfq/trainer.hpp"

namespace mfq {

using json = nlohmann::json;

struct EvalOptions {
  int agents = 10000;
  int cadence = 200;  // 0 disables value_error.csv
  std::uint64_t seed = 1;
  bool literal = false;
  bool operator==(const EvalOptions&) const = default;
};

struct ExperimentConfig {
  oracle::ModelId model = oracle::ModelId::MV;
  mv::MVEnvParams mv_env;
  jump::JumpEnvParams jump_env;
  double T = 1.0;
  int K = 100;
  int episodes = 0;
  int policies = 1;
  Schedule alpha_theta;
  Schedule alpha_psi;
  TestPolicyRule test_rule;
  MeanFlowRule mean_rule;
  std::vector<double> theta0;
  std::vector<double> psi0;
  std::uint64_t seed = 0;
  int threads = 1;
  EvalOptions eval;
  std::string out = "out";

  TimeGrid grid() const { return TimeGrid(T, K); }
  bool operator==(const ExperimentConfig&) const = default;

  std::size_t theta_dim() const {
    switch (model) {
      case oracle::ModelId::MV: return 2;
      case oracle::ModelId::JumpMFG: return 6;
      case oracle::ModelId::JumpMFC: return 7;
    }
    return 0;
  }
  std::size_t psi_dim() const { return model == oracle::ModelId::MV ? 4 : 3; }

  void validate() const {
    if (!(T > 0.0)) throw ArgumentError("config: grid.T must be > 0");
    if (K < 1) throw ArgumentError("config: grid.K must be >= 1");
    if (episodes < 0) throw ArgumentError("config: episodes must be >= 0");
    if (policies < 1) throw ArgumentError("config: policies must be >= 1");
    if (threads < 1) throw ArgumentError("config: threads must be >= 1");
    if (theta0.size() != theta_dim())
      throw ArgumentError("config: theta0 needs " + std::to_string(theta_dim()) + " entries");
    if (psi0.size() != psi_dim()) throw ArgumentError("config: psi0 needs " + std::to_string(psi_dim()) + " entries");
    if (alpha_theta.dim() != theta_dim()) throw ArgumentError("config: alpha_theta width does not match theta");
    if (alpha_psi.dim() != psi_dim()) throw ArgumentError("config: alpha_psi width does not match psi");
    if (test_rule.lower.dim() != psi_dim() || test_rule.upper.dim() != psi_dim())
      throw ArgumentError("config: test_policy bounds must have one entry per psi component");
    if (mean_rule.rho.dim() != 1) throw ArgumentError("config: mean_flow.rho must have width 1");
    if (mean_rule.epoch_length < 1) throw ArgumentError("config: mean_flow.epoch_length must be >= 1");
    if (eval.agents < 1) throw ArgumentError("config: evaluation.agents must be >= 1");
    if (eval.cadence < 0) throw ArgumentError("config: evaluation.cadence must be >= 0");
    if (model == oracle::ModelId::MV)
      mv_params().validate();
    else
      jump_params().validate();
    if (model == oracle::ModelId::MV && psi0[3] == 0.0) throw ArgumentError("config: MV psi4 must be nonzero");
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.grid = grid();
    c.episodes = episodes;
    c.policies = policies;
    c.alpha_theta = alpha_theta;
    c.alpha_psi = alpha_psi;
    c.test_rule = test_rule;
    c.mean_rule = mean_rule;
    c.theta0 = theta0;
    c.psi0 = psi0;
    c.seed = seed;
    c.threads = threads;
    c.ensemble_size = model == oracle::ModelId::MV ? 0 : jump_env.ensemble_size;
    return c;
  }

  mv::MVEnvParams mv_params() const {
    auto e = mv_env;
    e.T = T;
    return e;
  }
  jump::JumpEnvParams jump_params() const {
    auto e = jump_env;
    e.T = T;
    return e;
  }
};

namespace detail {

inline void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ArgumentError("config: unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ArgumentError("config: bad value for " + where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ArgumentError("config: missing " + where + "." + key);
  return get_or<T>(j, key, T{}, where);
}

inline json schedule_to_json(const Schedule& s) {
  json out = json::array();
  for (const auto& seg : s.segments()) out.push_back({{"from", seg.from}, {"coef", seg.coef}, {"exponent", seg.exponent}});
  return out;
}

inline Schedule schedule_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ArgumentError("config: " + where + " must be a non-empty list of segments");
  std::vector<Schedule::Segment> segs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    require_keys(j[i], w, {"from", "coef", "exponent"});
    Schedule::Segment s;
    s.from = get_req<int>(j[i], "from", w);
    s.coef = get_req<std::vector<double>>(j[i], "coef", w);
    s.exponent = get_or<std::vector<double>>(j[i], "exponent", std::vector<double>(s.coef.size(), 0.0), w);
    segs.push_back(std::move(s));
  }
  try {
    return Schedule(std::move(segs));
  } catch (const ArgumentError& e) {
    throw ArgumentError("config: " + where + ": " + e.what());
  }
}

inline json mv_env_to_json(const mv::MVEnvParams& e) {
  return {{"b", e.b},         {"sigma", e.sigma}, {"jump", e.jump}, {"eta", e.eta},
          {"lambda", e.lambda}, {"gamma", e.gamma}, {"beta", e.beta}, {"x0", e.x0}, {"x0_sd", e.x0_sd}};
}

inline mv::MVEnvParams mv_env_from_json(const json& j) {
  require_keys(j, "env", {"b", "sigma", "jump", "eta", "lambda", "gamma", "beta", "x0", "x0_sd"});
  mv::MVEnvParams e;
  e.b = get_or(j, "b", e.b, "env");
  e.sigma = get_or(j, "sigma", e.sigma, "env");
  e.jump = get_or(j, "jump", e.jump, "env");
  e.eta = get_or(j, "eta", e.eta, "env");
  e.lambda = get_or(j, "lambda", e.lambda, "env");
  e.gamma = get_or(j, "gamma", e.gamma, "env");
  e.beta = get_or(j, "beta", e.beta, "env");
  e.x0 = get_or(j, "x0", e.x0, "env");
  e.x0_sd = get_or(j, "x0_sd", e.x0_sd, "env");
  return e;
}

inline json jump_env_to_json(const jump::JumpEnvParams& e) {
  return {{"eta", e.eta}, {"sigma", e.sigma},         {"r0", e.r0},
          {"gamma", e.gamma}, {"x0", e.x0}, {"x0_log_sd", e.x0_log_sd}, {"ensemble_size", e.ensemble_size}};
}

inline jump::JumpEnvParams jump_env_from_json(const json& j) {
  require_keys(j, "env", {"eta", "sigma", "r0", "gamma", "x0", "x0_log_sd", "ensemble_size"});
  jump::JumpEnvParams e;
  e.eta = get_or(j, "eta", e.eta, "env");
  e.sigma = get_or(j, "sigma", e.sigma, "env");
  e.r0 = get_or(j, "r0", e.r0, "env");
  e.gamma = get_or(j, "gamma", e.gamma, "env");
  e.x0 = get_or(j, "x0", e.x0, "env");
  e.x0_log_sd = get_or(j, "x0_log_sd", e.x0_log_sd, "env");
  e.ensemble_size = get_or(j, "ensemble_size", e.ensemble_size, "env");
  return e;
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = oracle::to_string(c.model);
  j["env"] = c.model == oracle::ModelId::MV ? detail::mv_env_to_json(c.mv_env) : detail::jump_env_to_json(c.jump_env);
  j["grid"] = {{"T", c.T}, {"K", c.K}};
  j["episodes"] = c.episodes;
  j["policies"] = c.policies;
  j["alpha_theta"] = detail::schedule_to_json(c.alpha_theta);
  j["alpha_psi"] = detail::schedule_to_json(c.alpha_psi);
  j["test_policy"] = {{"lower", detail::schedule_to_json(c.test_rule.lower)},
                      {"upper", detail::schedule_to_json(c.test_rule.upper)},
                      {"mode", to_string(c.test_rule.mode)}};
  j["mean_flow"] = {{"rule", to_string(c.mean_rule.kind)},
                    {"rho", detail::schedule_to_json(c.mean_rule.rho)},
                    {"epoch_length", c.mean_rule.epoch_length}};
  j["theta0"] = c.theta0;
  j["psi0"] = c.psi0;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["evaluation"] = {{"agents", c.eval.agents}, {"cadence", c.eval.cadence}, {"seed", c.eval.seed},
                     {"literal", c.eval.literal}};
  j["out"] = c.out;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  using detail::get_or;
  using detail::get_req;
  detail::require_keys(j, "config",
                       {"model", "env", "grid", "episodes", "policies", "alpha_theta", "alpha_psi", "test_policy",
                        "mean_flow", "theta0", "psi0", "seed", "threads", "evaluation", "out"});
  ExperimentConfig c;
  c.model = oracle::model_id_from_string(get_req<std::string>(j, "model", "config"));
  const json env = j.contains("env") ? j.at("env") : json::object();
  if (c.model == oracle::ModelId::MV)
    c.mv_env = detail::mv_env_from_json(env);
  else
    c.jump_env = detail::jump_env_from_json(env);
  if (!j.contains("grid")) throw ArgumentError("config: missing grid");
  detail::require_keys(j.at("grid"), "grid", {"T", "K"});
  c.T = get_req<double>(j.at("grid"), "T", "grid");
  c.K = get_req<int>(j.at("grid"), "K", "grid");
  c.episodes = get_req<int>(j, "episodes", "config");
  c.policies = get_req<int>(j, "policies", "config");
  if (!j.contains("alpha_theta") || !j.contains("alpha_psi")) throw ArgumentError("config: missing learning rates");
  c.alpha_theta = detail::schedule_from_json(j.at("alpha_theta"), "alpha_theta");
  c.alpha_psi = detail::schedule_from_json(j.at("alpha_psi"), "alpha_psi");
  if (!j.contains("test_policy")) throw ArgumentError("config: missing test_policy");
  const json& tp = j.at("test_policy");
  detail::require_keys(tp, "test_policy", {"lower", "upper", "mode"});
  if (!tp.contains("lower") || !tp.contains("upper")) throw ArgumentError("config: test_policy needs lower and upper");
  c.test_rule.lower = detail::schedule_from_json(tp.at("lower"), "test_policy.lower");
  c.test_rule.upper = detail::schedule_from_json(tp.at("upper"), "test_policy.upper");
  c.test_rule.mode = test_policy_mode_from_string(get_or<std::string>(tp, "mode", "literal", "test_policy"));
  if (j.contains("mean_flow")) {
    const json& mf = j.at("mean_flow");
    detail::require_keys(mf, "mean_flow", {"rule", "rho", "epoch_length"});
    c.mean_rule.kind = mean_flow_kind_from_string(get_or<std::string>(mf, "rule", "per-episode", "mean_flow"));
    if (mf.contains("rho")) c.mean_rule.rho = detail::schedule_from_json(mf.at("rho"), "mean_flow.rho");
    c.mean_rule.epoch_length = get_or(mf, "epoch_length", 1, "mean_flow");
  }
  c.theta0 = get_req<std::vector<double>>(j, "theta0", "config");
  c.psi0 = get_req<std::vector<double>>(j, "psi0", "config");
  c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
  c.threads = get_or(j, "threads", 1, "config");
  if (j.contains("evaluation")) {
    const json& ev = j.at("evaluation");
    detail::require_keys(ev, "evaluation", {"agents", "cadence", "seed", "literal"});
    c.eval.agents = get_or(ev, "agents", c.eval.agents, "evaluation");
    c.eval.cadence = get_or(ev, "cadence", c.eval.cadence, "evaluation");
    c.eval.seed = get_or(ev, "seed", c.eval.seed, "evaluation");
    c.eval.literal = get_or(ev, "literal", c.eval.literal, "evaluation");
  }
  c.out = get_or<std::string>(j, "out", c.out, "config");
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config: JSON parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mfq
