#pragma once

// Full-scale experiment configurations and desk-scale variants.

#include <string>

#include "mfq/config.hpp"

namespace mfq {

inline ExperimentConfig preset_mv() {
  ExperimentConfig c;
  c.model = oracle::ModelId::MV;
  c.T = 1.0;
  c.K = 500;
  c.episodes = 20000;
  c.policies = 20;
  c.alpha_theta = Schedule({{1, {0.003, 0.02}, {0.41, 0.31}}, {15000, {0.001, 0.02 / 3.0}, {0.41, 0.31}}});
  c.alpha_psi = Schedule({{1, {0.005, 0.01, 0.01, 0.01}, {0.31, 0.31, 0.31, 0.31}},
                          {15000, {0.0025, 0.005, 0.005, 0.005}, {0.31, 0.31, 0.31, 0.31}}});
  c.test_rule.lower = Schedule::constant(4, 0.0);
  c.test_rule.upper = Schedule::power(4, 2.0, 0.05);
  c.theta0 = {0.5, 0.5};
  c.psi0 = {1.0, 1.0, 1.0, -0.5};
  c.seed = 7;
  c.eval.agents = 10000;
  c.eval.cadence = 200;
  c.out = "out/mv";
  return c;
}

inline ExperimentConfig preset_mv_smoke() {
  ExperimentConfig c = preset_mv();
  c.K = 100;
  c.episodes = 4000;
  c.policies = 10;
  c.eval.agents = 2000;
  c.out = "out/mv_smoke";
  return c;
}

inline ExperimentConfig preset_jump_mfg() {
  ExperimentConfig c;
  c.model = oracle::ModelId::JumpMFG;
  c.T = 1.0;
  c.K = 20;
  c.episodes = 7000;
  c.policies = 20;
  c.alpha_theta = Schedule({{1, {0.005, 0.013, 0.019, 0.013, 0.008, 0.015}, std::vector<double>(6, 0.31)},
                            {3500, {0.005, 0.013, 0.019, 0.013, 0.008, 0.015}, std::vector<double>(6, 0.61)}});
  c.alpha_psi = Schedule({{1, {0.013, 0.013, 0.015}, {0.31, 0.61, 0.31}}});
  c.test_rule.lower = Schedule::constant(3, 0.0);
  c.test_rule.upper = Schedule::power(3, 1.0, 0.5);
  c.theta0 = {0.0, 2.0, 2.0, 1.0, 2.0, 1.0};
  c.psi0 = {-1.0, 2.0, 2.0};
  c.seed = 7;
  c.eval.agents = 10000;
  c.eval.cadence = 200;
  c.out = "out/jump_mfg";
  return c;
}

inline ExperimentConfig preset_jump_mfc() {
  ExperimentConfig c = preset_jump_mfg();
  c.model = oracle::ModelId::JumpMFC;
  const std::vector<double> at = {0.008, 0.009, 0.013, 0.04, 0.035, 0.0035, 0.035};
  c.alpha_theta = Schedule({{1, at, {0.31, 0.11, 0.11, 0.0, 0.11, 0.31, 0.21}}, {4000, at, std::vector<double>(7, 0.51)}});
  const std::vector<double> ap = {0.008, 0.005, 0.008};
  c.alpha_psi = Schedule({{1, ap, {0.0, 0.0, 0.0}}, {4000, ap, {0.51, 0.51, 0.51}}});
  c.theta0 = {0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 1.0};
  c.psi0 = {-1.0, 2.0, 2.0};
  c.out = "out/jump_mfc";
  return c;
}

/// Short jump runs for tests and determinism checks.
inline ExperimentConfig preset_jump_smoke(oracle::ModelId id) {
  ExperimentConfig c = id == oracle::ModelId::JumpMFC ? preset_jump_mfc() : preset_jump_mfg();
  c.episodes = 200;
  c.policies = 4;
  c.jump_env.ensemble_size = 200;
  c.eval.agents = 1000;
  c.eval.cadence = 50;
  c.out = id == oracle::ModelId::JumpMFC ? "out/jump_mfc_smoke" : "out/jump_mfg_smoke";
  return c;
}

inline ExperimentConfig preset(const std::string& name) {
  if (name == "mv") return preset_mv();
  if (name == "mv-smoke") return preset_mv_smoke();
  if (name == "jump-mfg") return preset_jump_mfg();
  if (name == "jump-mfc") return preset_jump_mfc();
  if (name == "jump-mfg-smoke") return preset_jump_smoke(oracle::ModelId::JumpMFG);
  if (name == "jump-mfc-smoke") return preset_jump_smoke(oracle::ModelId::JumpMFC);
  throw ArgumentError("unknown preset '" + name + "' (mv, mv-smoke, jump-mfg, jump-mfc, jump-mfg-smoke, jump-mfc-smoke)");
}

}  // namespace mfq
