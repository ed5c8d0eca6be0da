#pragma once

// Config-driven training runs and their artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mfq/config.hpp"
#include "mfq/evaluation.hpp"
#include "mfq/trainer.hpp"

namespace mfq {

/// Calls f with the concrete model selected by the config.
template <class F>
decltype(auto) with_model(const ExperimentConfig& c, F&& f) {
  switch (c.model) {
    case oracle::ModelId::MV: return f(mv::MVModel(c.mv_params()));
    case oracle::ModelId::JumpMFG: return f(jump::MFGModel(c.jump_params()));
    case oracle::ModelId::JumpMFC: return f(jump::MFCModel(c.jump_params()));
  }
  throw ArgumentError("unknown model id");
}

struct ValueErrorPoint {
  int episode = 0;
  double error = 0.0;
};

struct Experiment {
  ExperimentConfig config;
  TrainReport report;
  std::vector<std::string> theta_names, psi_names;
  std::vector<double> true_theta, true_psi;
  std::vector<ValueErrorPoint> value_error;
};

template <ModelFamily M>
Experiment run_experiment(const M& model, const ExperimentConfig& cfg) {
  Experiment ex;
  ex.config = cfg;
  ex.theta_names = model.theta_names();
  ex.psi_names = model.psi_names();
  ex.true_theta = model.true_theta();
  ex.true_psi = model.true_psi();
  const TimeGrid grid = cfg.grid();
  auto evaluate = [&](int j, const std::vector<double>& th, const std::vector<double>& ps) {
    const double e = evaluate_value_error(model, th, ps, ex.true_theta, ex.true_psi, cfg.eval.agents, grid,
                                          cfg.eval.seed, cfg.eval.literal);
    ex.value_error.push_back({j, e});
  };
  if (cfg.eval.cadence > 0) evaluate(0, cfg.theta0, cfg.psi0);
  EpisodeObserver obs;
  if (cfg.eval.cadence > 0) {
    obs = [&](int j, const std::vector<double>& th, const std::vector<double>& ps) {
      if (j % cfg.eval.cadence == 0 || j == cfg.episodes) evaluate(j, th, ps);
    };
  }
  ex.report = train(model, cfg.train_config(), obs);
  return ex;
}

inline Experiment run_experiment(const ExperimentConfig& cfg) {
  return with_model(cfg, [&](const auto& m) { return run_experiment(m, cfg); });
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Header plus one row per episode j = 0..N.
inline void write_params_csv(const std::filesystem::path& path, const Experiment& ex) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "j";
  for (const auto& n : ex.theta_names) out << ',' << n;
  for (const auto& n : ex.psi_names) out << ',' << n;
  out << '\n';
  auto row = [&](int j, const std::vector<double>& th, const std::vector<double>& ps) {
    out << j;
    for (double v : th) out << ',' << format_double(v);
    for (double v : ps) out << ',' << format_double(v);
    out << '\n';
  };
  row(0, ex.report.theta0, ex.report.psi0);
  for (std::size_t j = 0; j < ex.report.theta.size(); ++j)
    row(static_cast<int>(j) + 1, ex.report.theta[j], ex.report.psi[j]);
}

inline void write_value_error_csv(const std::filesystem::path& path, const Experiment& ex) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << "j,value_error\n";
  for (const auto& p : ex.value_error) out << p.episode << ',' << format_double(p.error) << '\n';
}

inline json report_json(const Experiment& ex) {
  json j;
  j["model"] = oracle::to_string(ex.config.model);
  j["seed"] = ex.report.seed;
  j["episodes"] = ex.config.episodes;
  auto named = [](const std::vector<std::string>& names, const std::vector<double>& v) {
    json o = json::object();
    for (std::size_t i = 0; i < v.size(); ++i) o[names[i]] = v[i];
    return o;
  };
  j["final_theta"] = named(ex.theta_names, ex.report.final_theta);
  j["final_psi"] = named(ex.psi_names, ex.report.final_psi);
  j["true_theta"] = named(ex.theta_names, ex.true_theta);
  j["true_psi"] = named(ex.psi_names, ex.true_psi);
  std::vector<double> dt, dp;
  for (std::size_t i = 0; i < ex.true_theta.size(); ++i) dt.push_back(std::abs(ex.report.final_theta[i] - ex.true_theta[i]));
  for (std::size_t i = 0; i < ex.true_psi.size(); ++i) dp.push_back(std::abs(ex.report.final_psi[i] - ex.true_psi[i]));
  j["abs_error_theta"] = named(ex.theta_names, dt);
  j["abs_error_psi"] = named(ex.psi_names, dp);
  json diag;
  if (!ex.report.stats.empty()) {
    const auto& s = ex.report.stats.back();
    diag["last_mean_abs_g"] = s.mean_abs_g;
    diag["last_theta_step"] = s.theta_step;
    diag["last_psi_step"] = s.psi_step;
  }
  if (!ex.value_error.empty()) {
    diag["value_error_initial"] = ex.value_error.front().error;
    diag["value_error_final"] = ex.value_error.back().error;
  }
  diag["wall_seconds"] = ex.report.wall_seconds;
  j["diagnostics"] = diag;
  j["config"] = to_json(ex.config);
  return j;
}

/// Writes params.csv, report.json and, with evaluation enabled, value_error.csv.
inline void write_experiment(const std::filesystem::path& dir, const Experiment& ex) {
  std::filesystem::create_directories(dir);
  write_params_csv(dir / "params.csv", ex);
  if (!ex.value_error.empty()) write_value_error_csv(dir / "value_error.csv", ex);
  std::ofstream(dir / "report.json") << report_json(ex).dump(2) << '\n';
}

/// Final parameters and config stored in a report.json.
struct LoadedReport {
  ExperimentConfig config;
  std::vector<double> theta, psi;
};

inline LoadedReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open report '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ArgumentError("report '" + path + "': " + e.what());
  }
  if (!j.contains("config") || !j.contains("final_theta") || !j.contains("final_psi"))
    throw ArgumentError("report '" + path + "' lacks config or final parameters");
  LoadedReport r;
  r.config = config_from_json(j.at("config"));
  // keys are stored in name order by the JSON writer; read them back by the model's names
  with_model(r.config, [&](const auto& m) {
    for (const auto& n : m.theta_names()) r.theta.push_back(j.at("final_theta").at(n).template get<double>());
    for (const auto& n : m.psi_names()) r.psi.push_back(j.at("final_psi").at(n).template get<double>());
    return 0;
  });
  return r;
}

}  // namespace mfq
