// mfq: train, verify, evaluate and inspect the mean-field q-learning models.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfq/diagnostics.hpp"
#include "mfq/experiment.hpp"
#include "mfq/presets.hpp"

namespace fs = std::filesystem;
using namespace mfq;
using oracle::ModelId;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<int> episodes;
  std::string model;
};

void add_common(CLI::App* app, Common& c, bool with_model) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--preset", c.preset, "built-in config: mv, mv-smoke, jump-mfg, jump-mfc, jump-mfg-smoke, jump-mfc-smoke");
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  if (with_model) app->add_option("--model", c.model, "model id: mv, jump-mfg, jump-mfc");
  app->add_option("--episodes", c.episodes, "overrides the number of episodes")->check(CLI::NonNegativeNumber);
}

/// Config from --config, --preset or the full preset of --model, with overrides applied.
ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty())
    cfg = load_config(c.config);
  else if (!c.preset.empty())
    cfg = preset(c.preset);
  else if (!c.model.empty())
    cfg = preset(c.model);
  else
    throw ArgumentError("need --config, --preset or --model");
  if (!c.model.empty() && oracle::model_id_from_string(c.model) != cfg.model)
    throw ArgumentError("--model " + c.model + " does not match the config model " + oracle::to_string(cfg.model));
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  if (c.episodes) cfg.episodes = *c.episodes;
  cfg.validate();
  return cfg;
}

void print_params(const char* label, const std::vector<std::string>& names, const std::vector<double>& learnt,
                  const std::vector<double>& truth) {
  for (std::size_t i = 0; i < names.size(); ++i)
    std::printf("  %-6s %-7s learnt %10.5f  true %10.5f  |diff| %.4f\n", label, names[i].c_str(), learnt[i], truth[i],
                std::abs(learnt[i] - truth[i]));
}

int cmd_train(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto ex = run_experiment(cfg);
  write_experiment(cfg.out, ex);
  std::printf("%s: %d episodes, seed %llu, %.1f s\n", oracle::to_string(cfg.model).c_str(), cfg.episodes,
              static_cast<unsigned long long>(cfg.seed), ex.report.wall_seconds);
  print_params("theta", ex.theta_names, ex.report.final_theta, ex.true_theta);
  print_params("psi", ex.psi_names, ex.report.final_psi, ex.true_psi);
  if (!ex.value_error.empty())
    std::printf("  value error %.5f -> %.5f\n", ex.value_error.front().error, ex.value_error.back().error);
  std::printf("wrote %s\n", cfg.out.c_str());
  return 0;
}

struct Check {
  std::string name;
  double value;
  double limit;
  bool pass;
};

void print_checks(const std::vector<Check>& checks) {
  for (const auto& k : checks)
    std::printf("%s  %-34s %.3e (limit %.1e)\n", k.pass ? "PASS" : "FAIL", k.name.c_str(), k.value, k.limit);
}

int cmd_verify(const Common& c, int points, std::optional<int> mart_k) {
  const auto cfg = resolve_config(c);
  const ModelId id = cfg.model;
  const std::uint64_t seed = c.seed.value_or(1);
  std::vector<Check> checks;
  auto upto = [&](const std::string& n, double v, double lim) { checks.push_back({n, v, lim, v <= lim}); };
  with_model(cfg, [&](const auto& model) {
    const auto g = diag::gradient_check(model, id, points, seed);
    upto("gradient dJ/dtheta (rel)", g.value, 1e-5);
    upto("gradient dq/dpsi (rel)", g.q, 1e-5);
    const auto dev = oracle::verify_parameterization(id, 1000, seed, cfg.mv_params(), cfg.jump_params());
    const double tol = id == ModelId::MV ? 1e-10 : 1e-9;
    upto("oracle J(theta*) vs closed form", dev.value, tol);
    upto("oracle q(psi*) vs closed form", dev.q, tol);
    std::vector<double> ts;
    for (int i = 0; i < 50; ++i) ts.push_back(model.horizon() * (i + 0.5) / 50.0);
    const auto ode = oracle::ode_residual(id, ts, cfg.mv_params(), cfg.jump_params());
    upto("ODE residual A", ode.A, 1e-12);
    upto("ODE residual B", ode.B, 1e-12);
    upto(id == ModelId::MV ? "ODE residual D" : "ODE residual C", ode.C, 1e-9);
    const auto cons = diag::consistency_sweep(model, id, points, seed, id == ModelId::MV);
    upto("consistency: normalization", cons.normalization, 1e-7);
    upto("consistency: Gibbs form", cons.gibbs, 1e-7);
    upto("consistency: value identity", cons.value, 1e-7);
    auto sz = diag::default_martingale_sizing(id);
    if (mart_k) sz.K = *mart_k;
    const auto ms = diag::martingale_suite(model, TimeGrid(model.horizon(), sz.K), sz.populations, sz.agents, seed);
    const double zt = std::abs(ms.truth.mean) / ms.truth.stderr_;
    checks.push_back({"martingale at truth |mean|/se", zt, 3.0, ms.truth.pass});
    const auto names = model.psi_names();
    for (std::size_t i = 0; i < ms.perturbed.size(); ++i) {
      const auto& r = ms.perturbed[i];
      const double z = std::abs(r.mean) / r.stderr_;
      checks.push_back({"martingale " + names[i] + "+0.5 rejects, |z|", z, 3.0, !r.pass});
    }
    std::printf("%s: martingale test over %lld steps (K=%d)\n", oracle::to_string(id).c_str(), ms.truth.steps, sz.K);
    return 0;
  });
  print_checks(checks);
  for (const auto& k : checks)
    if (!k.pass) return 1;
  return 0;
}

int cmd_eval(const std::string& report, const std::string& against, std::optional<int> agents,
             std::optional<std::uint64_t> seed, const std::string& out_dir, bool true_params) {
  const auto r = load_report(report);
  const int n = agents.value_or(r.config.eval.agents);
  const std::uint64_t s = seed.value_or(r.config.eval.seed);
  json out;
  out["report"] = report;
  out["agents"] = n;
  out["seed"] = s;
  with_model(r.config, [&](const auto& model) {
    const auto th = true_params ? model.true_theta() : r.theta;
    const auto ps = true_params ? model.true_psi() : r.psi;
    const double e = evaluate_value_error(model, th, ps, model.true_theta(), model.true_psi(), n, r.config.grid(), s,
                                          r.config.eval.literal);
    out["value_error"] = e;
    std::printf("value error (%d agents): %.6f\n", n, e);
    return 0;
  });
  if (!against.empty()) {
    const auto o = load_report(against);
    const bool a_mfc = r.config.model == ModelId::JumpMFC, b_mfc = o.config.model == ModelId::JumpMFC;
    const bool a_mfg = r.config.model == ModelId::JumpMFG, b_mfg = o.config.model == ModelId::JumpMFG;
    if (!((a_mfc && b_mfg) || (a_mfg && b_mfc)))
      throw ArgumentError("--against needs one jump-mfc and one jump-mfg report");
    const auto& rc = a_mfc ? r : o;
    const auto& rg = a_mfc ? o : r;
    if (!(rc.config.jump_params() == rg.config.jump_params()))
      throw ArgumentError("price of anarchy: the two reports use different environments");
    const jump::MFCModel mc(rc.config.jump_params());
    const jump::MFGModel mg(rg.config.jump_params());
    const auto pc = true_params ? mc.true_psi() : rc.psi;
    const auto pg = true_params ? mg.true_psi() : rg.psi;
    const auto poa = price_of_anarchy(mc, pc, rc.config.grid(), mg, pg, rg.config.grid(), n, s);
    out["price_of_anarchy"] = {{"value", poa.value}, {"stderr", poa.stderr_}, {"agents", poa.samples}};
    std::printf("price of anarchy (MFC - MFG payoff at t=0): %.6f +- %.6f\n", poa.value, poa.stderr_);
  }
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "eval.json") << out.dump(2) << '\n';
  std::printf("wrote %s\n", (fs::path(out_dir) / "eval.json").string().c_str());
  return 0;
}

int cmd_damoc(const Common& c, const std::vector<int>& sizes, int replicates, int j, double theta_offset) {
  const auto cfg = resolve_config(c);
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / "residuals.csv";
  diag::DamocScaling ds;
  with_model(cfg, [&](const auto& model) {
    const int ens = cfg.model == ModelId::MV ? 1000 : cfg.jump_env.ensemble_size;
    auto theta = model.true_theta();
    for (auto& v : theta) v += theta_offset;
    ds = diag::damoc_scaling(model, cfg.grid(), theta, model.true_psi(), cfg.test_rule, sizes,
                             replicates, ens, cfg.seed, cfg.threads, j);
    return 0;
  });
  std::ofstream out(path);
  out << "M,residual_norm\n";
  for (std::size_t i = 0; i < ds.sizes.size(); ++i) {
    out << ds.sizes[i] << ',' << format_double(ds.norms[i]) << '\n';
    std::printf("M=%5d  residual norm %.6e\n", ds.sizes[i], ds.norms[i]);
  }
  std::printf("log-log slope %.4f\nwrote %s\n", ds.slope, path.string().c_str());
  return 0;
}

int cmd_oracle_check(const Common& c, int paths, int steps) {
  const auto cfg = resolve_config(c);
  const std::uint64_t seed = c.seed.value_or(cfg.seed);
  Estimate est;
  double closed = 0.0;
  if (cfg.model == ModelId::MV) {
    const auto env = cfg.mv_params();
    const oracle::MVClosedForm cf(env);
    const double x0 = env.x0, mu0 = env.x0;
    est = oracle::mc_value_oracle(oracle::mv_optimal_problem(env), 0.0, x0, env.T,
                                  [&](double s) { return cf.mean_flow(0.0, mu0, s); }, paths, steps, seed);
    closed = cf.value(0.0, x0, mu0);
  } else {
    const auto env = cfg.jump_params();
    const bool mfc = cfg.model == ModelId::JumpMFC;
    const oracle::JumpClosedForm cf(env, mfc);
    const double x0 = env.x0, mu0 = env.x0;
    est = oracle::mc_value_oracle(oracle::jump_optimal_problem(env, mfc), 0.0, x0, env.T,
                                  [&](double s) { return cf.mean_flow(0.0, mu0, s); }, paths, steps, seed);
    closed = cf.value(0.0, x0, mu0);
  }
  const double z = (est.value - closed) / est.stderr_;
  std::printf("%s: closed-form J*(0, x0, mu0) = %.6f, Monte Carlo %.6f +- %.6f (%lld paths, %d steps), z = %.2f\n",
              oracle::to_string(cfg.model).c_str(), closed, est.value, est.stderr_, est.samples, steps, z);
  std::printf("%s\n", std::abs(z) <= 3.0 ? "PASS" : "FAIL");
  return std::abs(z) <= 3.0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field q-learning: training, verification and evaluation"};
  app.require_subcommand(1);

  Common train_c;
  auto* train = app.add_subcommand("train", "train from a config and write params.csv, report.json, value_error.csv");
  add_common(train, train_c, false);

  Common verify_c;
  int points = 100;
  std::optional<int> mart_k;
  auto* verify = app.add_subcommand("verify", "gradient, oracle, ODE, consistency and martingale checks");
  add_common(verify, verify_c, true);
  verify->add_option("--points", points, "random points per check")->check(CLI::PositiveNumber);
  verify->add_option("--martingale-steps", mart_k, "time steps K for the martingale test")->check(CLI::PositiveNumber);

  std::string report, against, eval_out = ".";
  std::optional<int> agents;
  std::optional<std::uint64_t> eval_seed;
  bool true_params = false;
  auto* eval = app.add_subcommand("eval", "value error of a report; price of anarchy of an MFC/MFG pair");
  eval->add_option("--report", report, "report.json from train")->required();
  eval->add_option("--against", against, "second report (jump-mfc vs jump-mfg) for the price of anarchy");
  eval->add_option("--agents", agents, "population size")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", eval_out, "directory for eval.json");
  eval->add_flag("--true-params", true_params, "use the true parameters instead of the learnt ones");

  Common damoc_c;
  std::vector<int> sizes = {50, 200, 800};
  int replicates = 8, episode = 1;
  double theta_offset = 0.0;
  auto* damoc = app.add_subcommand("damoc", "DAMOC residual norm at the true parameters against M");
  add_common(damoc, damoc_c, true);
  damoc->add_option("--sizes", sizes, "numbers of test policies")->delimiter(',');
  damoc->add_option("--replicates", replicates, "independent batches per size")->check(CLI::PositiveNumber);
  damoc->add_option("--episode", episode, "episode index for the test-policy bounds")->check(CLI::PositiveNumber);
  damoc->add_option("--theta-offset", theta_offset, "added to every component of the true theta");

  Common oc_c;
  int paths = 100000, steps = 200;
  auto* oc = app.add_subcommand("oracle-check", "Monte-Carlo value of the optimal policy against the closed form");
  add_common(oc, oc_c, true);
  oc->add_option("--paths", paths, "Monte-Carlo paths")->check(CLI::PositiveNumber);
  oc->add_option("--steps", steps, "time steps")->check(CLI::PositiveNumber);

  auto* show = app.add_subcommand("print-config", "print a resolved config as JSON");
  Common show_c;
  add_common(show, show_c, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_c);
    if (*verify) return cmd_verify(verify_c, points, mart_k);
    if (*eval) return cmd_eval(report, against, agents, eval_seed, eval_out, true_params);
    if (*damoc) return cmd_damoc(damoc_c, sizes, replicates, episode, theta_offset);
    if (*oc) return cmd_oracle_check(oc_c, paths, steps);
    if (*show) {
      std::cout << to_json(resolve_config(show_c)).dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
