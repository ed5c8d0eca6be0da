#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mfq/errors.hpp"
#include "mfq/params.hpp"

namespace mfq {

enum class MeanFlowKind { PerEpisode, PerEpochs };

inline std::string to_string(MeanFlowKind k) { return k == MeanFlowKind::PerEpisode ? "per-episode" : "per-epochs"; }

inline MeanFlowKind mean_flow_kind_from_string(const std::string& s) {
  if (s == "per-episode") return MeanFlowKind::PerEpisode;
  if (s == "per-epochs") return MeanFlowKind::PerEpochs;
  throw ArgumentError("unknown mean-flow rule '" + s + "'");
}

struct MeanFlowRule {
  MeanFlowKind kind = MeanFlowKind::PerEpisode;
  Schedule rho = Schedule::power(1, 1.0, 1.0);  // rho_j = 1/j
  int epoch_length = 1;

  bool operator==(const MeanFlowRule&) const = default;
};

/// Running estimate of the population mean at every node k for every test
/// policy m. Columns (one per m) are independent, so rollouts for different m
/// may update concurrently.
class MeanFlow {
 public:
  MeanFlow(int steps, int policies, double initial, MeanFlowRule rule)
      : rule_(std::move(rule)),
        means_(policies, std::vector<double>(steps + 1, initial)),
        pending_(policies, std::vector<std::vector<double>>(steps + 1)) {
    if (steps < 1 || policies < 1) throw ArgumentError("MeanFlow: need K >= 1 and M >= 1");
    if (!std::isfinite(initial)) throw ArgumentError("MeanFlow: initial mean must be finite");
    if (rule_.rho.dim() != 1) throw ArgumentError("MeanFlow: rho schedule must be scalar");
    if (rule_.kind == MeanFlowKind::PerEpochs && rule_.epoch_length < 1)
      throw ArgumentError("MeanFlow: epoch length must be >= 1");
  }

  int steps() const noexcept { return static_cast<int>(means_.front().size()) - 1; }
  int policies() const noexcept { return static_cast<int>(means_.size()); }
  const MeanFlowRule& rule() const noexcept { return rule_; }

  double mean(int k, int m) const { return means_.at(m).at(k); }
  void set_mean(int k, int m, double value) { means_.at(m).at(k) = value; }

  double rho(int j) const {
    const double r = rule_.rho.at(j)[0];
    if (!(r >= 0.0 && r <= 1.0)) throw ArgumentError("MeanFlow: rho outside [0, 1]");
    return r;
  }

  /// Incorporates the state x observed at node k by test policy m in episode j.
  void update(int k, int m, double x, int j) {
    if (!std::isfinite(x)) throw NumericError("state", "mean-flow update at k=" + std::to_string(k));
    double& mu = means_.at(m).at(k);
    if (rule_.kind == MeanFlowKind::PerEpisode) {
      const double r = rho(j);
      mu = (1.0 - r) * mu + r * x;
      return;
    }
    auto& buf = pending_[m][k];
    buf.push_back(x);
    if (static_cast<int>(buf.size()) < rule_.epoch_length) return;
    const double r = rho(j);
    double sum = 0.0;
    for (double v : buf) sum += v;
    mu = (1.0 - r) * mu + r * sum / rule_.epoch_length;
    buf.clear();
  }

 private:
  MeanFlowRule rule_;
  std::vector<std::vector<double>> means_;
  std::vector<std::vector<std::vector<double>>> pending_;
};

}  // namespace mfq
