#pragma once

// Monte Carlo harness: simulate, select counts, fit with estimated and with
// true counts, optionally bootstrap, and aggregate the evaluation criteria.

#include <cstdint>
#include <functional>
#include <vector>

#include "hpanel/dgp.hpp"
#include "hpanel/inference.hpp"
#include "hpanel/metrics.hpp"
#include "hpanel/selection.hpp"

namespace hpanel {

struct McConfig {
  DgpConfig dgp;
  int replications = 200;
  std::uint64_t seed = 1;
  FitOptions fit;
  SelectionOptions selection;
  bool with_true_counts = true;
  bool with_selection = true;
  // Bootstrap the first `bootstrap_replications` replications (0 disables).
  int bootstrap_replications = 0;
  BootstrapOptions bootstrap;
  int workers = 1;
};

void validate_mc_config(const McConfig& config);

struct McReplication {
  ReplicationRecord star;       // fitted with the true counts
  ReplicationRecord estimated;  // fitted with selected counts
};

struct McSummary {
  int replications = 0;
  double rmse_beta_star = 0.0, rmse_f_star = 0.0, rmse_fc_star = 0.0, rmse_fi_star = 0.0;
  double rmse_beta = 0.0, rmse_f = 0.0, rmse_fc = 0.0, rmse_fi = 0.0;
  SelectionRates rate_global, rate_country, rate_industry;
  double coverage = 0.0;
  long coverage_total = 0;
};

// Replication k uses DGP seed derive_seed(config.seed, {Replication, k}).
McReplication run_replication(const McConfig& config, int k);

McSummary summarize(const std::vector<McReplication>& reps);

// progress (optional) is called after each finished replication.
std::vector<McReplication> run_monte_carlo(const McConfig& config,
                                           const std::function<void(int)>& progress = {});

}  // namespace hpanel
