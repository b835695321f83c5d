#pragma once

// Monte Carlo evaluation criteria: RMSEs of coefficients and factor spaces,
// selection rates and bootstrap coverage.

#include <vector>

#include "hpanel/model.hpp"

namespace hpanel {

// sqrt( (1/R) sum_k ||b_k - beta_k||_F^2 / n_blocks ).
double rmse_beta(const std::vector<CoefficientEstimates>& estimates,
                 const std::vector<CoefficientEstimates>& truths);

// ||P_A - P_B||_F with the projector of an empty block taken as zero.
double projector_distance(const Matrix& a, const Matrix& b);

// sqrt( (1/R) sum_k (1/n_k) sum_u ||P_{est_{k,u}} - P_{true_{k,u}}||_F^2 ).
// One inner list per replication; a single global block gives the global
// criterion, per-i or per-j lists give the local ones.
double rmse_factor_space(const std::vector<std::vector<Matrix>>& estimated,
                         const std::vector<std::vector<Matrix>>& truth);

struct SelectionRates {
  double correct = 0.0;
  double under = 0.0;
  double over = 0.0;
};

SelectionRates selection_rates(const std::vector<int>& selected, const std::vector<int>& truth);

// Local variant: each replication contributes the average over its units.
SelectionRates selection_rates(const std::vector<std::vector<int>>& selected,
                               const std::vector<std::vector<int>>& truth);

double coverage_rate(const std::vector<bool>& hits);

// Per-replication summary kept by the Monte Carlo harness.
struct ReplicationRecord {
  bool present = false;
  double sq_err_beta = 0.0;     // ||b - beta||^2 / n_blocks
  double sq_err_global = 0.0;   // ||P_C - P_F||^2
  double sq_err_country = 0.0;  // mean over i
  double sq_err_industry = 0.0; // mean over j
  FactorCounts selected;
  FactorCounts truth;
  long coverage_hits = 0;
  long coverage_total = 0;
};

}  // namespace hpanel
