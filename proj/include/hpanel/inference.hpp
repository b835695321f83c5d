#pragma once

// Dependent wild bootstrap intervals for block coefficients, mean-group
// estimators and the split-sample jackknife bias correction.

#include <cstdint>
#include <functional>
#include <optional>

#include "hpanel/estimator.hpp"
#include "hpanel/rng.hpp"

namespace hpanel {

struct BootstrapOptions {
  int replications = 399;
  // Defaults to floor(1.75 T^(1/3)).
  std::optional<int> bandwidth;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int workers = 1;
};

int default_bandwidth(int T);
void validate_bootstrap_options(const BootstrapOptions& options, int T);

// xi_t = m^{-1/2} sum_{k<m} eta_{t+k} with eta i.i.d. N(0, 1), so that
// E[xi_t xi_{t+h}] = (1 - |h|/m)^+. Consumes exactly T + m - 1 normal draws.
Vector dwb_weights(int T, int m, Rng& rng);
Vector dwb_weights(int T, int m, std::uint64_t seed);

// Y* = X b_hat + E_hat o xi with E_hat = Y - X b_hat, T x n_blocks.
Matrix bootstrap_response(const PanelDataset& data, const CoefficientEstimates& beta_step1,
                          const Vector& xi);

struct BootstrapResult {
  // Row e = b * d + s holds the B draws of b*_{ij,s} - b_{ij,s}.
  Matrix draws;
  Matrix lower;  // d x n_blocks
  Matrix upper;  // d x n_blocks
  double alpha = 0.05;
  int bandwidth = 0;
};

// Order statistic ceil(p B) (1-based) of the sorted draws; no interpolation.
double empirical_quantile(const std::vector<double>& sorted, double p);

// Basic-bootstrap interval [b - q_{1-alpha/2}, b - q_{alpha/2}] per element.
void bootstrap_intervals(const BootstrapResult& draws_only, const CoefficientEstimates& beta,
                         double alpha, Matrix& lower, Matrix& upper);

// Factors stay fixed at the fitted values; each replication draws one xi
// shared by every block.
BootstrapResult bootstrap_beta(const PanelDataset& data, const FitResult& fit,
                               const BootstrapOptions& options);

// Per-i averages over its j units (Axis::Country) or per-j averages over the
// i units observing it (Axis::Industry).
std::vector<Vector> mean_group(const PanelDataset& data, const CoefficientEstimates& estimates,
                               Axis axis);

// Mean-group estimate for target `index` on `sub`, given its counts.
using MeanGroupEstimator =
    std::function<Vector(const PanelDataset& sub, const FactorCounts& counts, Axis axis, int index)>;

// Default estimator: fit() then mean_group of the final coefficients.
MeanGroupEstimator fitted_mean_group(const FitOptions& options);

struct JackknifeSplit {
  std::vector<int> keep_i;
  std::vector<int> keep_j;
};

// The four quarter samples. Along the target's axis both halves contain the
// target unit; odd sizes put the extra unit in the first half.
std::vector<JackknifeSplit> jackknife_splits(const PanelDataset& data, Axis axis, int index);

struct JackknifeResult {
  Vector full;       // uncorrected mean-group estimate
  Vector split_avg;  // average of the four quarter-sample estimates
  Vector corrected;  // 2 full - split_avg
};

JackknifeResult jackknife_detailed(const PanelDataset& data, const FactorCounts& counts, Axis axis,
                                   int index, const MeanGroupEstimator& estimator);

Vector jackknife_bias_correct(const PanelDataset& data, const FactorCounts& counts,
                              const FitOptions& options, Axis axis, int index);

struct MeanGroupInterval {
  Vector estimate;
  Vector lower;
  Vector upper;
};

// Interval for a (possibly bias-corrected) mean-group statistic centred at
// `estimate`, using the mean over the target's blocks of the block draws.
MeanGroupInterval mean_group_interval(const PanelDataset& data, const BootstrapResult& boot,
                                      const Vector& estimate, Axis axis, int index, double alpha);

}  // namespace hpanel
