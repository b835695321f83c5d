#pragma once

// Two-step alternating estimator for the heterogeneous-coefficient panel with
// one global and two families of local factor structures.
//
// A sweep is: (1) weighted least squares for every block with the composite
// weight 2I - 2P_C - P_{C_i} - P_{C_j}; (2) global factors as the leading
// eigenvectors of the pooled residual covariance; (3) country/industry factors
// from the residual covariances sandwiched by M_C; (4) per-block OLS after
// annihilating the joint factor space. Sweeps repeat until the final
// coefficients stop moving.

#include <cstdint>
#include <string>
#include <vector>

#include "hpanel/model.hpp"

namespace hpanel {

struct FitOptions {
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  // Leading eigenvalues to report per factor block, in addition to the count.
  int keep_eigenvalues = 0;
};

struct FitResult {
  CoefficientEstimates beta_step1;  // weighted step, last sweep
  CoefficientEstimates beta_final;  // after annihilating the joint factor space
  FactorEstimates factors;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each sweep's factor update
  std::vector<double> delta_trace;      // ||b(n) - b(n-1)|| / sqrt(n_blocks), from sweep 2
  std::vector<std::string> warnings;
  // Sweeps in which the fresh global block was rejected because it raised Q.
  int held_global_sweeps = 0;
};

void validate_fit_options(const FitOptions& options);

// T x n_blocks residuals Y - X b.
Matrix residuals(const PanelDataset& data, const CoefficientEstimates& beta);

// (2I - 2P_C - P_{C_i} - P_{C_j}) M without forming the T x T operator.
Matrix c_dagger_apply(const FactorEstimates& factors, int i, int j, const Matrix& m);

CoefficientEstimates step1_beta(const PanelDataset& data, const FactorEstimates& factors,
                                int workers = 1);

struct GlobalFactorUpdate {
  Matrix factors;  // T x l
  Vector eigvals;
};

GlobalFactorUpdate update_global_factors(const PanelDataset& data,
                                         const CoefficientEstimates& beta, int count,
                                         int n_values = 0);

struct LocalFactorUpdate {
  std::vector<Matrix> blocks;
  std::vector<Vector> eigvals;
};

// For Axis::Country, one block per i from the residuals of its j units; for
// Axis::Industry, one block per j from the i units observing it. All blocks
// lie in the orthogonal complement of global_factors.
LocalFactorUpdate update_local_factors(const PanelDataset& data,
                                       const CoefficientEstimates& beta,
                                       const Matrix& global_factors, Axis axis,
                                       const std::vector<int>& counts, int n_values = 0,
                                       int workers = 1);

// warnings (optional) receives one entry per block whose joint factor space
// was rank deficient and had redundant directions dropped.
CoefficientEstimates step2_beta(const PanelDataset& data, const FactorEstimates& factors,
                                int workers = 1, std::vector<std::string>* warnings = nullptr);

// W_ij = (X'M X)^{-1} X'M with M annihilating (C, C_i, C_j), d x T, so that
// step2_beta's coefficient for block b equals W_ij y_ij.
Matrix step2_weights(const PanelDataset& data, const FactorEstimates& factors, int b);

// Q(b, C): (1 / (n_blocks T)) sum_ij r_ij' (2I - 2P_C - P_{C_i} - P_{C_j}) r_ij.
double objective(const PanelDataset& data, const CoefficientEstimates& beta,
                 const FactorEstimates& factors);

// Random orthonormal starting factors: C from N(0,1) entries, locals from
// N(0,1) entries projected off C, each orthonormalized.
FactorEstimates initial_factors(const PanelDataset& data, const FactorCounts& counts,
                                std::uint64_t seed);

FitResult fit(const PanelDataset& data, const FactorCounts& counts, const FitOptions& options);

}  // namespace hpanel
