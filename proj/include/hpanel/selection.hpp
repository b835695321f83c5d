#pragma once

// Factor-count selection by the thresholded eigenvalue-ratio criterion.

#include <optional>

#include "hpanel/estimator.hpp"

namespace hpanel {

struct SelectionOptions {
  int d_max = 5;
  // Defaults to 1 / log(max(L, N, T)).
  std::optional<double> omega_override;
  // Sweep cap for the over-specified preliminary fit, which rotates slowly
  // inside its surplus factor space and rarely meets tol. 0 keeps the
  // caller's max_iter.
  int preliminary_max_iter = 30;
};

void validate_selection_options(const SelectionOptions& options);

double default_omega(int L, int N, int T);

// argmin over 0 <= s <= d_max of
//   (lambda_{s+1} / lambda_s) * 1{lambda_s >= omega} + 1{lambda_s < omega}
// with the mock lambda_0 = 1 prepended here. Ties go to the smallest s.
// eigvals must be descending and hold at least d_max + 1 values.
int select_count(const Vector& eigvals, double omega, int d_max);

struct SelectionResult {
  FactorCounts counts;
  FitResult preliminary;  // the over-specified fit with every count = d_max
  Vector eig_global;
  std::vector<Vector> eig_country;
  std::vector<Vector> eig_industry;
  double omega = 0.0;
};

SelectionResult select_all_detailed(const PanelDataset& data, const SelectionOptions& options,
                                    const FitOptions& fit_options);

FactorCounts select_all(const PanelDataset& data, const SelectionOptions& options,
                        const FitOptions& fit_options);

}  // namespace hpanel
