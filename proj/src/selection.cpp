#include "hpanel/selection.hpp"

#include <algorithm>
#include <cmath>

#include "hpanel/errors.hpp"

namespace hpanel {

void validate_selection_options(const SelectionOptions& o) {
  if (o.d_max < 1) throw ValidationError("d_max must be at least 1");
  if (o.omega_override && !(*o.omega_override > 0.0)) {
    throw ValidationError("omega must be positive");
  }
  if (o.preliminary_max_iter < 0) throw ValidationError("preliminary_max_iter must be non-negative");
}

double default_omega(int L, int N, int T) {
  const int m = std::max({L, N, T});
  return 1.0 / std::log(static_cast<double>(m));
}

int select_count(const Vector& eigvals, double omega, int d_max) {
  if (d_max < 0) throw DimensionError("d_max must be non-negative");
  if (eigvals.size() < d_max + 1) {
    throw DimensionError("select_count needs d_max + 1 eigenvalues, got " +
                         std::to_string(eigvals.size()));
  }
  if (!(omega > 0.0)) throw ValidationError("omega must be positive");
  int best = 0;
  double best_value = 0.0;
  for (int s = 0; s <= d_max; ++s) {
    const double lam_s = s == 0 ? 1.0 : eigvals(s - 1);
    const double value = lam_s >= omega ? eigvals(s) / lam_s : 1.0;
    if (s == 0 || value < best_value) {
      best = s;
      best_value = value;
    }
  }
  return best;
}

SelectionResult select_all_detailed(const PanelDataset& data, const SelectionOptions& options,
                                    const FitOptions& fit_options) {
  validate_selection_options(options);
  const int dm = options.d_max;
  SelectionResult out;
  out.omega = options.omega_override.value_or(default_omega(data.L, data.N, data.T));

  FitOptions prelim = fit_options;
  if (options.preliminary_max_iter > 0) prelim.max_iter = options.preliminary_max_iter;
  out.preliminary = fit(data, FactorCounts::uniform(data.L, data.N, dm, dm, dm), prelim);
  const CoefficientEstimates& b = out.preliminary.beta_final;

  auto global = update_global_factors(data, b, dm + 1, dm + 1);
  out.eig_global = global.eigvals;
  out.counts.global = select_count(out.eig_global, out.omega, dm);
  const Matrix c = out.counts.global > 0
                       ? orthonormalize_columns(global.factors.leftCols(out.counts.global))
                       : Matrix(data.T, 0);

  const std::vector<int> zero_l(data.L, 0), zero_n(data.N, 0);
  auto country = update_local_factors(data, b, c, Axis::Country, zero_l, dm + 1,
                                      fit_options.workers);
  auto industry = update_local_factors(data, b, c, Axis::Industry, zero_n, dm + 1,
                                       fit_options.workers);
  out.eig_country = std::move(country.eigvals);
  out.eig_industry = std::move(industry.eigvals);
  out.counts.country.resize(data.L);
  out.counts.industry.resize(data.N);
  for (int i = 0; i < data.L; ++i) {
    out.counts.country[i] = select_count(out.eig_country[i], out.omega, dm);
  }
  for (int j = 0; j < data.N; ++j) {
    out.counts.industry[j] = select_count(out.eig_industry[j], out.omega, dm);
  }
  return out;
}

FactorCounts select_all(const PanelDataset& data, const SelectionOptions& options,
                        const FitOptions& fit_options) {
  return select_all_detailed(data, options, fit_options).counts;
}

}  // namespace hpanel
