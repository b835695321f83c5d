#include "hpanel/metrics.hpp"

#include <cmath>

#include "hpanel/errors.hpp"

namespace hpanel {

double rmse_beta(const std::vector<CoefficientEstimates>& estimates,
                 const std::vector<CoefficientEstimates>& truths) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw DimensionError("rmse_beta needs equally many non-empty estimate and truth lists");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const Matrix& e = estimates[k].beta;
    const Matrix& t = truths[k].beta;
    if (e.rows() != t.rows() || e.cols() != t.cols() || e.cols() == 0) {
      throw DimensionError("rmse_beta: coefficient shapes differ");
    }
    total += (e - t).squaredNorm() / static_cast<double>(e.cols());
  }
  return std::sqrt(total / static_cast<double>(estimates.size()));
}

double projector_distance(const Matrix& a, const Matrix& b) {
  const bool ea = a.cols() == 0, eb = b.cols() == 0;
  if (ea && eb) return 0.0;
  if (!ea && !eb && a.rows() != b.rows()) throw DimensionError("projector_distance: T differs");
  const auto t = ea ? b.rows() : a.rows();
  const Matrix pa = ea ? Matrix::Zero(t, t) : projector(a);
  const Matrix pb = eb ? Matrix::Zero(t, t) : projector(b);
  return (pa - pb).norm();
}

double rmse_factor_space(const std::vector<std::vector<Matrix>>& estimated,
                         const std::vector<std::vector<Matrix>>& truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw DimensionError("rmse_factor_space needs equally many non-empty replication lists");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < estimated.size(); ++k) {
    if (estimated[k].size() != truth[k].size() || estimated[k].empty()) {
      throw DimensionError("rmse_factor_space: block lists differ in length");
    }
    double rep = 0.0;
    for (std::size_t u = 0; u < estimated[k].size(); ++u) {
      const double dist = projector_distance(estimated[k][u], truth[k][u]);
      rep += dist * dist;
    }
    total += rep / static_cast<double>(estimated[k].size());
  }
  return std::sqrt(total / static_cast<double>(estimated.size()));
}

SelectionRates selection_rates(const std::vector<int>& selected, const std::vector<int>& truth) {
  if (selected.size() != truth.size()) throw DimensionError("selection_rates: lengths differ");
  SelectionRates r;
  if (selected.empty()) return r;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (selected[k] == truth[k]) r.correct += 1.0;
    else if (selected[k] < truth[k]) r.under += 1.0;
    else r.over += 1.0;
  }
  const double n = static_cast<double>(selected.size());
  return {r.correct / n, r.under / n, r.over / n};
}

SelectionRates selection_rates(const std::vector<std::vector<int>>& selected,
                               const std::vector<std::vector<int>>& truth) {
  if (selected.size() != truth.size()) throw DimensionError("selection_rates: lengths differ");
  SelectionRates r;
  if (selected.empty()) return r;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const SelectionRates rep = selection_rates(selected[k], truth[k]);
    r.correct += rep.correct;
    r.under += rep.under;
    r.over += rep.over;
  }
  const double n = static_cast<double>(selected.size());
  return {r.correct / n, r.under / n, r.over / n};
}

double coverage_rate(const std::vector<bool>& hits) {
  if (hits.empty()) throw DimensionError("coverage_rate of an empty flag list");
  long n = 0;
  for (bool h : hits) n += h ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(hits.size());
}

}  // namespace hpanel
