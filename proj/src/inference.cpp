#include "hpanel/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hpanel/errors.hpp"
#include "hpanel/kernels.hpp"
#include "hpanel/parallel.hpp"

namespace hpanel {

int default_bandwidth(int T) {
  // Guard the cube root against landing just below an integer.
  return static_cast<int>(std::floor(1.75 * std::cbrt(static_cast<double>(T)) + 1e-12));
}

void validate_bootstrap_options(const BootstrapOptions& o, int T) {
  if (o.replications < 2) throw ValidationError("bootstrap replications must be at least 2");
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const int m = o.bandwidth.value_or(default_bandwidth(T));
  if (m < 1 || m >= T) throw ValidationError("bandwidth must satisfy 1 <= m < T");
  if (o.workers < 1) throw ValidationError("workers must be at least 1");
}

Vector dwb_weights(int T, int m, Rng& rng) {
  if (T < 1 || m < 1) throw DimensionError("dwb_weights needs T >= 1 and m >= 1");
  if (m > T) throw DimensionError("bandwidth m exceeds T");
  Vector eta(T + m - 1);
  fill_normal(rng, eta);
  Vector xi(T);
  kernels::active().moving_sum(eta.data(), static_cast<std::size_t>(T),
                               static_cast<std::size_t>(m), 1.0 / std::sqrt(static_cast<double>(m)),
                               xi.data());
  return xi;
}

Vector dwb_weights(int T, int m, std::uint64_t seed) {
  Rng rng(seed);
  return dwb_weights(T, m, rng);
}

Matrix bootstrap_response(const PanelDataset& data, const CoefficientEstimates& beta_step1,
                          const Vector& xi) {
  if (xi.size() != data.T) throw DimensionError("xi length must equal T");
  const auto& k = kernels::active();
  Matrix y_star(data.T, data.n_blocks());
  Vector fitted(data.T), resid(data.T);
  for (int b = 0; b < data.n_blocks(); ++b) {
    fitted = data.x_block(b) * beta_step1.beta.col(b);
    resid = data.y_block(b) - fitted;
    k.hadamard_add(fitted.data(), resid.data(), xi.data(), y_star.col(b).data(),
                   static_cast<std::size_t>(data.T));
  }
  return y_star;
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DimensionError("empirical_quantile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  // p * B is often an integer up to rounding; the guard keeps ceil from
  // stepping past it.
  long idx = static_cast<long>(std::ceil(p * n - 1e-9));
  idx = std::clamp<long>(idx, 1, static_cast<long>(sorted.size()));
  return sorted[static_cast<std::size_t>(idx - 1)];
}

void bootstrap_intervals(const BootstrapResult& r, const CoefficientEstimates& beta, double alpha,
                         Matrix& lower, Matrix& upper) {
  const auto d = beta.beta.rows();
  const auto nb = beta.beta.cols();
  if (r.draws.rows() != d * nb) throw DimensionError("draw table does not match coefficients");
  lower.resize(d, nb);
  upper.resize(d, nb);
  std::vector<double> row(static_cast<std::size_t>(r.draws.cols()));
  for (Eigen::Index e = 0; e < r.draws.rows(); ++e) {
    for (Eigen::Index c = 0; c < r.draws.cols(); ++c) row[c] = r.draws(e, c);
    std::sort(row.begin(), row.end());
    const auto b = e / d, s = e % d;
    lower(s, b) = beta.beta(s, b) - empirical_quantile(row, 1.0 - alpha / 2.0);
    upper(s, b) = beta.beta(s, b) - empirical_quantile(row, alpha / 2.0);
  }
}

BootstrapResult bootstrap_beta(const PanelDataset& data, const FitResult& fit,
                               const BootstrapOptions& options) {
  validate_bootstrap_options(options, data.T);
  const int T = data.T, d = data.d, nb = data.n_blocks(), B = options.replications;
  BootstrapResult out;
  out.alpha = options.alpha;
  out.bandwidth = options.bandwidth.value_or(default_bandwidth(T));

  // b*_ij = W_ij Y*_ij = b_hat_ij + W_ij (e_ij o xi), so every draw is one
  // product of the stacked rows of W_ij diag(e_ij) with xi.
  Matrix v(static_cast<Eigen::Index>(nb) * d, T);
  Vector offset(static_cast<Eigen::Index>(nb) * d);
  parallel_for(static_cast<std::size_t>(nb), options.workers, [&](std::size_t k) {
    const int b = static_cast<int>(k);
    const Matrix w = step2_weights(data, fit.factors, b);
    const Vector e = data.y_block(b) - data.x_block(b) * fit.beta_step1.beta.col(b);
    v.middleRows(static_cast<Eigen::Index>(b) * d, d) = w * e.asDiagonal();
    offset.segment(static_cast<Eigen::Index>(b) * d, d) =
        fit.beta_step1.beta.col(b) - fit.beta_final.beta.col(b);
  });

  Matrix xi(T, B);
  for (int r = 0; r < B; ++r) {
    Rng rng = make_rng(options.seed, {tag(Stream::Bootstrap), static_cast<std::uint64_t>(r)});
    xi.col(r) = dwb_weights(T, out.bandwidth, rng);
  }
  out.draws = v * xi;
  out.draws.colwise() += offset;
  bootstrap_intervals(out, fit.beta_final, options.alpha, out.lower, out.upper);
  return out;
}

std::vector<Vector> mean_group(const PanelDataset& data, const CoefficientEstimates& est,
                               Axis axis) {
  if (est.beta.cols() != data.n_blocks() || est.beta.rows() != data.d) {
    throw DimensionError("coefficient table does not match the dataset");
  }
  std::vector<Vector> out;
  if (axis == Axis::Country) {
    for (int i = 0; i < data.L; ++i) {
      Vector s = Vector::Zero(data.d);
      for (int b = data.first_block(i); b < data.first_block(i) + data.n_in(i); ++b) {
        s += est.beta.col(b);
      }
      out.push_back(s / std::max(1, data.n_in(i)));
    }
  } else {
    for (int j = 0; j < data.N; ++j) {
      Vector s = Vector::Zero(data.d);
      for (int b : data.blocks_of_j(j)) s += est.beta.col(b);
      out.push_back(s / std::max(1, data.l_of(j)));
    }
  }
  return out;
}

MeanGroupEstimator fitted_mean_group(const FitOptions& options) {
  return [options](const PanelDataset& sub, const FactorCounts& counts, Axis axis, int index) {
    const FitResult r = fit(sub, counts, options);
    return mean_group(sub, r.beta_final, axis).at(static_cast<std::size_t>(index));
  };
}

namespace {

std::vector<int> with_unit(std::vector<int> half, int unit) {
  if (std::find(half.begin(), half.end(), unit) == half.end()) {
    half.push_back(unit);
    std::sort(half.begin(), half.end());
  }
  return half;
}

std::pair<std::vector<int>, std::vector<int>> halves(int n) {
  const int first = (n + 1) / 2;
  std::vector<int> a, b;
  for (int u = 0; u < n; ++u) (u < first ? a : b).push_back(u);
  return {a, b};
}

// j units kept by PanelDataset::subset, in their new dense order.
std::vector<int> retained_j(const PanelDataset& data, const JackknifeSplit& s) {
  std::vector<bool> wanted(data.N, false), seen(data.N, false);
  for (int j : s.keep_j) wanted[j] = true;
  for (int i : s.keep_i) {
    for (int j : data.j_sets[i]) {
      if (wanted[j]) seen[j] = true;
    }
  }
  std::vector<int> out;
  for (int j = 0; j < data.N; ++j) {
    if (seen[j]) out.push_back(j);
  }
  return out;
}

}  // namespace

std::vector<JackknifeSplit> jackknife_splits(const PanelDataset& data, Axis axis, int index) {
  if (data.L < 4 || data.N < 4) throw ValidationError("jackknife needs L >= 4 and N >= 4");
  const int units = axis == Axis::Country ? data.L : data.N;
  if (index < 0 || index >= units) throw DimensionError("jackknife target index out of range");
  auto [i1, i2] = halves(data.L);
  auto [j1, j2] = halves(data.N);
  if (axis == Axis::Country) {
    i1 = with_unit(i1, index);
    i2 = with_unit(i2, index);
  } else {
    j1 = with_unit(j1, index);
    j2 = with_unit(j2, index);
  }
  return {{i1, j1}, {i2, j1}, {i1, j2}, {i2, j2}};
}

JackknifeResult jackknife_detailed(const PanelDataset& data, const FactorCounts& counts, Axis axis,
                                   int index, const MeanGroupEstimator& estimator) {
  const auto splits = jackknife_splits(data, axis, index);
  JackknifeResult out;
  out.full = estimator(data, counts, axis, index);
  out.split_avg = Vector::Zero(out.full.size());
  for (std::size_t k = 0; k < splits.size(); ++k) {
    const JackknifeSplit& s = splits[k];
    const std::vector<int> js = retained_j(data, s);
    FactorCounts sub_counts;
    sub_counts.global = counts.global;
    for (int i : s.keep_i) sub_counts.country.push_back(counts.country.at(i));
    for (int j : js) sub_counts.industry.push_back(counts.industry.at(j));
    const auto& pool = axis == Axis::Country ? s.keep_i : js;
    const auto pos = std::find(pool.begin(), pool.end(), index) - pool.begin();
    if (pos == static_cast<long>(pool.size())) {
      throw ValidationError("jackknife split " + std::to_string(k + 1) + " lost the target unit");
    }
    const std::string where = "jackknife split " + std::to_string(k + 1) + ": ";
    try {
      out.split_avg += estimator(data.subset(s.keep_i, s.keep_j), sub_counts, axis,
                                 static_cast<int>(pos));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    }
  }
  out.split_avg /= static_cast<double>(splits.size());
  out.corrected = 2.0 * out.full - out.split_avg;
  return out;
}

Vector jackknife_bias_correct(const PanelDataset& data, const FactorCounts& counts,
                              const FitOptions& options, Axis axis, int index) {
  return jackknife_detailed(data, counts, axis, index, fitted_mean_group(options)).corrected;
}

MeanGroupInterval mean_group_interval(const PanelDataset& data, const BootstrapResult& boot,
                                      const Vector& estimate, Axis axis, int index,
                                      double alpha) {
  const int d = data.d;
  if (estimate.size() != d) throw DimensionError("estimate length must equal d");
  std::vector<int> blocks;
  if (axis == Axis::Country) {
    if (index < 0 || index >= data.L) throw DimensionError("country index out of range");
    for (int b = data.first_block(index); b < data.first_block(index) + data.n_in(index); ++b) {
      blocks.push_back(b);
    }
  } else {
    if (index < 0 || index >= data.N) throw DimensionError("industry index out of range");
    blocks = data.blocks_of_j(index);
  }
  if (blocks.empty()) throw DimensionError("mean-group target has no blocks");
  MeanGroupInterval out{estimate, Vector(d), Vector(d)};
  std::vector<double> row(static_cast<std::size_t>(boot.draws.cols()));
  for (int s = 0; s < d; ++s) {
    for (Eigen::Index c = 0; c < boot.draws.cols(); ++c) {
      double acc = 0.0;
      for (int b : blocks) acc += boot.draws(static_cast<Eigen::Index>(b) * d + s, c);
      row[c] = acc / static_cast<double>(blocks.size());
    }
    std::sort(row.begin(), row.end());
    out.lower(s) = estimate(s) - empirical_quantile(row, 1.0 - alpha / 2.0);
    out.upper(s) = estimate(s) - empirical_quantile(row, alpha / 2.0);
  }
  return out;
}

}  // namespace hpanel
