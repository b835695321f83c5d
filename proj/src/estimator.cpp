#include "hpanel/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hpanel/errors.hpp"
#include "hpanel/parallel.hpp"
#include "hpanel/rng.hpp"

namespace hpanel {

namespace {

// Z_b^T Z_b for Z_b = [X_b, y_b], fixed for the lifetime of a dataset.
std::vector<Matrix> block_cross_products(const PanelDataset& data, int workers) {
  std::vector<Matrix> out(data.n_blocks());
  const int d = data.d;
  parallel_for(out.size(), workers, [&](std::size_t k) {
    const int b = static_cast<int>(k);
    Matrix z(data.T, d + 1);
    z.leftCols(d) = data.x_block(b);
    z.col(d) = data.y_block(b);
    out[k] = z.transpose() * z;
  });
  return out;
}

Matrix gram_inverse(const Matrix& c, const char* what) {
  if (c.cols() == 0) return Matrix(0, 0);
  Eigen::LLT<Matrix> llt(c.transpose() * c);
  if (llt.info() != Eigen::Success) {
    throw RankDeficient(std::string("factor block is rank deficient: ") + what);
  }
  return llt.solve(Matrix::Identity(c.cols(), c.cols()));
}

// Projections of every block's [X, y] onto the current factor blocks, plus the
// small Gram matrices needed to form projector quadratic forms.
struct FactorMoments {
  Matrix ginv_global;
  std::vector<Matrix> ginv_country;
  std::vector<Matrix> ginv_industry;
  std::vector<Matrix> a_global;    // per block: C^T Z_b
  std::vector<Matrix> a_country;   // per block: C_i^T Z_b
  std::vector<Matrix> a_industry;  // per block: C_j^T Z_b
  // Cross Gram matrices of the stacked (C, C_i, C_j) space.
  Matrix gram_global;                    // C^T C
  std::vector<Matrix> gram_country;      // C_i^T C_i
  std::vector<Matrix> gram_industry;     // C_j^T C_j
  std::vector<Matrix> global_country;    // C^T C_i
  std::vector<Matrix> global_industry;   // C^T C_j
  std::vector<Matrix> country_industry;  // C_i^T [C_1, ..., C_N]
  std::vector<Eigen::Index> industry_offset;
};

void check_factor_shapes(const PanelDataset& data, const FactorEstimates& f) {
  if (f.global.rows() != data.T && f.global.cols() > 0) {
    throw DimensionError("global factor block has wrong number of rows");
  }
  if (static_cast<int>(f.country.size()) != data.L) {
    throw DimensionError("need one country factor block per i");
  }
  if (static_cast<int>(f.industry.size()) != data.N) {
    throw DimensionError("need one industry factor block per j");
  }
  for (const auto& m : f.country) {
    if (m.cols() > 0 && m.rows() != data.T) throw DimensionError("country factor block has wrong rows");
  }
  for (const auto& m : f.industry) {
    if (m.cols() > 0 && m.rows() != data.T) throw DimensionError("industry factor block has wrong rows");
  }
}

void stack_z_projection(const Matrix& c, const PanelDataset& data, int b, Matrix& a) {
  a.resize(c.cols(), data.d + 1);
  if (c.cols() == 0) return;
  a.leftCols(data.d).noalias() = c.transpose().lazyProduct(data.x_block(b));
  a.col(data.d).noalias() = c.transpose() * data.y_block(b);
}

Matrix cross(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || b.cols() == 0) return Matrix::Zero(a.cols(), b.cols());
  return a.transpose() * b;
}

FactorMoments compute_moments(const PanelDataset& data, const FactorEstimates& f, int workers) {
  check_factor_shapes(data, f);
  FactorMoments m;
  m.ginv_global = gram_inverse(f.global, "global");
  m.ginv_country.resize(data.L);
  m.ginv_industry.resize(data.N);
  for (int i = 0; i < data.L; ++i) m.ginv_country[i] = gram_inverse(f.country[i], "country");
  for (int j = 0; j < data.N; ++j) m.ginv_industry[j] = gram_inverse(f.industry[j], "industry");

  m.gram_global = cross(f.global, f.global);
  Eigen::Index total = 0;
  for (int j = 0; j < data.N; ++j) {
    m.industry_offset.push_back(total);
    total += f.industry[j].cols();
    m.gram_industry.push_back(cross(f.industry[j], f.industry[j]));
    m.global_industry.push_back(cross(f.global, f.industry[j]));
  }
  Matrix all_industry(data.T, total);
  for (int j = 0; j < data.N; ++j) {
    if (f.industry[j].cols() > 0) {
      all_industry.middleCols(m.industry_offset[j], f.industry[j].cols()) = f.industry[j];
    }
  }
  for (int i = 0; i < data.L; ++i) {
    m.gram_country.push_back(cross(f.country[i], f.country[i]));
    m.global_country.push_back(cross(f.global, f.country[i]));
    m.country_industry.push_back(cross(f.country[i], all_industry));
  }

  const int nb = data.n_blocks();
  m.a_global.resize(nb);
  m.a_country.resize(nb);
  m.a_industry.resize(nb);
  parallel_for(static_cast<std::size_t>(nb), workers, [&](std::size_t k) {
    const int b = static_cast<int>(k);
    stack_z_projection(f.global, data, b, m.a_global[k]);
    stack_z_projection(f.country[data.block_i(b)], data, b, m.a_country[k]);
    stack_z_projection(f.industry[data.block_j(b)], data, b, m.a_industry[k]);
  });
  return m;
}

void subtract_quad(const Matrix& a, const Matrix& ginv, double weight, Matrix& w) {
  if (a.rows() == 0) return;
  w.noalias() -= weight * (a.transpose().lazyProduct(ginv.lazyProduct(a)));
}

// Z^T (2I - 2P_C - P_{C_i} - P_{C_j}) Z for block b.
Matrix step1_weighted_gram(const Matrix& ztz, const FactorMoments& m, const PanelDataset& data,
                           int b) {
  const int i = data.block_i(b), j = data.block_j(b);
  Matrix w = 2.0 * ztz;
  subtract_quad(m.a_global[b], m.ginv_global, 2.0, w);
  subtract_quad(m.a_country[b], m.ginv_country[i], 1.0, w);
  subtract_quad(m.a_industry[b], m.ginv_industry[j], 1.0, w);
  return w;
}

// Z^T M_{(C, C_i, C_j)} Z for block b. Redundant directions in the stacked
// factor space are dropped through a pseudo-inverse; returns true if that
// happened.
bool step2_weighted_gram(const Matrix& ztz, const FactorMoments& m, const FactorEstimates& f,
                         const PanelDataset& data, int b, Matrix& out) {
  const int i = data.block_i(b), j = data.block_j(b);
  const auto kg = f.global.cols(), kc = f.country[i].cols(), ki = f.industry[j].cols();
  const auto k = kg + kc + ki;
  if (k == 0) {
    out = ztz;
    return false;
  }
  Matrix hh(k, k);
  hh.topLeftCorner(kg, kg) = m.gram_global;
  hh.block(kg, kg, kc, kc) = m.gram_country[i];
  hh.bottomRightCorner(ki, ki) = m.gram_industry[j];
  hh.block(0, kg, kg, kc) = m.global_country[i];
  hh.block(0, kg + kc, kg, ki) = m.global_industry[j];
  hh.block(kg, kg + kc, kc, ki) = m.country_industry[i].middleCols(m.industry_offset[j], ki);
  hh.triangularView<Eigen::StrictlyLower>() = hh.transpose();

  Matrix a(k, data.d + 1);
  if (kg) a.topRows(kg) = m.a_global[b];
  if (kc) a.middleRows(kg, kc) = m.a_country[b];
  if (ki) a.bottomRows(ki) = m.a_industry[b];

  Eigen::LLT<Matrix> llt(hh);
  bool well_posed = llt.info() == Eigen::Success;
  if (well_posed) {
    const Vector diag = llt.matrixLLT().diagonal();
    const double lo = diag.minCoeff(), hi = diag.maxCoeff();
    well_posed = lo > 0.0 && lo * lo > 1e-10 * hi * hi;
  }
  if (well_posed) {
    out = ztz - a.transpose() * llt.solve(a);
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(hh);
  const Vector& lam = es.eigenvalues();
  const double cut = 1e-10 * lam.maxCoeff();
  Matrix pinv = Matrix::Zero(k, k);
  for (Eigen::Index s = 0; s < k; ++s) {
    if (lam(s) > cut) pinv += es.eigenvectors().col(s) * es.eigenvectors().col(s).transpose() / lam(s);
  }
  out = ztz - a.transpose() * pinv * a;
  return true;
}

Vector solve_block(const Matrix& w, int d, int i, int j) {
  const Matrix gram = 0.5 * (w.topLeftCorner(d, d) + w.topLeftCorner(d, d).transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(d - 1);
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) {
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    throw SingularBlock(i, j, cond);
  }
  return gram.ldlt().solve(w.topRightCorner(d, 1));
}

CoefficientEstimates step1_from_moments(const PanelDataset& data, const std::vector<Matrix>& ztz,
                                        const FactorMoments& m, int workers,
                                        double* q = nullptr) {
  CoefficientEstimates out{Matrix(data.d, data.n_blocks())};
  std::vector<double> terms(data.n_blocks(), 0.0);
  parallel_for(static_cast<std::size_t>(data.n_blocks()), workers, [&](std::size_t k) {
    const int b = static_cast<int>(k);
    const Matrix w = step1_weighted_gram(ztz[k], m, data, b);
    out.beta.col(b) = solve_block(w, data.d, data.block_i(b), data.block_j(b));
    if (q) {
      Vector v(data.d + 1);
      v.head(data.d) = -out.beta.col(b);
      v(data.d) = 1.0;
      terms[k] = v.dot(w * v);
    }
  });
  if (q) {
    double total = 0.0;
    for (double t : terms) total += t;
    *q = total / (static_cast<double>(data.n_blocks()) * data.T);
  }
  return out;
}

CoefficientEstimates step2_from_moments(const PanelDataset& data, const std::vector<Matrix>& ztz,
                                        const FactorMoments& m, const FactorEstimates& f,
                                        int workers, std::vector<std::string>* warnings) {
  CoefficientEstimates out{Matrix(data.d, data.n_blocks())};
  std::vector<char> dropped(data.n_blocks(), 0);
  parallel_for(static_cast<std::size_t>(data.n_blocks()), workers, [&](std::size_t k) {
    const int b = static_cast<int>(k);
    Matrix w;
    dropped[k] = step2_weighted_gram(ztz[k], m, f, data, b, w) ? 1 : 0;
    out.beta.col(b) = solve_block(w, data.d, data.block_i(b), data.block_j(b));
  });
  if (warnings) {
    for (int b = 0; b < data.n_blocks(); ++b) {
      if (dropped[b]) {
        warnings->push_back("rank-deficient joint factor space at (i=" +
                            data.i_labels[data.block_i(b)] + ", j=" +
                            data.j_labels[data.block_j(b)] + "); redundant directions dropped");
      }
    }
  }
  return out;
}

double objective_from_moments(const PanelDataset& data, const std::vector<Matrix>& ztz,
                              const FactorMoments& m, const CoefficientEstimates& beta) {
  double total = 0.0;
  Vector w(data.d + 1);
  for (int b = 0; b < data.n_blocks(); ++b) {
    w.head(data.d) = -beta.beta.col(b);
    w(data.d) = 1.0;
    total += w.dot(step1_weighted_gram(ztz[b], m, data, b) * w);
  }
  return total / (static_cast<double>(data.n_blocks()) * data.T);
}

}  // namespace

void validate_fit_options(const FitOptions& o) {
  if (!(o.tol > 0.0)) throw ValidationError("tol must be positive");
  if (o.max_iter < 1) throw ValidationError("max_iter must be at least 1");
  if (o.workers < 1) throw ValidationError("workers must be at least 1");
  if (o.keep_eigenvalues < 0) throw ValidationError("keep_eigenvalues must be non-negative");
}

Matrix residuals(const PanelDataset& data, const CoefficientEstimates& beta) {
  Matrix r(data.T, data.n_blocks());
  for (int b = 0; b < data.n_blocks(); ++b) {
    r.col(b) = data.y_block(b) - data.x_block(b) * beta.beta.col(b);
  }
  return r;
}

Matrix c_dagger_apply(const FactorEstimates& f, int i, int j, const Matrix& m) {
  const auto t = m.rows();
  auto proj = [&](const Matrix& c) -> Matrix {
    if (c.cols() == 0) return Matrix::Zero(t, m.cols());
    if (c.rows() != t) throw DimensionError("c_dagger_apply: factor block rows differ from T");
    return c * (gram_inverse(c, "c_dagger_apply") * (c.transpose() * m));
  };
  if (i < 0 || i >= static_cast<int>(f.country.size()) || j < 0 ||
      j >= static_cast<int>(f.industry.size())) {
    throw DimensionError("c_dagger_apply: block index out of range");
  }
  return 2.0 * m - 2.0 * proj(f.global) - proj(f.country[i]) - proj(f.industry[j]);
}

CoefficientEstimates step1_beta(const PanelDataset& data, const FactorEstimates& factors,
                                int workers) {
  const auto ztz = block_cross_products(data, workers);
  return step1_from_moments(data, ztz, compute_moments(data, factors, workers), workers);
}

CoefficientEstimates step2_beta(const PanelDataset& data, const FactorEstimates& factors,
                                int workers, std::vector<std::string>* warnings) {
  const auto ztz = block_cross_products(data, workers);
  return step2_from_moments(data, ztz, compute_moments(data, factors, workers), factors, workers,
                            warnings);
}

Matrix step2_weights(const PanelDataset& data, const FactorEstimates& f, int b) {
  check_factor_shapes(data, f);
  const int i = data.block_i(b), j = data.block_j(b);
  const auto kg = f.global.cols(), kc = f.country[i].cols(), ki = f.industry[j].cols();
  const auto k = kg + kc + ki;
  Matrix mx = data.x_block(b);
  if (k > 0) {
    Matrix h(data.T, k);
    if (kg) h.leftCols(kg) = f.global;
    if (kc) h.middleCols(kg, kc) = f.country[i];
    if (ki) h.rightCols(ki) = f.industry[j];
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.transpose() * h);
    const Vector& lam = es.eigenvalues();
    const double cut = 1e-10 * lam.maxCoeff();
    Matrix basis(data.T, 0);
    for (Eigen::Index s = 0; s < k; ++s) {
      if (lam(s) > cut) {
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.rightCols(1) = h * es.eigenvectors().col(s) / std::sqrt(lam(s));
      }
    }
    mx -= basis * (basis.transpose() * mx);
  }
  const Matrix gram = 0.5 * (mx.transpose() * mx + (mx.transpose() * mx).transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(data.d - 1);
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) {
    throw SingularBlock(i, j, lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  }
  return gram.ldlt().solve(mx.transpose());
}

double objective(const PanelDataset& data, const CoefficientEstimates& beta,
                 const FactorEstimates& factors) {
  const auto ztz = block_cross_products(data, 1);
  return objective_from_moments(data, ztz, compute_moments(data, factors, 1), beta);
}

GlobalFactorUpdate update_global_factors(const PanelDataset& data,
                                         const CoefficientEstimates& beta, int count,
                                         int n_values) {
  if (count < 0) throw DimensionError("global factor count must be non-negative");
  GlobalFactorUpdate out;
  const int nv = std::min(std::max(count, n_values), data.T);
  if (count == 0 && nv == 0) {
    out.factors = Matrix(data.T, 0);
    out.eigvals = Vector(0);
    return out;
  }
  const Matrix r = residuals(data, beta);
  const double scale = static_cast<double>(data.n_blocks()) * data.T;
  EigenPairs ep = gram_eig_desc(r, count, scale, nv);
  out.factors = std::move(ep.vectors);
  out.eigvals = std::move(ep.values);
  return out;
}

LocalFactorUpdate update_local_factors(const PanelDataset& data,
                                       const CoefficientEstimates& beta,
                                       const Matrix& global_factors, Axis axis,
                                       const std::vector<int>& counts, int n_values,
                                       int workers) {
  const int units = axis == Axis::Country ? data.L : data.N;
  if (static_cast<int>(counts.size()) != units) {
    throw DimensionError("update_local_factors: counts length does not match the axis");
  }
  const int T = data.T;
  const auto lg = global_factors.cols();
  const auto dim = T - lg;  // dimension of the complement of the global space
  const double root_t = std::sqrt(static_cast<double>(T));

  // M_C applied to the residuals. Leading eigenvectors of the sandwiched
  // covariance then lie in range(M_C) up to rounding, which is removed below.
  const Matrix basis = lg > 0 ? orthonormalize_columns(global_factors) : Matrix(T, 0);
  Matrix rc = residuals(data, beta);
  if (lg > 0) rc -= project_scaled(basis, rc);
  Eigen::HouseholderQR<Matrix> qr;
  if (lg > 0) qr.compute(basis);

  LocalFactorUpdate out;
  out.blocks.resize(units);
  out.eigvals.resize(units);
  parallel_for(static_cast<std::size_t>(units), workers, [&](std::size_t u) {
    const int k = counts[u];
    if (k < 0) throw DimensionError("local factor counts must be non-negative");
    if (k > dim) throw DimensionError("local factor count exceeds available dimension");
    const int nv = static_cast<int>(std::min<Eigen::Index>(std::max(k, n_values), dim));
    if (nv == 0) {
      out.blocks[u] = Matrix(T, 0);
      out.eigvals[u] = Vector(0);
      return;
    }
    Matrix a;
    if (axis == Axis::Country) {
      const int i = static_cast<int>(u);
      a = rc.middleCols(data.first_block(i), data.n_in(i));
    } else {
      const auto& blocks = data.blocks_of_j(static_cast<int>(u));
      a.resize(T, static_cast<Eigen::Index>(blocks.size()));
      for (std::size_t c = 0; c < blocks.size(); ++c) a.col(c) = rc.col(blocks[c]);
    }
    if (a.cols() == 0) {
      out.blocks[u] = Matrix::Zero(T, 0);
      out.eigvals[u] = Vector::Zero(nv);
      if (k > 0) throw DimensionError("local factors requested for a unit with no observations");
      return;
    }
    const double scale = static_cast<double>(a.cols()) * T;
    EigenPairs ep = gram_eig_desc(a, k, scale, nv);
    out.eigvals[u] = std::move(ep.values);
    if (k == 0) {
      out.blocks[u] = Matrix(T, 0);
      return;
    }
    Matrix v = std::move(ep.vectors);
    if (lg > 0) {
      v -= project_scaled(basis, v);
      // A vector from the null space of the sandwiched covariance may point
      // into col(C); redo such a unit in coordinates of the complement.
      if (v.colwise().squaredNorm().minCoeff() < 0.25 * T) {
        const Matrix ac = (qr.householderQ().adjoint() * a).bottomRows(dim);
        Matrix full = Matrix::Zero(T, k);
        full.bottomRows(dim) = gram_eig_desc(ac, k, scale).vectors;
        v = qr.householderQ() * full;
      }
      for (int s = 0; s < k; ++s) {
        for (int p = 0; p < s; ++p) v.col(s) -= (v.col(p).dot(v.col(s)) / T) * v.col(p);
        v.col(s) *= root_t / v.col(s).norm();
      }
      canonicalize_signs(v);
    }
    out.blocks[u] = std::move(v);
  });
  return out;
}

FactorEstimates initial_factors(const PanelDataset& data, const FactorCounts& counts,
                                std::uint64_t seed) {
  Rng rng = make_rng(seed, {tag(Stream::FitInit)});
  const int T = data.T;
  FactorEstimates f;
  if (counts.global > 0) {
    Matrix g(T, counts.global);
    fill_normal(rng, g);
    f.global = orthonormalize_columns(g);
  } else {
    f.global = Matrix(T, 0);
  }
  auto local = [&](int k) -> Matrix {
    if (k == 0) return Matrix(T, 0);
    Matrix g(T, k);
    fill_normal(rng, g);
    g -= project_scaled(f.global, g);
    return orthonormalize_columns(g);
  };
  for (int i = 0; i < data.L; ++i) f.country.push_back(local(counts.country[i]));
  for (int j = 0; j < data.N; ++j) f.industry.push_back(local(counts.industry[j]));
  f.eig_country.resize(data.L);
  f.eig_industry.resize(data.N);
  return f;
}

FitResult fit(const PanelDataset& data, const FactorCounts& counts, const FitOptions& options) {
  require_valid(data);
  validate_fit_options(options);
  const auto rep = validate_counts(counts, data, std::numeric_limits<int>::max());
  if (!rep.ok()) throw ValidationError("invalid factor counts: " + rep.issues.front());

  const int workers = options.workers;
  const int keep = options.keep_eigenvalues;
  const auto ztz = block_cross_products(data, workers);
  const double norm = std::sqrt(static_cast<double>(data.n_blocks()));

  FitResult res;
  res.factors = initial_factors(data, counts, options.seed);
  FactorMoments moments = compute_moments(data, res.factors, workers);

  auto refresh_locals = [&](const CoefficientEstimates& b, FactorEstimates& f) {
    auto c = update_local_factors(data, b, f.global, Axis::Country, counts.country, keep, workers);
    auto n = update_local_factors(data, b, f.global, Axis::Industry, counts.industry, keep,
                                  workers);
    f.country = std::move(c.blocks);
    f.eig_country = std::move(c.eigvals);
    f.industry = std::move(n.blocks);
    f.eig_industry = std::move(n.eigvals);
  };

  Matrix previous;
  for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
    double q_current = 0.0;
    res.beta_step1 = step1_from_moments(data, ztz, moments, workers, &q_current);
    const CoefficientEstimates& b = res.beta_step1;

    FactorEstimates next;
    auto g = update_global_factors(data, b, counts.global, keep);
    next.global = std::move(g.factors);
    next.eig_global = std::move(g.eigvals);
    refresh_locals(b, next);
    FactorMoments next_moments = compute_moments(data, next, workers);
    double q = objective_from_moments(data, ztz, next_moments, b);

    // The global block is chosen before the locals, so the joint update can
    // raise Q. Refreshing only the locals never does.
    if (q > q_current) {
      FactorEstimates held;
      held.global = res.factors.global;
      held.eig_global = next.eig_global;
      refresh_locals(b, held);
      FactorMoments held_moments = compute_moments(data, held, workers);
      const double q_held = objective_from_moments(data, ztz, held_moments, b);
      if (q_held < q) {
        next = std::move(held);
        next_moments = std::move(held_moments);
        q = q_held;
        ++res.held_global_sweeps;
      }
    }
    res.factors = std::move(next);
    moments = std::move(next_moments);

    res.warnings.clear();
    res.beta_final = step2_from_moments(data, ztz, moments, res.factors, workers, &res.warnings);
    res.objective_trace.push_back(q);
    res.iterations = sweep;

    if (sweep > 1) {
      const double delta = (res.beta_final.beta - previous).norm() / norm;
      res.delta_trace.push_back(delta);
      if (delta < options.tol) {
        res.converged = true;
        break;
      }
    }
    previous = res.beta_final.beta;
  }
  return res;
}

}  // namespace hpanel
