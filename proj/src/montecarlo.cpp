#include "hpanel/montecarlo.hpp"

#include <cmath>

#include "hpanel/errors.hpp"
#include "hpanel/parallel.hpp"

namespace hpanel {

void validate_mc_config(const McConfig& c) {
  validate_config(c.dgp);
  validate_fit_options(c.fit);
  validate_selection_options(c.selection);
  if (c.replications < 1) throw ValidationError("R must be at least 1");
  if (c.workers < 1) throw ValidationError("workers must be at least 1");
  if (c.bootstrap_replications < 0) throw ValidationError("bootstrap replications must be >= 0");
  if (c.bootstrap_replications > 0) validate_bootstrap_options(c.bootstrap, c.dgp.T);
  if (!c.with_true_counts && !c.with_selection) {
    throw ValidationError("enable at least one of true-count and selected-count fits");
  }
}

namespace {

double squared(double x) { return x * x; }

void score(const SimulatedPanel& sim, const FitResult& r, const FactorCounts& counts,
           ReplicationRecord& rec) {
  const GroundTruth& truth = sim.truth;
  rec.present = true;
  rec.selected = counts;
  rec.truth = truth.counts;
  rec.sq_err_beta = squared(rmse_beta({r.beta_final}, {truth.beta}));
  rec.sq_err_global = squared(projector_distance(r.factors.global, truth.F));
  rec.sq_err_country = squared(rmse_factor_space({r.factors.country}, {truth.F_country}));
  rec.sq_err_industry = squared(rmse_factor_space({r.factors.industry}, {truth.F_industry}));
}

void cover(const SimulatedPanel& sim, const FitResult& r, const BootstrapOptions& opts,
           std::uint64_t seed, ReplicationRecord& rec) {
  BootstrapOptions o = opts;
  o.seed = seed;
  o.workers = 1;
  const BootstrapResult boot = bootstrap_beta(sim.data, r, o);
  const Matrix& beta = sim.truth.beta.beta;
  for (Eigen::Index b = 0; b < beta.cols(); ++b) {
    for (Eigen::Index s = 0; s < beta.rows(); ++s) {
      const bool hit = boot.lower(s, b) <= beta(s, b) && beta(s, b) <= boot.upper(s, b);
      rec.coverage_hits += hit ? 1 : 0;
      rec.coverage_total += 1;
    }
  }
}

}  // namespace

McReplication run_replication(const McConfig& config, int k) {
  const auto rep = static_cast<std::uint64_t>(k);
  DgpConfig dgp = config.dgp;
  dgp.seed = derive_seed(config.seed, {tag(Stream::Replication), rep});
  const SimulatedPanel sim = simulate(dgp);

  FitOptions fo = config.fit;
  fo.seed = derive_seed(config.seed, {tag(Stream::FitInit), rep});
  fo.workers = 1;
  const std::uint64_t boot_seed = derive_seed(config.seed, {tag(Stream::Bootstrap), rep});
  const bool boot = k < config.bootstrap_replications;

  McReplication out;
  if (config.with_true_counts) {
    const FitResult r = fit(sim.data, sim.truth.counts, fo);
    score(sim, r, sim.truth.counts, out.star);
    if (boot && !config.with_selection) cover(sim, r, config.bootstrap, boot_seed, out.star);
  }
  if (config.with_selection) {
    const FactorCounts counts = select_all(sim.data, config.selection, fo);
    const FitResult r = fit(sim.data, counts, fo);
    score(sim, r, counts, out.estimated);
    if (boot) cover(sim, r, config.bootstrap, boot_seed, out.estimated);
  }
  return out;
}

McSummary summarize(const std::vector<McReplication>& reps) {
  McSummary s;
  s.replications = static_cast<int>(reps.size());
  double b_star = 0, f_star = 0, fc_star = 0, fi_star = 0, n_star = 0;
  double b_est = 0, f_est = 0, fc_est = 0, fi_est = 0, n_est = 0;
  std::vector<int> sel_g, true_g;
  std::vector<std::vector<int>> sel_c, true_c, sel_i, true_i;
  long hits = 0;
  for (const McReplication& r : reps) {
    if (r.star.present) {
      b_star += r.star.sq_err_beta;
      f_star += r.star.sq_err_global;
      fc_star += r.star.sq_err_country;
      fi_star += r.star.sq_err_industry;
      n_star += 1;
    }
    if (r.estimated.present) {
      const ReplicationRecord& e = r.estimated;
      b_est += e.sq_err_beta;
      f_est += e.sq_err_global;
      fc_est += e.sq_err_country;
      fi_est += e.sq_err_industry;
      n_est += 1;
      sel_g.push_back(e.selected.global);
      true_g.push_back(e.truth.global);
      sel_c.push_back(e.selected.country);
      true_c.push_back(e.truth.country);
      sel_i.push_back(e.selected.industry);
      true_i.push_back(e.truth.industry);
    }
    for (const ReplicationRecord* rec : {&r.star, &r.estimated}) {
      hits += rec->coverage_hits;
      s.coverage_total += rec->coverage_total;
    }
  }
  auto root = [](double sum, double n) { return n > 0 ? std::sqrt(sum / n) : std::nan(""); };
  s.rmse_beta_star = root(b_star, n_star);
  s.rmse_f_star = root(f_star, n_star);
  s.rmse_fc_star = root(fc_star, n_star);
  s.rmse_fi_star = root(fi_star, n_star);
  s.rmse_beta = root(b_est, n_est);
  s.rmse_f = root(f_est, n_est);
  s.rmse_fc = root(fc_est, n_est);
  s.rmse_fi = root(fi_est, n_est);
  s.rate_global = selection_rates(sel_g, true_g);
  s.rate_country = selection_rates(sel_c, true_c);
  s.rate_industry = selection_rates(sel_i, true_i);
  s.coverage = s.coverage_total > 0
                   ? static_cast<double>(hits) / static_cast<double>(s.coverage_total)
                   : std::nan("");
  return s;
}

std::vector<McReplication> run_monte_carlo(const McConfig& config,
                                           const std::function<void(int)>& progress) {
  validate_mc_config(config);
  // Build the shared cross-sectional root once before workers start.
  cached_sqrt_csd(config.dgp.L, config.dgp.N, config.dgp.csd_base);
  std::vector<McReplication> reps(static_cast<std::size_t>(config.replications));
  parallel_for(reps.size(), config.workers, [&](std::size_t k) {
    reps[k] = run_replication(config, static_cast<int>(k));
    if (progress) progress(static_cast<int>(k));
  });
  return reps;
}

}  // namespace hpanel
