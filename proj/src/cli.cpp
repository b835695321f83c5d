#include "hpanel/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hpanel/csv_io.hpp"
#include "hpanel/errors.hpp"
#include "hpanel/montecarlo.hpp"

#ifndef HPANEL_VERSION
#define HPANEL_VERSION "0.0.0"
#endif

namespace hpanel {

const char* software_version() { return HPANEL_VERSION; }

namespace {

using json = nlohmann::ordered_json;

struct CommandSpec {
  const char* name;
  const char* help;
  bool takes_data;
  std::vector<std::string> flags;
};

const std::vector<std::string> kFitFlags = {"tol", "max-iter", "d-max"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out = {"config", "seed", "workers", "out"};
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = {
      {"simulate", "Simulate a panel from the reference design", false,
       join({{"L", "N", "T", "d"}})},
      {"estimate", "Fit coefficients and factors", true,
       join({kFitFlags, {"counts", "auto-counts"}})},
      {"select-factors", "Select global and local factor counts", true, join({kFitFlags})},
      {"bootstrap", "Dependent wild bootstrap intervals", true,
       join({kFitFlags, {"counts", "auto-counts", "B", "bandwidth", "alpha"}})},
      {"jackknife", "Bias-corrected mean-group estimates", true,
       join({kFitFlags, {"counts", "auto-counts", "B", "bandwidth", "alpha", "axis", "index"}})},
      {"reproduce-tables", "Monte Carlo tables for the reference design", false,
       join({kFitFlags, {"L", "N", "T", "d", "R", "B", "bandwidth", "alpha"}})},
  };
  return specs;
}

const CommandSpec& command_spec(const std::string& name) {
  for (const auto& c : commands()) {
    if (name == c.name) return c;
  }
  throw ValidationError("unknown command " + name);
}

// ---- value parsing --------------------------------------------------------

template <class T>
T parse_integer(const std::string& key, const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw ValidationError(key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) {
    throw ValidationError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError(key + ": expected true or false, got '" + s + "'");
}

// ---- output helpers -------------------------------------------------------

struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::string comment_block() const {
    return std::string("# hpanel ") + software_version() + "\n# command: " + command +
           "\n# seed: " + std::to_string(seed) + "\n# config-hash: " + config_hash + "\n";
  }
  json as_json() const {
    return json{{"software", "hpanel"}, {"version", software_version()}, {"command", command},
                {"seed", seed}, {"config_hash", config_hash}};
  }
};

class Outputs {
 public:
  Outputs(std::string dir, Provenance prov) : dir_(std::move(dir)), prov_(std::move(prov)) {
    std::filesystem::create_directories(dir_);
  }

  // Opens a text output file with the provenance block already written.
  std::ofstream text(const std::string& name) {
    std::ofstream f = open(name);
    f << prov_.comment_block();
    return f;
  }

  void write_json(const std::string& name, json body) {
    json doc;
    doc["provenance"] = prov_.as_json();
    for (auto& [k, v] : body.items()) doc[k] = v;
    std::ofstream f = open(name);
    f << doc.dump(2) << '\n';
  }

  const Provenance& provenance() const { return prov_; }
  const std::string& dir() const { return dir_; }

 private:
  std::ofstream open(const std::string& name) {
    const auto path = std::filesystem::path(dir_) / name;
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path.string());
    return f;
  }

  std::string dir_;
  Provenance prov_;
};

// Right-aligned plain-text table.
void write_table(std::ostream& os, const std::vector<std::string>& head,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) width[c] = head[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      os << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << r[c];
    }
    os << '\n';
  };
  line(head);
  for (const auto& r : rows) line(r);
}

std::string r3(double v) { return format_rounded(v, 3); }

std::string coef_name(const PanelDataset& data, int s) {
  return s < static_cast<int>(data.x_names.size()) ? data.x_names[s] : "x" + std::to_string(s + 1);
}

long long time_stamp(const PanelDataset& data, int t) {
  return data.times.empty() ? t + 1 : data.times[t];
}

void write_counts_csv(std::ostream& f, const PanelDataset& data, const FactorCounts& c) {
  f << "axis,unit,count\n";
  f << "global,," << c.global << '\n';
  for (int i = 0; i < data.L; ++i) f << "country," << csv_field(data.i_labels[i]) << ',' << c.country[i] << '\n';
  for (int j = 0; j < data.N; ++j) f << "industry," << csv_field(data.j_labels[j]) << ',' << c.industry[j] << '\n';
}

void write_factor_block(std::ostream& f, const PanelDataset& data, const std::string& block,
                        const std::string& unit, const Matrix& m) {
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    for (int t = 0; t < data.T; ++t) {
      f << block << ',' << csv_field(unit) << ',' << k + 1 << ',' << time_stamp(data, t) << ','
        << format_number(m(t, k)) << '\n';
    }
  }
}

void write_factors_csv(std::ostream& f, const PanelDataset& data, const Matrix& global,
                       const std::vector<Matrix>& country, const std::vector<Matrix>& industry) {
  f << "block,unit,factor,t,value\n";
  write_factor_block(f, data, "global", "", global);
  for (int i = 0; i < data.L; ++i) write_factor_block(f, data, "country", data.i_labels[i], country[i]);
  for (int j = 0; j < data.N; ++j) write_factor_block(f, data, "industry", data.j_labels[j], industry[j]);
}

std::string block_key(const PanelDataset& data, int b) {
  return csv_field(data.i_labels[data.block_i(b)]) + ',' + csv_field(data.j_labels[data.block_j(b)]);
}

// ---- shared steps ---------------------------------------------------------

struct LoadedData {
  PanelDataset data;
  std::string hash;
};

LoadedData load_data(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvError::Kind::Io, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  std::istringstream parse(bytes);
  return {read_panel_csv(parse), fnv1a_hex(bytes)};
}

struct ResolvedCounts {
  FactorCounts counts;
  std::optional<SelectionResult> selection;
};

ResolvedCounts resolve_counts(const PanelDataset& data, const RunConfig& cfg) {
  if (!cfg.counts) {
    throw ValidationError(cfg.command + " needs --counts or --auto-counts");
  }
  const CountsSpec& spec = *cfg.counts;
  ResolvedCounts out;
  if (spec.any_auto()) out.selection = select_all_detailed(data, cfg.selection, cfg.fit);
  const FactorCounts* sel = out.selection ? &out.selection->counts : nullptr;
  out.counts.global = spec.global ? *spec.global : sel->global;
  out.counts.country = spec.country ? std::vector<int>(data.L, *spec.country) : sel->country;
  out.counts.industry = spec.industry ? std::vector<int>(data.N, *spec.industry) : sel->industry;
  return out;
}

// ---- commands -------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, Outputs& outs, std::ostream& out) {
  const SimulatedPanel sim = simulate(cfg.dgp);
  const PanelDataset& data = sim.data;
  const GroundTruth& truth = sim.truth;
  {
    auto f = outs.text("panel.csv");
    write_panel_csv(data, f);
  }
  {
    auto f = outs.text("labels.csv");
    write_label_mapping(data, f);
  }
  {
    auto f = outs.text("truth_beta.csv");
    f << "i,j,coef,value\n";
    for (int b = 0; b < data.n_blocks(); ++b) {
      for (int s = 0; s < data.d; ++s) {
        f << block_key(data, b) << ',' << coef_name(data, s) << ','
          << format_number(truth.beta.beta(s, b)) << '\n';
      }
    }
  }
  {
    auto f = outs.text("truth_counts.csv");
    write_counts_csv(f, data, truth.counts);
  }
  {
    auto f = outs.text("truth_factors.csv");
    write_factors_csv(f, data, truth.F, truth.F_country, truth.F_industry);
  }
  out << "simulated L=" << data.L << " N=" << data.N << " T=" << data.T << " d=" << data.d
      << " into " << outs.dir() << '\n';
  return kExitOk;
}

json fit_json(const FitResult& r) {
  return json{{"iterations", r.iterations},
              {"converged", r.converged},
              {"held_global_sweeps", r.held_global_sweeps},
              {"objective_trace", r.objective_trace},
              {"delta_trace", r.delta_trace},
              {"warnings", r.warnings}};
}

void write_selection(Outputs& outs, const PanelDataset& data, const SelectionResult& sel,
                     const SelectionOptions& opts) {
  {
    auto f = outs.text("eigenvalues.csv");
    f << "axis,unit,rank,value\n";
    auto dump = [&](const std::string& axis, const std::string& unit, const Vector& v) {
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        f << axis << ',' << csv_field(unit) << ',' << k + 1 << ',' << format_number(v(k)) << '\n';
      }
    };
    dump("global", "", sel.eig_global);
    for (int i = 0; i < data.L; ++i) dump("country", data.i_labels[i], sel.eig_country[i]);
    for (int j = 0; j < data.N; ++j) dump("industry", data.j_labels[j], sel.eig_industry[j]);
  }
  json body{{"d_max", opts.d_max},
            {"omega", sel.omega},
            {"global", sel.counts.global},
            {"preliminary_fit", fit_json(sel.preliminary)}};
  outs.write_json("selection.json", body);
}

int cmd_estimate(const RunConfig& cfg, const PanelDataset& data, Outputs& outs, std::ostream& out) {
  const ResolvedCounts rc = resolve_counts(data, cfg);
  if (rc.selection) write_selection(outs, data, *rc.selection, cfg.selection);
  const FitResult r = fit(data, rc.counts, cfg.fit);
  {
    auto f = outs.text("coefficients.csv");
    f << "i,j,coef,step1,final\n";
    for (int b = 0; b < data.n_blocks(); ++b) {
      for (int s = 0; s < data.d; ++s) {
        f << block_key(data, b) << ',' << coef_name(data, s) << ','
          << format_number(r.beta_step1.beta(s, b)) << ',' << format_number(r.beta_final.beta(s, b))
          << '\n';
      }
    }
  }
  {
    auto f = outs.text("factor_counts.csv");
    write_counts_csv(f, data, rc.counts);
  }
  {
    auto f = outs.text("factors.csv");
    write_factors_csv(f, data, r.factors.global, r.factors.country, r.factors.industry);
  }
  outs.write_json("fit.json", fit_json(r));
  {
    auto f = outs.text("coefficients.txt");
    std::vector<std::string> head = {"i", "j"};
    for (int s = 0; s < data.d; ++s) head.push_back(coef_name(data, s));
    std::vector<std::vector<std::string>> rows;
    for (int b = 0; b < data.n_blocks(); ++b) {
      std::vector<std::string> row = {data.i_labels[data.block_i(b)], data.j_labels[data.block_j(b)]};
      for (int s = 0; s < data.d; ++s) row.push_back(r3(r.beta_final.beta(s, b)));
      rows.push_back(std::move(row));
    }
    write_table(f, head, rows);
  }
  out << "fit: " << r.iterations << " sweeps, " << (r.converged ? "converged" : "not converged")
      << ", Q = " << r3(r.objective_trace.empty() ? 0.0 : r.objective_trace.back()) << '\n';
  out << "counts: global " << rc.counts.global << ", country max " << rc.counts.max_country()
      << ", industry max " << rc.counts.max_industry() << '\n';
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
  return kExitOk;
}

int cmd_select(const RunConfig& cfg, const PanelDataset& data, Outputs& outs, std::ostream& out) {
  const SelectionResult sel = select_all_detailed(data, cfg.selection, cfg.fit);
  {
    auto f = outs.text("factor_counts.csv");
    write_counts_csv(f, data, sel.counts);
  }
  write_selection(outs, data, sel, cfg.selection);
  std::vector<std::vector<std::string>> rows = {{"global", "", std::to_string(sel.counts.global)}};
  for (int i = 0; i < data.L; ++i) rows.push_back({"country", data.i_labels[i], std::to_string(sel.counts.country[i])});
  for (int j = 0; j < data.N; ++j) rows.push_back({"industry", data.j_labels[j], std::to_string(sel.counts.industry[j])});
  write_table(out, {"axis", "unit", "count"}, rows);
  return kExitOk;
}

json bootstrap_json(const BootstrapResult& boot, int replications) {
  return json{{"replications", replications}, {"bandwidth", boot.bandwidth}, {"alpha", boot.alpha}};
}

int cmd_bootstrap(const RunConfig& cfg, const PanelDataset& data, Outputs& outs,
                  std::ostream& out) {
  const ResolvedCounts rc = resolve_counts(data, cfg);
  const FitResult r = fit(data, rc.counts, cfg.fit);
  const BootstrapResult boot = bootstrap_beta(data, r, cfg.bootstrap);
  {
    auto f = outs.text("ci.csv");
    f << "i,j,coef,estimate,lower,upper\n";
    for (int b = 0; b < data.n_blocks(); ++b) {
      for (int s = 0; s < data.d; ++s) {
        f << block_key(data, b) << ',' << coef_name(data, s) << ','
          << format_number(r.beta_final.beta(s, b)) << ',' << format_number(boot.lower(s, b)) << ','
          << format_number(boot.upper(s, b)) << '\n';
      }
    }
  }
  std::vector<std::vector<std::string>> rows;
  {
    auto f = outs.text("mean_group_ci.csv");
    f << "axis,unit,coef,estimate,lower,upper\n";
    for (Axis axis : {Axis::Country, Axis::Industry}) {
      const auto mg = mean_group(data, r.beta_final, axis);
      const bool country = axis == Axis::Country;
      for (int u = 0; u < static_cast<int>(mg.size()); ++u) {
        const auto iv = mean_group_interval(data, boot, mg[u], axis, u, cfg.bootstrap.alpha);
        const std::string& label = country ? data.i_labels[u] : data.j_labels[u];
        for (int s = 0; s < data.d; ++s) {
          f << (country ? "country," : "industry,") << csv_field(label) << ',' << coef_name(data, s)
            << ',' << format_number(iv.estimate(s)) << ',' << format_number(iv.lower(s)) << ','
            << format_number(iv.upper(s)) << '\n';
          rows.push_back({country ? "country" : "industry", label, coef_name(data, s),
                          r3(iv.estimate(s)), r3(iv.lower(s)), r3(iv.upper(s))});
        }
      }
    }
  }
  outs.write_json("bootstrap.json", bootstrap_json(boot, cfg.bootstrap.replications));
  write_table(out, {"axis", "unit", "coef", "estimate", "lower", "upper"}, rows);
  return kExitOk;
}

int cmd_jackknife(const RunConfig& cfg, const PanelDataset& data, Outputs& outs,
                  std::ostream& out) {
  const ResolvedCounts rc = resolve_counts(data, cfg);
  std::vector<Axis> axes;
  if (cfg.axis == "country" || cfg.axis == "both") axes.push_back(Axis::Country);
  if (cfg.axis == "industry" || cfg.axis == "both") axes.push_back(Axis::Industry);

  std::vector<std::pair<Axis, int>> targets;
  for (Axis axis : axes) {
    const auto& labels = axis == Axis::Country ? data.i_labels : data.j_labels;
    if (cfg.index.empty()) {
      for (int u = 0; u < static_cast<int>(labels.size()); ++u) targets.emplace_back(axis, u);
    } else {
      const auto it = std::find(labels.begin(), labels.end(), cfg.index);
      if (it == labels.end()) throw ValidationError("index: no unit labelled '" + cfg.index + "'");
      targets.emplace_back(axis, static_cast<int>(it - labels.begin()));
    }
  }

  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap.replications > 0) {
    boot = bootstrap_beta(data, fit(data, rc.counts, cfg.fit), cfg.bootstrap);
  }
  const MeanGroupEstimator est = fitted_mean_group(cfg.fit);
  auto f = outs.text("mean_group_bc.csv");
  f << "axis,unit,coef,uncorrected,split_average,corrected,lower,upper\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& [axis, u] : targets) {
    const JackknifeResult jk = jackknife_detailed(data, rc.counts, axis, u, est);
    const bool country = axis == Axis::Country;
    const std::string& label = country ? data.i_labels[u] : data.j_labels[u];
    Vector lo = Vector::Constant(data.d, std::nan("")), hi = lo;
    if (boot) {
      const auto iv = mean_group_interval(data, *boot, jk.corrected, axis, u, cfg.bootstrap.alpha);
      lo = iv.lower;
      hi = iv.upper;
    }
    for (int s = 0; s < data.d; ++s) {
      f << (country ? "country," : "industry,") << csv_field(label) << ',' << coef_name(data, s) << ','
        << format_number(jk.full(s)) << ',' << format_number(jk.split_avg(s)) << ','
        << format_number(jk.corrected(s)) << ',' << format_number(lo(s)) << ','
        << format_number(hi(s)) << '\n';
      rows.push_back({country ? "country" : "industry", label, coef_name(data, s), r3(jk.full(s)),
                      r3(jk.corrected(s)), boot ? r3(lo(s)) : "", boot ? r3(hi(s)) : ""});
    }
  }
  if (boot) outs.write_json("bootstrap.json", bootstrap_json(*boot, cfg.bootstrap.replications));
  write_table(out, {"axis", "unit", "coef", "uncorrected", "corrected", "lower", "upper"}, rows);
  return kExitOk;
}

int cmd_reproduce(const RunConfig& cfg, Outputs& outs, std::ostream& out, std::ostream& err) {
  McConfig mc;
  mc.dgp = cfg.dgp;
  mc.replications = cfg.replications;
  mc.seed = cfg.seed;
  mc.fit = cfg.fit;
  mc.selection = cfg.selection;
  mc.workers = cfg.workers;
  const bool with_cr = cfg.effective.count("B") && cfg.bootstrap.replications > 0;
  if (with_cr) {
    mc.bootstrap = cfg.bootstrap;
    mc.bootstrap_replications = cfg.replications;
  }
  std::mutex mu;
  int done = 0;
  const auto reps = run_monte_carlo(mc, [&](int) {
    std::lock_guard<std::mutex> lock(mu);
    ++done;
    err << "\rreplications " << done << "/" << mc.replications << std::flush;
  });
  err << '\n';
  const McSummary s = summarize(reps);
  const std::string dims = std::to_string(mc.dgp.L) + ',' + std::to_string(mc.dgp.N) + ',' +
                           std::to_string(mc.dgp.T);
  auto rates = [](const SelectionRates& r) {
    return std::vector<double>{r.correct, r.under, r.over};
  };
  {
    auto f = outs.text("table1.csv");
    f << "L,N,T,rate_global,rate_global_under,rate_global_over,rate_country,rate_country_under,"
         "rate_country_over,rate_industry,rate_industry_under,rate_industry_over\n"
      << dims;
    for (const auto* r : {&s.rate_global, &s.rate_country, &s.rate_industry}) {
      for (double v : rates(*r)) f << ',' << format_number(v);
    }
    f << '\n';
  }
  const std::vector<double> t2 = {s.rmse_beta_star, s.rmse_f_star, s.rmse_fc_star, s.rmse_fi_star,
                                  s.rmse_beta,      s.rmse_f,      s.rmse_fc,      s.rmse_fi};
  {
    auto f = outs.text("table2.csv");
    f << "L,N,T,rmse_beta_star,rmse_f_star,rmse_fc_star,rmse_fi_star,rmse_beta,rmse_f,rmse_fc,"
         "rmse_fi\n"
      << dims;
    for (double v : t2) f << ',' << format_number(v);
    f << '\n';
  }
  if (with_cr) {
    auto f = outs.text("table3.csv");
    f << "L,N,T,B,coverage,elements\n"
      << dims << ',' << cfg.bootstrap.replications << ',' << format_number(s.coverage) << ','
      << s.coverage_total << '\n';
  }
  {
    auto f = outs.text("series.csv");
    f << "rep,sq_err_beta_star,sq_err_global_star,sq_err_country_star,sq_err_industry_star,"
         "sq_err_beta,sq_err_global,sq_err_country,sq_err_industry,selected_global,true_global,"
         "rate_country,rate_industry,coverage_hits,coverage_total\n";
    for (std::size_t k = 0; k < reps.size(); ++k) {
      const McReplication& r = reps[k];
      const ReplicationRecord& e = r.estimated;
      const auto rc = selection_rates(std::vector<std::vector<int>>{e.selected.country},
                                      std::vector<std::vector<int>>{e.truth.country});
      const auto ri = selection_rates(std::vector<std::vector<int>>{e.selected.industry},
                                      std::vector<std::vector<int>>{e.truth.industry});
      f << k + 1;
      for (double v : {r.star.sq_err_beta, r.star.sq_err_global, r.star.sq_err_country,
                       r.star.sq_err_industry, e.sq_err_beta, e.sq_err_global, e.sq_err_country,
                       e.sq_err_industry}) {
        f << ',' << format_number(v);
      }
      f << ',' << e.selected.global << ',' << e.truth.global << ',' << format_number(rc.correct)
        << ',' << format_number(ri.correct) << ',' << (r.star.coverage_hits + e.coverage_hits) << ','
        << (r.star.coverage_total + e.coverage_total) << '\n';
    }
  }
  std::ostringstream human;
  human << "Selection of factor numbers (R=" << mc.replications << ")\n";
  {
    std::vector<std::string> row = {std::to_string(mc.dgp.L), std::to_string(mc.dgp.N),
                                    std::to_string(mc.dgp.T)};
    for (const auto* r : {&s.rate_global, &s.rate_country, &s.rate_industry}) {
      for (double v : rates(*r)) row.push_back(r3(v));
    }
    write_table(human, {"L", "N", "T", "Rate_l", "Rate_l-", "Rate_l+", "Rate_c", "Rate_c-", "Rate_c+",
                        "Rate_i", "Rate_i-", "Rate_i+"},
                {row});
  }
  human << "\nRoot mean square errors\n";
  {
    std::vector<std::string> row = {std::to_string(mc.dgp.L), std::to_string(mc.dgp.N),
                                    std::to_string(mc.dgp.T)};
    for (double v : t2) row.push_back(r3(v));
    write_table(human, {"L", "N", "T", "RMSE_b*", "RMSE_F*", "RMSE_Fc*", "RMSE_Fi*", "RMSE_b",
                        "RMSE_F", "RMSE_Fc", "RMSE_Fi"},
                {row});
  }
  if (with_cr) {
    human << "\nCoverage rates (nominal " << r3(1.0 - cfg.bootstrap.alpha) << ")\n";
    write_table(human, {"L", "N", "T", "CR"},
                {{std::to_string(mc.dgp.L), std::to_string(mc.dgp.N), std::to_string(mc.dgp.T),
                  r3(s.coverage)}});
  }
  {
    auto f = outs.text("tables.txt");
    f << human.str();
  }
  json body{{"L", mc.dgp.L},
            {"N", mc.dgp.N},
            {"T", mc.dgp.T},
            {"R", mc.replications},
            {"rate_global", rates(s.rate_global)},
            {"rate_country", rates(s.rate_country)},
            {"rate_industry", rates(s.rate_industry)},
            {"rmse", t2}};
  if (with_cr) body["coverage"] = s.coverage;
  outs.write_json("summary.json", body);
  out << human.str();
  return kExitOk;
}

}  // namespace

CountsSpec parse_counts_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ',')) parts.push_back(p);
  if (parts.size() != 3 || text.back() == ',') {
    throw ValidationError("counts: expected global,country,industry (e.g. 2,auto,auto), got '" +
                          text + "'");
  }
  auto one = [](const std::string& s) -> std::optional<int> {
    if (s == "auto") return std::nullopt;
    const int v = parse_integer<int>("counts", s);
    if (v < 0) throw ValidationError("counts: values must be non-negative");
    return v;
  };
  return {one(parts[0]), one(parts[1]), one(parts[2])};
}

RunConfig make_run_config(const std::string& command, const ConfigMap& values) {
  const CommandSpec& spec = command_spec(command);
  std::set<std::string> allowed(spec.flags.begin(), spec.flags.end());
  if (spec.takes_data) allowed.insert("data");
  for (const auto& [k, v] : values) {
    if (!allowed.count(k)) throw ValidationError("option '" + k + "' does not apply to " + command);
  }
  RunConfig c;
  c.command = command;
  c.effective = values;
  auto has = [&](const char* k) { return values.count(k) > 0; };
  auto get = [&](const char* k) { return values.at(k); };
  auto int_of = [&](const char* k, int fallback) {
    return has(k) ? parse_integer<int>(k, get(k)) : fallback;
  };

  if (has("seed")) c.seed = parse_integer<std::uint64_t>("seed", get("seed"));
  c.workers = int_of("workers", 1);
  if (c.workers < 1) throw ValidationError("workers must be at least 1");
  if (has("out")) c.out = get("out");
  if (has("data")) c.data = get("data");
  if (spec.takes_data && c.data.empty()) throw ValidationError(command + " needs an input data file");

  c.dgp.L = int_of("L", c.dgp.L);
  c.dgp.N = int_of("N", c.dgp.N);
  c.dgp.T = int_of("T", c.dgp.T);
  c.dgp.d = int_of("d", c.dgp.d);
  c.dgp.seed = c.seed;
  c.replications = int_of("R", c.replications);
  if (c.replications < 1) throw ValidationError("R must be at least 1");

  if (has("tol")) c.fit.tol = parse_real("tol", get("tol"));
  c.fit.max_iter = int_of("max-iter", c.fit.max_iter);
  c.fit.seed = c.seed;
  c.fit.workers = c.workers;
  validate_fit_options(c.fit);
  c.selection.d_max = int_of("d-max", c.selection.d_max);
  validate_selection_options(c.selection);

  c.bootstrap.replications = int_of("B", c.bootstrap.replications);
  if (has("bandwidth")) c.bootstrap.bandwidth = parse_integer<int>("bandwidth", get("bandwidth"));
  if (has("alpha")) c.bootstrap.alpha = parse_real("alpha", get("alpha"));
  c.bootstrap.seed = derive_seed(c.seed, {tag(Stream::Bootstrap)});
  c.bootstrap.workers = c.workers;
  if (c.bootstrap.replications < 0) throw ValidationError("B must be non-negative");
  if (!(c.bootstrap.alpha > 0.0 && c.bootstrap.alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }

  const bool auto_counts = has("auto-counts") && parse_bool("auto-counts", get("auto-counts"));
  if (auto_counts && has("counts")) {
    throw ValidationError("use either --counts or --auto-counts, not both");
  }
  if (has("counts")) c.counts = parse_counts_spec(get("counts"));
  if (auto_counts) c.counts = CountsSpec{};

  if (has("axis")) c.axis = get("axis");
  if (c.axis != "country" && c.axis != "industry" && c.axis != "both") {
    throw ValidationError("axis must be country, industry or both");
  }
  if (has("index")) c.index = get("index");
  if (!c.index.empty() && c.axis == "both") {
    throw ValidationError("index needs --axis country or --axis industry");
  }
  if (command == "simulate" || command == "reproduce-tables") validate_config(c.dgp);
  return c;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heterogeneous-coefficient panels with global and local factor structures",
               "hpanel"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(software_version()));

  // Owned storage for every flag value; map nodes never move.
  std::map<std::string, std::map<std::string, std::string>> storage;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& spec : commands()) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    auto& store = storage[spec.name];
    auto& opts = options[spec.name];
    if (spec.takes_data) {
      opts.emplace_back("data", sub->add_option("data", store["data"], "Input panel CSV (i,j,t,y,x...)"));
    }
    for (const auto& flag : spec.flags) {
      CLI::Option* o = nullptr;
      if (flag == "auto-counts") {
        o = sub->add_flag("--auto-counts", "Select every factor count before fitting");
      } else {
        o = sub->add_option("--" + flag, store[flag]);
      }
      opts.emplace_back(flag, o);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << software_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  ConfigMap given;
  std::string config_path;
  for (const auto& [flag, opt] : options[command]) {
    if (opt->count() == 0) continue;
    if (flag == "auto-counts") given[flag] = "true";
    else if (flag == "config") config_path = storage[command][flag];
    else given[flag] = storage[command][flag];
  }

  try {
    const ConfigMap merged =
        config_path.empty() ? given : merge_config(load_config(config_path), given);
    const RunConfig cfg = make_run_config(command, merged);

    std::optional<LoadedData> loaded;
    if (!cfg.data.empty()) loaded = load_data(cfg.data);

    // Results never depend on the worker count or destination.
    ConfigMap hashed = merged;
    hashed.erase("workers");
    hashed.erase("out");
    hashed.erase("data");
    std::string canonical = "command=" + command + "\n" + canonical_config(hashed);
    if (loaded) canonical += "data-hash=" + loaded->hash + "\n";
    Outputs outs(cfg.out, Provenance{command, cfg.seed, fnv1a_hex(canonical)});

    if (command == "simulate") return cmd_simulate(cfg, outs, out);
    if (command == "reproduce-tables") return cmd_reproduce(cfg, outs, out, err);
    const PanelDataset& data = loaded->data;
    if (command == "estimate") return cmd_estimate(cfg, data, outs, out);
    if (command == "select-factors") return cmd_select(cfg, data, outs, out);
    if (command == "bootstrap") return cmd_bootstrap(cfg, data, outs, out);
    if (command == "jackknife") return cmd_jackknife(cfg, data, outs, out);
    err << "error: unhandled command " << command << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace hpanel
