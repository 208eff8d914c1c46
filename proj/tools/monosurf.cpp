// monosurf command-line tool: simulate | stage1 | stage2 | report | cv.
//
// Every subcommand takes --config FILE with flat `key = value` lines, where a
// key is a long option name without the dashes. `stage2.iterations = 5000`
// applies to one subcommand only; unprefixed keys apply to every subcommand
// that has the option. Options given on the command line win over the file.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monosurf/cv.hpp"
#include "monosurf/data.hpp"
#include "monosurf/error.hpp"
#include "monosurf/format.hpp"
#include "monosurf/hier.hpp"
#include "monosurf/io.hpp"
#include "monosurf/random.hpp"
#include "monosurf/stage1.hpp"
#include "monosurf/stats.hpp"
#include "monosurf/surfaces.hpp"
#include "monosurf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace monosurf;

namespace {

constexpr int kExitStage1Failures = 3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigEntry {
  std::string scope;  // empty for every subcommand
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<ConfigEntry> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<ConfigEntry> out;
  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line) + ": expected key = value");
    }
    ConfigEntry e;
    e.key = trim(s.substr(0, eq));
    e.value = trim(s.substr(eq + 1));
    e.line = line;
    if (const auto dot = e.key.find('.'); dot != std::string::npos) {
      e.scope = e.key.substr(0, dot);
      e.key = e.key.substr(dot + 1);
    }
    out.push_back(e);
  }
  return out;
}

// Splices config entries in as `--key=value` right after the subcommand name,
// ahead of the user's own arguments.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  auto sub_it = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return a.rfind("-", 0) != 0 && app.get_subcommand_no_throw(a) != nullptr;
  });
  if (sub_it == args.end()) return args;
  CLI::App* sub = app.get_subcommand(*sub_it);

  std::string config;
  for (auto it = sub_it + 1; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) config = *(it + 1);
    if (it->rfind("--config=", 0) == 0) config = it->substr(9);
  }
  if (config.empty()) return args;

  std::vector<std::string> injected;
  for (const auto& e : read_config(config)) {
    const std::string where = config + ":" + std::to_string(e.line);
    if (!e.scope.empty()) {
      if (app.get_subcommand_no_throw(e.scope) == nullptr) throw ConfigError(where + ": unknown subcommand " + e.scope);
      if (e.scope != sub->get_name()) continue;
    }
    if (e.key == "config") throw ConfigError(where + ": config files cannot include other config files");
    if (sub->get_option_no_throw("--" + e.key) != nullptr) {
      injected.push_back("--" + e.key + "=" + e.value);
      continue;
    }
    bool known = false;
    for (const auto* other : app.get_subcommands([](CLI::App*) { return true; }))
      known = known || other->get_option_no_throw("--" + e.key) != nullptr;
    if (!known || !e.scope.empty()) throw ConfigError(where + ": unknown option " + e.key);
  }
  args.insert(sub_it + 1, injected.begin(), injected.end());
  return args;
}

// ---------------------------------------------------------------------------
// Shared option groups.

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c, bool seeded) {
  app->add_option("--config", c.config, "Flat key = value file of option defaults");
  app->add_option("--threads", c.threads, "Worker threads for per-city work")->capture_default_str()->check(
      CLI::PositiveNumber);
  if (seeded) app->add_option("--seed", c.seed, "Top-level seed; sub-seeds are derived per purpose")->capture_default_str();
}

void add_stage1_options(CLI::App* app, Stage1Config& s) {
  app->add_option("--m1", s.m1, "Global ozone order")->capture_default_str()->check(CLI::Range(1, 64));
  app->add_option("--m2", s.m2, "Global temperature order")->capture_default_str()->check(CLI::Range(0, 64));
  app->add_option("--min-m1", s.orders.min_m1, "Floor on local ozone orders")->capture_default_str();
  app->add_option("--min-m2", s.orders.min_m2, "Floor on local temperature orders")->capture_default_str();
  app->add_flag("!--no-local-orders", s.orders.scale_with_range, "Use the global orders in every city");
  app->add_option("--running-window", s.confounders.running_window, "Running-mean window (days)")->capture_default_str();
  app->add_option("--time-df-per-year", s.confounders.time_df_per_year, "Calendar-time spline df per year")
      ->capture_default_str();
  app->add_option("--temp-rm-df", s.confounders.temp_rm_df, "df of the temperature running-mean spline")
      ->capture_default_str();
  app->add_option("--dewpoint-df", s.confounders.dewpoint_df, "df of the dewpoint spline")->capture_default_str();
  app->add_option("--dewpoint-rm-df", s.confounders.dewpoint_rm_df, "df of the dewpoint running-mean spline")
      ->capture_default_str();
}

void add_prior_options(CLI::App* app, Hyperpriors& p) {
  app->add_option("--tau0", p.tau0, "sd of the mu0 prior")->capture_default_str();
  app->add_option("--a-tau", p.a_tau, "Gamma shape of tau")->capture_default_str();
  app->add_option("--b-tau", p.b_tau, "Gamma rate of tau")->capture_default_str();
  app->add_option("--mu-rho", p.mu_rho, "Mean of log rho (rho in km)")->capture_default_str();
  app->add_option("--sigma-rho", p.sigma_rho, "sd of log rho")->capture_default_str();
  app->add_option("--iw-df1", p.iw_df1, "Inverse-Wishart df of S1 (0 selects M1 + 2)")->capture_default_str();
  app->add_option("--iw-df2", p.iw_df2, "Inverse-Wishart df of S2 (0 selects M2 + 2)")->capture_default_str();
  app->add_option("--iw-scale", p.iw_scale, "Inverse-Wishart scale multiplier of the identity")->capture_default_str();
}

void add_chain_options(CLI::App* app, ChainConfig& c) {
  app->add_option("--iterations", c.iterations, "MCMC iterations")->capture_default_str();
  app->add_option("--burn-in", c.burn_in, "Iterations discarded (rho step adapts during them)")->capture_default_str();
  app->add_option("--thin", c.thin, "Keep every n-th post-burn-in draw")->capture_default_str();
  app->add_flag("!--nonspatial", c.spatial, "Independent cities (R = I)");
  app->add_flag("!--no-truncate", c.truncate, "Drop the monotone truncation");
  app->add_flag("!--no-block", c.block_theta, "Coordinate-wise theta* updates only");
  app->add_flag("--repair-covariance", c.repair_covariance, "Floor non-positive-definite V11 eigenvalues");
  app->add_option("--log-rho-step", c.log_rho_step, "Initial random-walk step on log rho")->capture_default_str();
}

std::vector<CityData> load_prepared(const fs::path& dir, int running_window) {
  LoadedCities loaded = load_cities(dir);
  std::vector<CityData> out;
  for (auto& c : loaded.cities) {
    IngestionReport rep;
    out.push_back(prepare_city(c, running_window, &rep));
    if (rep.rows_dropped > 0) {
      std::cerr << c.city_id << ": dropped " << rep.rows_dropped << " incomplete rows\n";
    }
  }
  return out;
}

void write_summary(const Stage1Batch& batch, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "city_id,status,n_days,m1c,m2c,dispersion,deviance,iterations,reason\n";
  for (const auto& f : batch.fits) {
    out << f.city_id << ",ok," << f.n_days << ',' << f.m1c() << ',' << f.m2c() << ',' << format_number(f.dispersion)
        << ',' << format_number(f.deviance) << ',' << f.iterations << ",\n";
  }
  for (const auto& f : batch.failures) {
    std::string reason = f.reason;
    std::replace(reason.begin(), reason.end(), '"', '\'');
    out << f.city_id << ",failed,,,,,,,\"" << reason << "\"\n";
  }
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string out;
  std::string family = "interaction";
  SynthSpec spec;
};

int run_simulate(SimulateArgs& a) {
  a.spec.family = parse_truth_family(a.family);
  a.spec.seed = derive_seed(a.common.seed, "simulate");
  const SynthResult syn = generate_synthetic(a.spec);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_metadata_csv(syn.cities, dir / "metadata.csv");
  for (const auto& c : syn.cities) write_city_csv(c, dir / (c.city_id + ".csv"));
  save_truth(syn.truth, dir / "truth.json");
  std::cout << "wrote " << syn.cities.size() << " cities to " << dir.string() << '\n';
  return 0;
}

struct Stage1Args {
  Common common;
  std::string data;
  std::string out = "stage1.json";
  Stage1Config cfg;
  bool allow_skip = false;
};

int run_stage1(Stage1Args& a) {
  const auto cities = load_prepared(a.data, a.cfg.confounders.running_window);
  const Stage1Batch batch = fit_cities(cities, a.cfg, a.common.threads);
  const fs::path out(a.out);
  ensure_parent(out);
  save_stage1(batch, out);
  write_summary(batch, with_suffix(out, "_summary.csv"));
  std::cout << "fitted " << batch.fits.size() << " of " << cities.size() << " cities\n";
  for (const auto& f : batch.failures) std::cerr << "stage 1 failed for " << f.city_id << ": " << f.reason << '\n';
  if (!batch.failures.empty() && !a.allow_skip) {
    std::cerr << "rerun with --allow-skip to continue without the failed cities\n";
    return kExitStage1Failures;
  }
  return 0;
}

struct Stage2Args {
  Common common;
  std::string stage1 = "stage1.json";
  std::string out = "posterior";
  Hyperpriors priors;
  ChainConfig chain;
};

void write_diagnostics(const PosteriorSample& post, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "parameter,mean,sd,q2.5,q97.5,ess,mcse\n";
  auto row = [&](const std::string& name, const std::vector<double>& x) {
    const Summary s = summarize(x);
    out << name << ',' << format_number(s.mean) << ',' << format_number(s.sd) << ',' << format_number(s.q025) << ','
        << format_number(s.q975) << ',' << format_number(effective_sample_size(x)) << ','
        << format_number(batch_means_se(x)) << '\n';
  };
  std::vector<double> log_rho;
  for (double r : post.rho) log_rho.push_back(std::log(r));
  row("mu0", post.mu0);
  row("tau", post.tau);
  row("log_rho", log_rho);
  row("log_lik", post.log_likelihood);
  out << "rho_acceptance," << format_number(post.rho_acceptance) << ",,,,,\n";
  const auto& k = post.counters;
  const double block = k.block_proposed > 0 ? static_cast<double>(k.block_accepted) / k.block_proposed : 0.0;
  out << "block_acceptance," << format_number(block) << ",,,,,\n";
  out << "mixture_underflow," << k.mixture_underflow << ",,,,,\n";
  out << "iw_jitter," << k.iw_jitter << ",,,,,\n";
}

int run_stage2(Stage2Args& a) {
  const Stage1Batch batch = load_stage1(a.stage1);
  const HierModel model = HierModel::from_stage1(batch, a.chain.repair_covariance);
  a.chain.seed = derive_seed(a.common.seed, "stage2");
  const PosteriorSample post = run_chain(model, a.priors, a.chain);
  const fs::path stem(a.out);
  ensure_parent(stem);
  save_posterior(post, stem);
  write_diagnostics(post, with_suffix(stem, "_diagnostics.csv"));
  std::cout << "kept " << post.n_draws() << " draws for " << post.n_cities() << " cities; rho acceptance "
            << format_number(post.rho_acceptance) << '\n';
  return 0;
}

struct ReportArgs {
  Common common;
  std::string stage1 = "stage1.json";
  std::string posterior = "posterior";
  std::string out = "report";
  int grid = 101;
  SupportRule support;
};

void summary_cells(std::ostream& out, const Summary& s) {
  out << format_number(s.mean) << ',' << format_number(s.sd) << ',' << format_number(s.q025) << ','
      << format_number(s.q975);
}

int run_report(ReportArgs& a) {
  const Stage1Batch batch = load_stage1(a.stage1);
  const PosteriorSample post = load_posterior(a.posterior);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  std::vector<Eigen::Index> idx;
  std::vector<Support> supports;
  std::vector<StratifiedComparison> strat;
  std::vector<ExcessMortality> excess;
  std::map<std::string, std::vector<std::size_t>> regions;
  for (const auto& fit : batch.fits) {
    const Eigen::Index c = post.city_index(fit.city_id);
    idx.push_back(c);
    supports.push_back(Support::of(fit.ozone, fit.temp, a.support));
    const GridSpec grid = GridSpec::over(supports.back().bounds(), a.grid, a.grid);
    write_surface_csv(log_rr_surface(post, c, grid, supports.back()), dir / ("logrr_" + fit.city_id + ".csv"));
    write_surface_csv(interaction_surface(post, c, grid, supports.back()),
                      dir / ("interaction_" + fit.city_id + ".csv"));
    strat.push_back(stratified_ratio(post, c, fit.ozone, fit.temp));
    strat.back().region = fit.region;
    excess.push_back(excess_mortality(post, c, fit.ozone, fit.temp));
    excess.back().region = fit.region;
    regions[fit.region].push_back(strat.size() - 1);
  }
  if (idx.empty()) throw ConfigError("no fitted cities in " + a.stage1);

  Rectangle hull = supports.front().bounds();
  for (const auto& s : supports) hull = hull.hull(s.bounds());
  const GridSpec grid = GridSpec::over(hull, a.grid, a.grid);
  write_surface_csv(national_surface(post, idx, supports, grid, SurfaceKind::LogRr), dir / "national_logrr.csv");
  write_surface_csv(national_surface(post, idx, supports, grid, SurfaceKind::Interaction),
                    dir / "national_interaction.csv");

  // Groups: each city, each region, then the nation.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < strat.size(); ++i) groups.push_back({strat[i].city_id, {i}});
  for (const auto& [region, members] : regions) groups.push_back({"region:" + region, members});
  std::vector<std::size_t> all(strat.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  groups.push_back({"national", all});

  // Draw-level precision-weighted pool over a group of cities.
  auto pooled = [](const std::vector<std::size_t>& members, auto field) {
    std::vector<std::vector<double>> d;
    for (auto m : members) d.push_back(field(m));
    const PooledSummary p = pool_draws("", d);
    std::vector<double> out(d.front().size(), 0.0);
    for (std::size_t c = 0; c < d.size(); ++c)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.weights[c] * d[c][i];
    return out;
  };
  // Ratio of pooled high to pooled moderate log RR, draw by draw; draws with
  // a zero denominator are dropped.
  auto ratio_cells = [](std::ostream& out, const std::vector<double>& high, const std::vector<double>& moderate) {
    std::vector<double> r;
    for (std::size_t i = 0; i < high.size(); ++i)
      if (const double v = high[i] / moderate[i]; std::isfinite(v)) r.push_back(v);
    if (r.empty()) {
      out << "NA,NA,NA,NA,NA";
      return;
    }
    const Summary s = summarize(r, 1.0);
    summary_cells(out, s);
    out << ',' << format_number(s.pr_gt0);
  };

  {
    std::ofstream out(dir / "stratified.csv");
    out << "group,n_cities,n_common";
    for (const char* f : {"high_observed", "moderate_observed", "ratio_observed", "high_common", "moderate_common",
                          "ratio_common"}) {
      out << ',' << f << "_mean," << f << "_sd," << f << "_q2.5," << f << "_q97.5";
      if (std::string(f).rfind("ratio", 0) == 0) out << ',' << f << "_pr_gt1";
    }
    out << ",common_lo,common_hi\n";
    for (const auto& [name, members] : groups) {
      std::vector<std::size_t> with_common;
      for (auto m : members)
        if (strat[m].common_range) with_common.push_back(m);
      out << name << ',' << members.size() << ',' << with_common.size() << ',';
      const auto ho = pooled(members, [&](std::size_t m) { return strat[m].high_observed; });
      const auto mo = pooled(members, [&](std::size_t m) { return strat[m].moderate_observed; });
      summary_cells(out, summarize(ho));
      out << ',';
      summary_cells(out, summarize(mo));
      out << ',';
      ratio_cells(out, ho, mo);
      if (with_common.empty()) {
        out << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA";
      } else {
        const auto hc = pooled(with_common, [&](std::size_t m) { return strat[m].high_common; });
        const auto mc = pooled(with_common, [&](std::size_t m) { return strat[m].moderate_common; });
        out << ',';
        summary_cells(out, summarize(hc));
        out << ',';
        summary_cells(out, summarize(mc));
        out << ',';
        ratio_cells(out, hc, mc);
      }
      if (members.size() == 1 && strat[members[0]].common_range) {
        out << ',' << format_number(strat[members[0]].common_range->first) << ','
            << format_number(strat[members[0]].common_range->second) << '\n';
      } else {
        out << ",NA,NA\n";
      }
    }
  }
  {
    std::ofstream out(dir / "excess_mortality.csv");
    out << "group,n_cities,mean,sd,q2.5,q97.5\n";
    for (const auto& [name, members] : groups) {
      out << name << ',' << members.size() << ',';
      summary_cells(out, summarize(pooled(members, [&](std::size_t m) { return excess[m].draws; })));
      out << '\n';
    }
  }
  std::cout << "wrote report for " << idx.size() << " cities to " << dir.string() << '\n';
  return 0;
}

struct CvArgs {
  Common common;
  std::string data;
  std::string out = "cv.csv";
  std::vector<std::string> variants;
  CvConfig cfg;
};

int run_cv_command(CvArgs& a) {
  const auto cities = load_prepared(a.data, a.cfg.stage1.confounders.running_window);
  std::vector<ModelVariant> variants;
  for (const auto& v : a.variants) variants.push_back(parse_variant(v));
  if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());
  a.cfg.seed = derive_seed(a.common.seed, "cv");
  a.cfg.threads = a.common.threads;
  const CvReport report = run_cv(cities, variants, a.cfg);
  const fs::path out(a.out);
  ensure_parent(out);
  write_cv_csv(report, out);
  std::cout << "wrote " << report.rows.size() << " model rows to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monotone ozone-temperature surfaces from city mortality series", "monosurf"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write synthetic cities with a known surface");
  add_common(s, sim.common, true);
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--cities", sim.spec.n_cities, "Number of cities")->capture_default_str();
  s->add_option("--days", sim.spec.days_per_city, "Ozone-season days per city")->capture_default_str();
  s->add_option("--family", sim.family, "monotone, additive-linear, additive-nonlinear or interaction")
      ->capture_default_str();
  s->add_option("--ozone-effect", sim.spec.ozone_effect, "Ozone slope over the truth range (log rate)")
      ->capture_default_str();
  s->add_option("--shape-effect", sim.spec.shape_effect, "Curvature or interaction strength")->capture_default_str();
  s->add_option("--heterogeneity", sim.spec.city_heterogeneity, "sd of the log city multiplier")
      ->capture_default_str();
  s->add_option("--population", sim.spec.population_median, "Median city population")->capture_default_str();
  s->add_option("--start-year", sim.spec.start_year, "First year")->capture_default_str();

  Stage1Args st1;
  auto* s1 = app.add_subcommand("stage1", "Per-city quasi-Poisson surface fits");
  add_common(s1, st1.common, false);
  s1->add_option("--data", st1.data, "Directory with metadata.csv and one CSV per city")->required();
  s1->add_option("--out", st1.out, "Stage-1 output (JSON); a _summary.csv lands beside it")->capture_default_str();
  s1->add_flag("--allow-skip", st1.allow_skip, "Exit 0 even when some cities fail to fit");
  add_stage1_options(s1, st1.cfg);

  Stage2Args st2;
  auto* s2 = app.add_subcommand("stage2", "Hierarchical spatial model MCMC");
  add_common(s2, st2.common, true);
  s2->add_option("--stage1", st2.stage1, "Stage-1 output")->capture_default_str();
  s2->add_option("--out", st2.out, "Output stem: <stem>.csv, <stem>.json, <stem>_diagnostics.csv")
      ->capture_default_str();
  add_prior_options(s2, st2.priors);
  add_chain_options(s2, st2.chain);

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Surfaces, stratified comparisons and excess mortality");
  add_common(r, rep.common, false);
  r->add_option("--stage1", rep.stage1, "Stage-1 output")->capture_default_str();
  r->add_option("--posterior", rep.posterior, "Posterior stem from stage2")->capture_default_str();
  r->add_option("--out", rep.out, "Output directory")->capture_default_str();
  r->add_option("--grid", rep.grid, "Grid points per axis")->capture_default_str()->check(CLI::Range(2, 1001));
  r->add_option("--support-radius", rep.support.radius, "Support box half-width as a fraction of each range")
      ->capture_default_str();
  r->add_option("--support-min-days", rep.support.min_days, "Days needed inside the support box")
      ->capture_default_str();

  CvArgs cv;
  auto* c = app.add_subcommand("cv", "Holdout deviance of the surface model and its alternatives");
  add_common(c, cv.common, true);
  c->add_option("--data", cv.data, "Directory with metadata.csv and one CSV per city")->required();
  c->add_option("--out", cv.out, "Output CSV")->capture_default_str();
  c->add_option("--fraction", cv.cfg.fraction, "Training fraction")->capture_default_str();
  c->add_flag("--contiguous", cv.cfg.contiguous, "Hold out one contiguous block per city");
  c->add_option("--variants", cv.variants, "Model variants (default: all six)")->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);
  c->add_option("--additive-ozone-order", cv.cfg.additive_ozone_order, "Ozone order of the additive-nonlinear model")
      ->capture_default_str();
  c->add_option("--additive-temp-df", cv.cfg.additive_temp_df, "Temperature spline df of the additive models")
      ->capture_default_str();
  add_stage1_options(c, cv.cfg.stage1);
  add_prior_options(c, cv.cfg.priors);
  add_chain_options(c, cv.cfg.chain);

  app.footer(
      "Seeds: simulate, stage2 and cv derive their generator, chain and split seeds from --seed and a fixed "
      "per-command tag, so a rerun with the same seed and options reproduces every output byte for byte.");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(app, args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*s1) return run_stage1(st1);
    if (*s2) return run_stage2(st2);
    if (*r) return run_report(rep);
    if (*c) return run_cv_command(cv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
