#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "somfdr/somfdr.hpp"

namespace fs = std::filesystem;

namespace somfdr::cli {
namespace {

struct Shared {
  std::string rates;
  std::string dataset;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  unsigned threads = default_threads();
};

void add_shared(CLI::App* cmd, Shared& s, bool need_dataset = true) {
  cmd->add_option("--rates", s.rates, "Mutation-type rate table (label,gamma1,gamma2)")->required();
  auto* ds = cmd->add_option("--dataset", s.dataset, "Gene-level dataset or template");
  if (need_dataset) ds->required();
  cmd->add_option("--seed", s.seed, "Master random seed")->capture_default_str();
  cmd->add_option("--out-dir", s.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--threads", s.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 4096u))
      ->capture_default_str();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) fail(errc::input, std::string(what) + " file '" + path + "' does not exist");
}

Dataset load_inputs(const Shared& s) {
  require_file(s.rates, "rates");
  const auto rates = io::load_rates(s.rates);
  require_file(s.dataset, "dataset");
  return io::load_dataset(rates, s.dataset);
}

std::vector<Scenario> load_scenarios(const std::string& dir, const Dataset& ds) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir)) files.push_back(dir);
  else if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  } else {
    fail(errc::input, "scenario path '" + dir + "' does not exist");
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(errc::input, "no scenario files in '" + dir + "'");
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(io::align_scenario(io::load_scenario(f), ds));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : io::split(s)) {
    auto t = io::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

fs::path out_path(const Shared& s, const std::string& name) {
  fs::create_directories(s.out_dir);
  return fs::path(s.out_dir) / name;
}

std::string scenario_name(std::int64_t iteration) {
  std::ostringstream os;
  os << "scenario_" << std::setw(8) << std::setfill('0') << iteration << ".csv";
  return os.str();
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::int64_t iters = 3000, burnin = 2000, thin = 10;
  double total_mass = 1.0;
  double spike_window = 2.0;
  std::size_t grid_size = 200;
  double grid_max = 1e3;
  double npmle_tol = 1e-8;
  int npmle_max_iter = 5000;
};

void cmd_fit(const Shared& s, const FitArgs& a, std::ostream& out) {
  const auto ds = load_inputs(s);
  if (a.burnin < 0 || a.iters <= a.burnin || a.thin < 1)
    fail(errc::input, "need iters > burnin >= 0 and thin >= 1");
  const auto grid = geometric_grid(1.0, a.grid_max, a.grid_size);
  const auto fhat = npmle_fit(ds, grid, {a.npmle_tol, a.npmle_max_iter});
  const auto base = elicit_base_measure(fhat, a.total_mass, a.spike_window);

  {
    auto f = io::open_out(out_path(s, "npmle.csv"));
    f << "support,weight\n";
    for (std::size_t k = 0; k < fhat.support.size(); ++k)
      f << io::format_double(fhat.support[k]) << ',' << io::format_double(fhat.weights[k]) << '\n';
  }

  const fs::path scen_dir = out_path(s, "scenarios");
  fs::create_directories(scen_dir);
  auto chain = io::open_out(out_path(s, "chain.csv"));
  chain << "iteration,n_clusters,n_drivers,log_posterior\n";
  std::vector<double> drivers;
  McmcOptions opt{a.iters, a.burnin, a.thin, s.seed};
  run_mcmc(
      ds, base, opt,
      [&](const PosteriorState& st) {
        drivers.push_back(static_cast<double>(st.n_drivers()));
        io::save_scenario(scen_dir / scenario_name(st.iteration), export_scenario(st, ds, s.seed));
      },
      [&](const ChainTrace& t) {
        chain << t.iteration << ',' << t.n_clusters << ',' << t.n_drivers << ',' << io::format_double(t.log_posterior)
              << '\n';
      });
  const auto dc = summarize_driver_counts(drivers);

  auto f = io::open_out(out_path(s, "fit.csv"));
  f << "key,value\n";
  f << "spike_fraction," << io::format_double(base.spike_fraction) << '\n';
  f << "shape," << io::format_double(base.shape) << '\n';
  f << "rate," << io::format_double(base.rate) << '\n';
  f << "total_mass," << io::format_double(base.total_mass) << '\n';
  f << "spike_window," << io::format_double(a.spike_window) << '\n';
  f << "npmle_iterations," << fhat.iterations << '\n';
  f << "npmle_loglik," << io::format_double(fhat.loglik) << '\n';
  f << "scenarios," << drivers.size() << '\n';
  f << "drivers_mean," << io::format_double(dc.mean) << '\n';
  f << "drivers_p05," << io::format_double(dc.p05) << '\n';
  f << "drivers_p50," << io::format_double(dc.p50) << '\n';
  f << "drivers_p95," << io::format_double(dc.p95) << '\n';
  out << "fit: " << drivers.size() << " scenarios written to " << scen_dir.string() << "; spike_fraction="
      << base.spike_fraction << " posterior mean drivers=" << dc.mean << '\n';
}

void cmd_simulate(const Shared& s, const std::string& scenario_path, std::ostream& out) {
  const auto tmpl = load_inputs(s);
  require_file(scenario_path, "scenario");
  const auto scn = io::align_scenario(io::load_scenario(scenario_path), tmpl);
  SimulationStats stats;
  const auto ds = simulate_dataset(scn, tmpl, s.seed, &stats, s.threads);
  io::save_dataset(out_path(s, "simulated_dataset.csv"), ds);
  const auto sum = summary_counts(ds);
  out << "simulate: " << ds.n_genes() << " genes, clamped draws=" << stats.clamped << ", discovery (0,1,>1)=("
      << sum.discovery[0] << ',' << sum.discovery[1] << ',' << sum.discovery[2] << ")\n";
}

void cmd_score(const Shared& s, const std::string& kind_name, bool mid_p, std::ostream& out) {
  const auto ds = load_inputs(s);
  const auto kind = parse_score_kind(kind_name);
  const auto scores = score_dataset(ds, kind, {mid_p, s.threads});
  auto f = io::open_out(out_path(s, "scores_" + std::string(to_string(kind)) + ".csv"));
  write_scores(f, scores);
  out << "score: " << scores.size() << " genes scored (" << to_string(kind) << ")\n";
}

struct SelectArgs {
  std::string kind = "tailp_two_stage";
  std::string method = "bh";
  double alpha = 0.1;
  double lambda = 0.5;
  std::int64_t null_reps = 20;
};

void cmd_select(const Shared& s, const SelectArgs& a, std::ostream& out) {
  const auto ds = load_inputs(s);
  const auto kind = parse_score_kind(a.kind);
  const auto method = parse_method(a.method);
  const auto scores = score_dataset(ds, kind, {false, s.threads});
  std::vector<std::string> ids;
  std::vector<double> values;
  for (const auto& sc : scores) {
    ids.push_back(sc.gene_id);
    values.push_back(sc.value);
  }
  std::optional<NullSample> null;
  if (method == Method::eb || !uses_exact_pvalues(kind))
    null = null_score_sample(ds, kind, a.null_reps, s.seed, {false, s.threads});
  std::vector<double> pvals(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    pvals[i] = uses_exact_pvalues(kind) ? values[i] : mc_pvalue(values[i], *null);
  SelectionResult r;
  switch (method) {
    case Method::bh: r = bh_select(ids, pvals, a.alpha); break;
    case Method::storey: r = storey_select(ids, pvals, a.alpha, a.lambda); break;
    case Method::eb: r = eb_select(ids, values, *null, a.alpha); break;
  }
  auto f = io::open_out(
      out_path(s, "selection_" + std::string(to_string(method)) + "_" + std::string(to_string(kind)) + ".csv"));
  write_selection(f, ids, r);
  out << "select: " << r.n_rejected() << " genes rejected (" << to_string(method) << ", " << to_string(kind)
      << ", alpha=" << a.alpha << ")\n";
}

struct BenchArgs {
  std::string scenarios;
  std::string methods = "bh,eb,storey";
  std::string kinds = "camp,tailp_two_stage,loglik_ratio";
  std::string alphas = "0.1,0.2";
  double lambda = 0.5;
  std::int64_t null_reps = 20;
};

void cmd_bench(const Shared& s, const BenchArgs& a, std::ostream& out) {
  const auto tmpl = load_inputs(s);
  const auto scenarios = load_scenarios(a.scenarios, tmpl);
  BenchConfig cfg;
  cfg.methods.clear();
  cfg.kinds.clear();
  cfg.alphas.clear();
  for (const auto& m : split_list(a.methods)) cfg.methods.push_back(parse_method(m));
  for (const auto& k : split_list(a.kinds)) cfg.kinds.push_back(parse_score_kind(k));
  for (const auto& v : split_list(a.alphas)) {
    const double alpha = io::parse_double(v, "alpha");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::input, "alpha must lie in (0, 1)");
    cfg.alphas.push_back(alpha);
  }
  if (!(a.lambda > 0.0 && a.lambda < 1.0)) fail(errc::input, "lambda must lie in (0, 1)");
  cfg.lambda = a.lambda;
  cfg.null_reps = a.null_reps;
  cfg.seed = s.seed;
  cfg.threads = s.threads;
  const auto oc = run_benchmark(scenarios, tmpl, cfg);
  auto f = io::open_out(out_path(s, "operating_characteristics.csv"));
  write_operating_characteristics(f, oc);
  out << "bench: " << oc.rows.size() << " rows over " << scenarios.size() << " scenarios\n";
}

void cmd_roc(const Shared& s, const std::string& scenarios_path, const std::string& kind_name, std::ostream& out) {
  const auto tmpl = load_inputs(s);
  const auto scenarios = load_scenarios(scenarios_path, tmpl);
  const auto kind = parse_score_kind(kind_name);
  const auto roc = roc_estimate(scenarios, tmpl, kind, {}, s.seed, s.threads);
  auto f = io::open_out(out_path(s, "roc_" + std::string(to_string(kind)) + ".csv"));
  write_roc(f, roc);
  out << "roc: " << roc.points.size() << " points, pAUC(FPR<=0.02)=" << roc.pauc_at_2pct << '\n';
}

void cmd_bootstrap(const Shared& s, const std::string& scenarios_path, std::int64_t reps, std::ostream& out) {
  const auto ds = load_inputs(s);
  std::optional<FitSummary> fit;
  if (!scenarios_path.empty()) fit = fit_summary_distribution(load_scenarios(scenarios_path, ds), ds, s.seed, s.threads);
  const auto br = bootstrap_variability(ds, reps, derive_seed(s.seed, 0x626f6f74ULL), fit ? &fit->sd : nullptr,
                                        s.threads);
  const auto obs = summary_counts(ds).flat();
  auto f = io::open_out(out_path(s, "bootstrap.csv"));
  f << "count,observed,bootstrap_sd,scenario_sd,ratio,scenario_lo90,scenario_hi90\n";
  for (std::size_t j = 0; j < 6; ++j) {
    f << kSummaryNames[j] << ',' << obs[j] << ',' << io::format_double(br.sd[j]) << ','
      << (fit ? io::format_double(fit->sd[j]) : "NA") << ',' << (fit ? io::format_double(br.ratio[j]) : "NA") << ','
      << (fit ? io::format_double(fit->central90[j].lo) : "NA") << ','
      << (fit ? io::format_double(fit->central90[j].hi) : "NA") << '\n';
  }
  for (std::size_t j = 0; j < 4; ++j)
    if (br.fits[j].intercept_only) f << "# logistic fit " << j << " fell back to intercept only: " << br.fits[j].diagnostic << '\n';
  out << "bootstrap-check: " << reps << " replicates\n";
}

struct SynthArgs {
  std::size_t genes = 2000;
  std::size_t types = 5;
  double exposure = 0.04;
  double driver_fraction = 0.02;
  double effect_shape = 0.8;
  double effect_mean = 15.0;
};

void cmd_make_synthetic(const Shared& s, const SynthArgs& a, std::ostream& out) {
  synthetic::Design d;
  d.genes = a.genes;
  d.types = a.types;
  d.mean_discovery_exposure = a.exposure;
  d.seed = s.seed;
  const auto tmpl = synthetic::make_template(d);
  io::save_rates(out_path(s, "rates.csv"), tmpl.rates);
  io::save_dataset(out_path(s, "template.csv"), tmpl);
  const auto obs = synthetic::observed_dataset(tmpl, a.driver_fraction, {a.effect_shape, a.effect_mean}, s.seed);
  io::save_dataset(out_path(s, "observed.csv"), obs);
  out << "make-synthetic: wrote rates.csv, template.csv and observed.csv to " << s.out_dir << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage somatic mutation model: scenario generation, gene scores and FDR benchmarks", "somfdr"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Shared shared;

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Elicit the base measure, run the DP sampler and export scenarios");
  add_shared(fit_cmd, shared);
  fit_cmd->add_option("--iters", fit.iters, "Total Gibbs sweeps")->capture_default_str();
  fit_cmd->add_option("--burnin", fit.burnin, "Burn-in sweeps")->capture_default_str();
  fit_cmd->add_option("--thin", fit.thin, "Thinning interval")->capture_default_str();
  fit_cmd->add_option("--total-mass", fit.total_mass, "Dirichlet process total mass")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit_cmd->add_option("--spike-window", fit.spike_window, "Spike weight is the estimated mass in [1, w)")
      ->check(CLI::Range(1.0 + 1e-9, 1e9))
      ->capture_default_str();
  fit_cmd->add_option("--grid-size", fit.grid_size, "NPMLE grid points")->check(CLI::Range(2, 100000))->capture_default_str();
  fit_cmd->add_option("--grid-max", fit.grid_max, "Largest NPMLE grid effect")->check(CLI::Range(1.0 + 1e-9, 1e12))->capture_default_str();
  fit_cmd->add_option("--npmle-tol", fit.npmle_tol, "EM stopping tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--npmle-max-iter", fit.npmle_max_iter, "EM iteration cap")->check(CLI::Range(1, 10000000))->capture_default_str();

  std::string scenario_path;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a dataset from a scenario over a template");
  add_shared(sim_cmd, shared);
  sim_cmd->add_option("--scenario", scenario_path, "Scenario file")->required();

  std::string kind = "tailp_two_stage";
  bool mid_p = false;
  auto* score_cmd = app.add_subcommand("score", "Score every gene of a dataset");
  add_shared(score_cmd, shared);
  score_cmd->add_option("--kind", kind, "camp | tailp_two_stage | tailp_single_stage | loglik_ratio | pg_prob")
      ->capture_default_str();
  score_cmd->add_flag("--mid-p", mid_p, "Mid-p tail probabilities (diagnostics only)");

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "Select putative drivers with BH, Storey or empirical Bayes");
  add_shared(select_cmd, shared);
  select_cmd->add_option("--kind", sel.kind, "Score kind")->capture_default_str();
  select_cmd->add_option("--method", sel.method, "bh | storey | eb")->capture_default_str();
  select_cmd->add_option("--alpha", sel.alpha, "Target FDR level")->check(CLI::Range(1e-12, 1.0 - 1e-12))->capture_default_str();
  select_cmd->add_option("--lambda", sel.lambda, "Storey tuning parameter")->check(CLI::Range(1e-12, 1.0 - 1e-12))->capture_default_str();
  select_cmd->add_option("--null-reps", sel.null_reps, "All-passenger replicates for the null sample")
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{1000000}))
      ->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Operating characteristics over a scenario collection");
  add_shared(bench_cmd, shared);
  bench_cmd->add_option("--scenarios", bench.scenarios, "Scenario directory or file")->required();
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated methods")->capture_default_str();
  bench_cmd->add_option("--kinds", bench.kinds, "Comma-separated score kinds")->capture_default_str();
  bench_cmd->add_option("--alphas", bench.alphas, "Comma-separated FDR levels")->capture_default_str();
  bench_cmd->add_option("--lambda", bench.lambda, "Storey tuning parameter")->capture_default_str();
  bench_cmd->add_option("--null-reps", bench.null_reps, "All-passenger replicates for null samples")
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{1000000}))
      ->capture_default_str();

  std::string roc_scenarios, roc_kind = "loglik_ratio";
  auto* roc_cmd = app.add_subcommand("roc", "ROC curve and partial AUC of a score over scenarios");
  add_shared(roc_cmd, shared);
  roc_cmd->add_option("--scenarios", roc_scenarios, "Scenario directory or file")->required();
  roc_cmd->add_option("--kind", roc_kind, "Score kind")->capture_default_str();

  std::string boot_scenarios;
  std::int64_t boot_reps = 1000;
  auto* boot_cmd = app.add_subcommand("bootstrap-check", "Bootstrap variability of the six stage counts");
  add_shared(boot_cmd, shared);
  boot_cmd->add_option("--scenarios", boot_scenarios, "Scenario directory for the SD ratios");
  boot_cmd->add_option("--reps", boot_reps, "Bootstrap replicates (>= 100)")->capture_default_str();

  SynthArgs synth;
  Shared synth_shared;
  auto* synth_cmd = app.add_subcommand("make-synthetic", "Write a synthetic rate table, template and observed dataset");
  synth_cmd->add_option("--seed", synth_shared.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_shared.out_dir, "Output directory")->capture_default_str();
  synth_cmd->add_option("--genes", synth.genes, "Number of genes")->check(CLI::Range(std::size_t{1}, std::size_t{10000000}))->capture_default_str();
  synth_cmd->add_option("--types", synth.types, "Number of mutation types")->check(CLI::Range(std::size_t{1}, std::size_t{1000}))->capture_default_str();
  synth_cmd->add_option("--exposure", synth.exposure, "Mean expected discovery mutations per passenger gene")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--driver-fraction", synth.driver_fraction, "Fraction of drivers in the observed dataset")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth_cmd->add_option("--effect-shape", synth.effect_shape, "Driver effect gamma shape")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--effect-mean", synth.effect_mean, "Driver effect mean excess")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    // subcommand help requests surface as CallForHelp from the subcommand
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "E_USAGE: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*fit_cmd) cmd_fit(shared, fit, out);
    else if (*sim_cmd) cmd_simulate(shared, scenario_path, out);
    else if (*score_cmd) cmd_score(shared, kind, mid_p, out);
    else if (*select_cmd) cmd_select(shared, sel, out);
    else if (*bench_cmd) cmd_bench(shared, bench, out);
    else if (*roc_cmd) cmd_roc(shared, roc_scenarios, roc_kind, out);
    else if (*boot_cmd) cmd_bootstrap(shared, boot_scenarios, boot_reps, out);
    else if (*synth_cmd) cmd_make_synthetic(synth_shared, synth, out);
  } catch (const error& e) {
    err << errc_name(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "E_INTERNAL: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace somfdr::cli
