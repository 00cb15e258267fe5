#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"
#include "somfdr/fdr.hpp"
#include "somfdr/genmodel.hpp"
#include "somfdr/io.hpp"
#include "somfdr/logistic.hpp"
#include "somfdr/numeric.hpp"
#include "somfdr/parallel.hpp"
#include "somfdr/rng.hpp"
#include "somfdr/scores.hpp"

namespace somfdr {

/// Seed for the dataset simulated from `s`; depends on content, not position,
/// so results do not change when scenarios are reordered.
inline std::uint64_t scenario_seed(std::uint64_t seed, const Scenario& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001B3ULL;
    }
  };
  feed(&s.origin.mcmc_iteration, sizeof s.origin.mcmc_iteration);
  feed(&s.origin.seed, sizeof s.origin.seed);
  feed(s.theta.data(), s.theta.size() * sizeof(double));
  return derive_seed(seed, h);
}

/// Fraction of rejected hypotheses that are passengers; 0 when nothing is rejected.
inline double false_discovery_proportion(std::span<const bool> rejected, std::span<const bool> driver) {
  std::size_t r = 0, false_r = 0;
  for (std::size_t i = 0; i < rejected.size(); ++i) {
    if (!rejected[i]) continue;
    ++r;
    false_r += !driver[i];
  }
  return r == 0 ? 0.0 : static_cast<double>(false_r) / static_cast<double>(r);
}

inline bool uses_exact_pvalues(ScoreKind k) {
  return k == ScoreKind::tailp_two_stage || k == ScoreKind::tailp_single_stage;
}

struct FdpQuantiles {
  double p10 = 0, p25 = 0, p50 = 0, p75 = 0, p90 = 0;
};

struct OcRow {
  Method method = Method::bh;
  ScoreKind kind = ScoreKind::camp;
  double alpha = 0.1;
  double mean_fdp = 0.0;
  double mean_selected = 0.0;
  FdpQuantiles fdp;
  std::size_t n_scenarios = 0;
};

struct OperatingCharacteristics {
  std::vector<OcRow> rows;
  std::size_t datasets_simulated = 0;
  std::size_t screening_violations = 0;  // genes with sum(x1) == 0 and sum(x2) > 0
  std::size_t clamped_draws = 0;

  const OcRow& row(Method m, ScoreKind k, double alpha) const {
    for (const auto& r : rows)
      if (r.method == m && r.kind == k && r.alpha == alpha) return r;
    fail(errc::input, "no benchmark row for the requested combination");
  }
};

struct BenchConfig {
  std::vector<Method> methods{Method::bh, Method::eb, Method::storey};
  std::vector<ScoreKind> kinds{ScoreKind::camp, ScoreKind::tailp_two_stage, ScoreKind::loglik_ratio};
  std::vector<double> alphas{0.1, 0.2};
  double lambda = 0.5;
  std::int64_t null_reps = 20;
  EbOptions eb;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Null samples for every kind that needs one, drawn once from the template.
inline std::map<ScoreKind, NullSample> benchmark_nulls(const Dataset& tmpl, const BenchConfig& cfg) {
  std::map<ScoreKind, NullSample> nulls;
  const bool need_eb = std::find(cfg.methods.begin(), cfg.methods.end(), Method::eb) != cfg.methods.end();
  for (auto k : cfg.kinds)
    if (need_eb || !uses_exact_pvalues(k))
      nulls.emplace(k, null_score_sample(tmpl, k, cfg.null_reps,
                                         derive_seed(cfg.seed, 0x6e756c6cULL + static_cast<std::uint64_t>(k)),
                                         ScoreOptions{false, cfg.threads}));
  return nulls;
}

inline FdpQuantiles fdp_quantiles(std::vector<double> sorted) {
  FdpQuantiles q;
  q.p10 = numeric::quantile_sorted(sorted, 0.10);
  q.p25 = numeric::quantile_sorted(sorted, 0.25);
  q.p50 = numeric::quantile_sorted(sorted, 0.50);
  q.p75 = numeric::quantile_sorted(sorted, 0.75);
  q.p90 = numeric::quantile_sorted(sorted, 0.90);
  return q;
}

/// Simulates one dataset per scenario, runs every (method, kind, alpha)
/// combination and summarizes the realized FDP and selection sizes.
inline OperatingCharacteristics run_benchmark(std::span<const Scenario> scenarios, const Dataset& tmpl,
                                              const BenchConfig& cfg) {
  if (scenarios.empty() || cfg.methods.empty() || cfg.kinds.empty() || cfg.alphas.empty())
    fail(errc::input, "benchmark needs scenarios, methods, kinds and alphas");
  for (const auto& s : scenarios)
    if (s.theta.size() != tmpl.n_genes()) fail(errc::length_mismatch, "scenario does not match the template");

  const auto nulls = benchmark_nulls(tmpl, cfg);
  const std::size_t n_scn = scenarios.size();
  const std::size_t per_kind = cfg.methods.size() * cfg.alphas.size();
  const std::size_t n_rows = cfg.kinds.size() * per_kind;
  std::vector<double> fdp(n_scn * n_rows), selected(n_scn * n_rows);
  std::vector<std::size_t> violations(n_scn, 0), clamped(n_scn, 0);

  std::vector<std::string> ids(tmpl.n_genes());
  for (std::size_t g = 0; g < tmpl.n_genes(); ++g) ids[g] = tmpl.genes[g].gene_id;

  parallel_for(n_scn, cfg.threads, [&](std::size_t s) {
    const Scenario& scn = scenarios[s];
    SimulationStats sim;
    const auto ds = simulate_dataset(scn, tmpl, scenario_seed(cfg.seed, scn), &sim);
    clamped[s] = sim.clamped;
    for (const auto& g : ds.genes) violations[s] += g.total_x1() == 0 && g.total_x2() != 0;
    const auto mask = scn.driver_mask();
    const auto driver = std::make_unique<bool[]>(mask.size());
    for (std::size_t g = 0; g < mask.size(); ++g) driver[g] = mask[g];

    std::vector<double> values(ds.n_genes()), pvals(ds.n_genes());
    for (std::size_t ki = 0; ki < cfg.kinds.size(); ++ki) {
      const auto kind = cfg.kinds[ki];
      const auto scores = score_dataset(ds, kind);
      for (std::size_t g = 0; g < scores.size(); ++g) values[g] = scores[g].value;
      const NullSample* null = nulls.count(kind) ? &nulls.at(kind) : nullptr;
      for (std::size_t g = 0; g < scores.size(); ++g)
        pvals[g] = uses_exact_pvalues(kind) ? values[g] : mc_pvalue(values[g], *null);
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
          const double alpha = cfg.alphas[ai];
          SelectionResult r;
          switch (cfg.methods[mi]) {
            case Method::bh: r = bh_select(ids, pvals, alpha); break;
            case Method::storey: r = storey_select(ids, pvals, alpha, cfg.lambda); break;
            case Method::eb: r = eb_select(ids, values, *null, alpha, cfg.eb); break;
          }
          const auto rej = std::make_unique<bool[]>(r.mask.size());
          for (std::size_t g = 0; g < r.mask.size(); ++g) rej[g] = r.mask[g];
          const std::size_t row = ki * per_kind + mi * cfg.alphas.size() + ai;
          fdp[s * n_rows + row] = false_discovery_proportion(std::span<const bool>(rej.get(), r.mask.size()),
                                                            std::span<const bool>(driver.get(), mask.size()));
          selected[s * n_rows + row] = static_cast<double>(r.n_rejected());
        }
      }
    }
  });

  OperatingCharacteristics oc;
  oc.datasets_simulated = n_scn;
  for (auto v : violations) oc.screening_violations += v;
  for (auto c : clamped) oc.clamped_draws += c;
  // Rows ordered by alpha, then method, then kind.
  for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      for (std::size_t ki = 0; ki < cfg.kinds.size(); ++ki) {
        const std::size_t row = ki * per_kind + mi * cfg.alphas.size() + ai;
        std::vector<double> f(n_scn), sel(n_scn);
        for (std::size_t s = 0; s < n_scn; ++s) {
          f[s] = fdp[s * n_rows + row];
          sel[s] = selected[s * n_rows + row];
        }
        // sorted before summing: the mean is then independent of scenario order
        std::sort(f.begin(), f.end());
        std::sort(sel.begin(), sel.end());
        OcRow r;
        r.method = cfg.methods[mi];
        r.kind = cfg.kinds[ki];
        r.alpha = cfg.alphas[ai];
        r.mean_fdp = numeric::mean(f);
        r.mean_selected = numeric::mean(sel);
        r.fdp = fdp_quantiles(std::move(f));
        r.n_scenarios = n_scn;
        oc.rows.push_back(r);
      }
    }
  }
  return oc;
}

inline void write_operating_characteristics(std::ostream& out, const OperatingCharacteristics& oc) {
  out << "method,kind,alpha,mean_fdp,mean_selected,fdp_p10,fdp_p25,fdp_p50,fdp_p75,fdp_p90,n_scenarios\n";
  for (const auto& r : oc.rows) {
    out << to_string(r.method) << ',' << to_string(r.kind) << ',' << io::format_double(r.alpha) << ','
        << io::format_double(r.mean_fdp) << ',' << io::format_double(r.mean_selected) << ','
        << io::format_double(r.fdp.p10) << ',' << io::format_double(r.fdp.p25) << ','
        << io::format_double(r.fdp.p50) << ',' << io::format_double(r.fdp.p75) << ','
        << io::format_double(r.fdp.p90) << ',' << r.n_scenarios << '\n';
  }
}

// ---------------------------------------------------------------------------
// ROC

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), fpr strictly increasing
  double pauc_at_2pct = 0.0;
};

/// Trapezoid area under a piecewise-linear ROC curve for fpr in [0, max_fpr].
inline double partial_auc(std::span<const std::pair<double, double>> points, double max_fpr = 0.02) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    auto [x0, y0] = points[i - 1];
    auto [x1, y1] = points[i];
    if (x0 >= max_fpr) break;
    if (x1 > max_fpr) {
      y1 = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0);
      x1 = max_fpr;
    }
    area += 0.5 * (x1 - x0) * (y0 + y1);
  }
  return area;
}

/// ROC from pooled driver and passenger extremities, sweeping `thresholds`
/// (all distinct pooled values when empty).
inline RocCurve roc_from_samples(std::vector<double> drivers, std::vector<double> passengers,
                                 std::vector<double> thresholds = {}) {
  if (drivers.empty()) fail(errc::input, "ROC needs at least one driver");
  if (passengers.empty()) fail(errc::input, "ROC needs at least one passenger");
  std::sort(drivers.begin(), drivers.end());
  std::sort(passengers.begin(), passengers.end());
  if (thresholds.empty()) {
    thresholds = drivers;
    thresholds.insert(thresholds.end(), passengers.begin(), passengers.end());
  }
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  auto frac_ge = [](const std::vector<double>& xs, double t) {
    return static_cast<double>(xs.end() - std::lower_bound(xs.begin(), xs.end(), t)) / static_cast<double>(xs.size());
  };
  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  auto push = [&](double fpr, double tpr) {
    if (fpr == roc.points.back().first) roc.points.back().second = std::max(roc.points.back().second, tpr);
    else roc.points.emplace_back(fpr, tpr);
  };
  for (double t : thresholds) push(frac_ge(passengers, t), frac_ge(drivers, t));
  push(1.0, 1.0);
  roc.pauc_at_2pct = partial_auc(roc.points, 0.02);
  return roc;
}

inline RocCurve roc_estimate(std::span<const Scenario> scenarios, const Dataset& tmpl, ScoreKind kind,
                             std::span<const double> grid, std::uint64_t seed, unsigned threads = 1) {
  std::vector<std::vector<double>> drv(scenarios.size()), pas(scenarios.size());
  parallel_for(scenarios.size(), threads, [&](std::size_t s) {
    const auto& scn = scenarios[s];
    const auto ds = simulate_dataset(scn, tmpl, scenario_seed(seed, scn));
    const auto scores = score_dataset(ds, kind);
    for (std::size_t g = 0; g < scores.size(); ++g)
      (scn.is_driver(g) ? drv[s] : pas[s]).push_back(extremity(kind, scores[g].value));
  });
  std::vector<double> drivers, passengers, thresholds;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    drivers.insert(drivers.end(), drv[s].begin(), drv[s].end());
    passengers.insert(passengers.end(), pas[s].begin(), pas[s].end());
  }
  for (double v : grid) thresholds.push_back(extremity(kind, v));
  return roc_from_samples(std::move(drivers), std::move(passengers), std::move(thresholds));
}

inline void write_roc(std::ostream& out, const RocCurve& roc) {
  out << "# pauc_at_2pct=" << io::format_double(roc.pauc_at_2pct) << '\n';
  out << "fpr,tpr\n";
  for (auto [f, t] : roc.points) out << io::format_double(f) << ',' << io::format_double(t) << '\n';
}

// ---------------------------------------------------------------------------
// Posterior-predictive summaries and the bootstrap check.

struct Interval {
  double lo = 0.0, hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct FitSummary {
  std::vector<StageSummary> samples;
  std::array<Interval, 6> central90{};
  std::array<double, 6> sd{};
  std::array<double, 6> mean{};
  std::size_t screening_violations = 0;  // over the simulated datasets, when simulated here
};

inline FitSummary summarize_counts(std::vector<StageSummary> samples) {
  FitSummary fs;
  fs.samples = std::move(samples);
  for (std::size_t j = 0; j < 6; ++j) {
    std::vector<double> v;
    v.reserve(fs.samples.size());
    for (const auto& s : fs.samples) v.push_back(static_cast<double>(s.flat()[j]));
    std::sort(v.begin(), v.end());
    fs.central90[j] = {numeric::quantile_sorted(v, 0.05), numeric::quantile_sorted(v, 0.95)};
    fs.sd[j] = numeric::stddev(v);
    fs.mean[j] = numeric::mean(v);
  }
  return fs;
}

/// One simulated dataset per scenario; the six stage counts of each.
inline FitSummary fit_summary_distribution(std::span<const Scenario> scenarios, const Dataset& tmpl,
                                           std::uint64_t seed, unsigned threads = 1) {
  if (scenarios.empty()) fail(errc::input, "no scenarios");
  std::vector<StageSummary> samples(scenarios.size());
  std::vector<std::size_t> violations(scenarios.size(), 0);
  parallel_for(scenarios.size(), threads, [&](std::size_t s) {
    const auto ds = simulate_dataset(scenarios[s], tmpl, scenario_seed(seed, scenarios[s]));
    for (const auto& g : ds.genes) violations[s] += g.total_x1() == 0 && g.total_x2() != 0;
    samples[s] = summary_counts(ds);
  });
  auto fs = summarize_counts(std::move(samples));
  for (auto v : violations) fs.screening_violations += v;
  return fs;
}

struct BootstrapResult {
  std::array<double, 6> sd{};
  std::array<double, 6> ratio{};  // scenario SD / bootstrap SD; NaN without scenario SDs
  std::array<LogisticFit, 4> fits;
  std::vector<StageSummary> samples;
};

/// Covariates: intercept, log(1 + sum_m cov1), log(1 + sum_m gamma1 * cov1).
inline Eigen::MatrixXd bootstrap_design(const Dataset& ds) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.n_genes()), 3);
  for (std::size_t g = 0; g < ds.n_genes(); ++g) {
    double cov = 0.0;
    for (auto c : ds.genes[g].cov1) cov += static_cast<double>(c);
    const auto e = exposure(ds.genes[g], ds.rates);
    const auto i = static_cast<Eigen::Index>(g);
    x(i, 0) = 1.0;
    x(i, 1) = std::log1p(cov);
    x(i, 2) = std::log1p(e.stage1);
  }
  return x;
}

/// Parametric bootstrap of the six stage counts from per-gene logistic fits of
/// P(sum x1 = 1), P(sum x1 > 1), P(screened in, sum x2 = 1), P(screened in, sum x2 > 1).
inline BootstrapResult bootstrap_variability(const Dataset& observed, std::int64_t reps, std::uint64_t seed,
                                             const std::array<double, 6>* scenario_sd = nullptr,
                                             unsigned threads = 1) {
  if (reps < 100) fail(errc::input, "bootstrap needs at least 100 replicates");
  const auto x = bootstrap_design(observed);
  const auto n = static_cast<Eigen::Index>(observed.n_genes());
  std::array<Eigen::VectorXd, 4> y;
  for (auto& v : y) v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& g = observed.genes[static_cast<std::size_t>(i)];
    const auto n1 = g.total_x1(), n2 = g.total_x2();
    y[0][i] = n1 == 1;
    y[1][i] = n1 > 1;
    y[2][i] = n1 >= 1 && n2 == 1;
    y[3][i] = n1 >= 1 && n2 > 1;
  }
  BootstrapResult br;
  for (std::size_t j = 0; j < 4; ++j) br.fits[j] = fit_logistic(x, y[j]);

  // per-gene category probabilities
  std::vector<std::array<double, 4>> prob(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = prob[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < 4; ++j) p[j] = br.fits[j].predict(x.row(i));
    const double in = p[0] + p[1];
    if (in > 1.0) {
      p[0] /= in;
      p[1] /= in;
    }
    const double val = p[2] + p[3];
    const double in_now = p[0] + p[1];
    if (val > in_now && val > 0.0) {
      p[2] *= in_now / val;
      p[3] *= in_now / val;
    }
  }

  br.samples.resize(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    splitmix64 rng(derive_seed(seed, r));
    StageSummary s;
    for (const auto& p : prob) {
      double u = rng.uniform();
      if (u >= p[0] + p[1]) {
        ++s.discovery[0];
        continue;
      }
      ++s.discovery[u < p[0] ? 1 : 2];
      // validation outcome given screened in
      const double in = p[0] + p[1];
      const double v = rng.uniform() * in;
      ++s.validation[v < p[2] ? 1 : (v < p[2] + p[3] ? 2 : 0)];
    }
    br.samples[r] = s;
  });
  const auto fs = summarize_counts(br.samples);
  br.sd = fs.sd;
  for (std::size_t j = 0; j < 6; ++j)
    br.ratio[j] = scenario_sd && br.sd[j] > 0.0 ? (*scenario_sd)[j] / br.sd[j] : std::numeric_limits<double>::quiet_NaN();
  return br;
}

}  // namespace somfdr
