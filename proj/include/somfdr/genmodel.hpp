#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"
#include "somfdr/numeric.hpp"
#include "somfdr/parallel.hpp"
#include "somfdr/rng.hpp"

// Two-stage Poisson model: X1 ~ Poisson(gamma1 * theta * T1) per type, and
// X2 ~ Poisson(gamma2 * theta * T2) only for genes with at least one discovery
// mutation (point mass at zero otherwise).
namespace somfdr {

struct GeneLogLik {
  std::string gene_id;
  double value = 0.0;
};

/// Expected passenger mutation counts (theta = 1) per stage.
struct Exposure {
  double stage1 = 0.0;
  double stage2 = 0.0;
};

inline Exposure exposure(const GeneRecord& g, const MutationTypeTable& rates) {
  Exposure e;
  for (std::size_t m = 0; m < rates.size(); ++m) {
    e.stage1 += rates[m].gamma1 * static_cast<double>(g.cov1[m]);
    e.stage2 += rates[m].gamma2 * static_cast<double>(g.cov2[m]);
  }
  return e;
}

/// The gene likelihood as a function of theta is exp(log_const + n log(theta) - exposure * theta).
struct GeneSuffStats {
  std::int64_t n = 0;     // counts entering the likelihood
  double exposure = 0.0;  // expected count at theta = 1 over the stages observed
  double log_const = 0.0;

  double loglik(double theta) const {
    if (theta == 0.0) return n == 0 ? log_const : numeric::kNegInf;
    return log_const + static_cast<double>(n) * std::log(theta) - exposure * theta;
  }
};

inline void check_screening(const GeneRecord& g) {
  if (g.total_x1() == 0 && g.total_x2() != 0)
    fail(errc::screening, "gene '" + g.gene_id + "' has validation mutations but none in discovery");
}

inline GeneSuffStats suff_stats(const GeneRecord& g, const MutationTypeTable& rates) {
  check_screening(g);
  GeneSuffStats s;
  const bool second = g.screened_in();
  for (std::size_t m = 0; m < rates.size(); ++m) {
    const double mu1 = rates[m].gamma1 * static_cast<double>(g.cov1[m]);
    s.n += g.x1[m];
    s.exposure += mu1;
    if (g.x1[m] > 0) s.log_const += static_cast<double>(g.x1[m]) * std::log(mu1) - numeric::log_factorial(g.x1[m]);
    if (second) {
      const double mu2 = rates[m].gamma2 * static_cast<double>(g.cov2[m]);
      s.n += g.x2[m];
      s.exposure += mu2;
      if (g.x2[m] > 0)
        s.log_const += static_cast<double>(g.x2[m]) * std::log(mu2) - numeric::log_factorial(g.x2[m]);
    }
  }
  return s;
}

/// Log-likelihood of one gene's two-stage counts at effect `theta`, evaluated
/// term by term from the Poisson log-pmf.
inline GeneLogLik loglik_gene(const GeneRecord& g, const MutationTypeTable& rates, double theta) {
  if (!(theta >= 0.0)) fail(errc::domain, "theta must be non-negative");
  check_screening(g);
  GeneLogLik out{g.gene_id, 0.0};
  for (std::size_t m = 0; m < rates.size(); ++m)
    out.value += numeric::log_poisson_pmf(g.x1[m], rates[m].gamma1 * theta * static_cast<double>(g.cov1[m]));
  if (g.screened_in())
    for (std::size_t m = 0; m < rates.size(); ++m)
      out.value += numeric::log_poisson_pmf(g.x2[m], rates[m].gamma2 * theta * static_cast<double>(g.cov2[m]));
  return out;
}

/// Closed-form maximizer over theta >= 0: observed total over expected total.
inline double mle_theta(const GeneRecord& g, const MutationTypeTable& rates) {
  const auto s = suff_stats(g, rates);
  if (!(s.exposure > 0.0)) fail(errc::degenerate, "gene '" + g.gene_id + "' has zero expected count");
  return static_cast<double>(s.n) / s.exposure;
}

inline std::int64_t draw_poisson(splitmix64& rng, double mu) {
  if (mu <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(mu)(rng);
}

struct SimulationStats {
  std::size_t clamped = 0;  // draws that exceeded coverage and were cut back to it
};

/// Draws a dataset with the template's coverages and rates and the scenario's
/// effects. Each gene uses its own substream keyed by (seed, gene_id).
inline Dataset simulate_dataset(const Scenario& scn, const Dataset& tmpl, std::uint64_t seed,
                                SimulationStats* stats = nullptr, unsigned threads = 1) {
  if (scn.theta.size() != tmpl.n_genes())
    fail(errc::length_mismatch, "scenario has " + std::to_string(scn.theta.size()) + " genes, template has " +
                                    std::to_string(tmpl.n_genes()));
  Dataset out;
  out.rates = tmpl.rates;
  out.meta = tmpl.meta;
  out.genes.resize(tmpl.n_genes());
  std::vector<std::size_t> clamped(tmpl.n_genes(), 0);
  const auto& rates = tmpl.rates;

  parallel_for(tmpl.n_genes(), threads, [&](std::size_t gi) {
    const GeneRecord& src = tmpl.genes[gi];
    GeneRecord& g = out.genes[gi];
    g.gene_id = src.gene_id;
    g.cov1 = src.cov1;
    g.cov2 = src.cov2;
    g.x1.assign(rates.size(), 0);
    g.x2.assign(rates.size(), 0);
    splitmix64 rng(gene_stream_key(seed, src.gene_id));
    const double theta = scn.theta[gi];
    std::int64_t total1 = 0;
    for (std::size_t m = 0; m < rates.size(); ++m) {
      auto x = draw_poisson(rng, rates[m].gamma1 * theta * static_cast<double>(src.cov1[m]));
      if (x > src.cov1[m]) {
        x = src.cov1[m];
        ++clamped[gi];
      }
      g.x1[m] = x;
      total1 += x;
    }
    if (total1 == 0) return;
    for (std::size_t m = 0; m < rates.size(); ++m) {
      auto x = draw_poisson(rng, rates[m].gamma2 * theta * static_cast<double>(src.cov2[m]));
      if (x > src.cov2[m]) {
        x = src.cov2[m];
        ++clamped[gi];
      }
      g.x2[m] = x;
    }
  });

  if (stats)
    for (auto c : clamped) stats->clamped += c;
  return out;
}

/// All-passenger scenario aligned with `ds`.
inline Scenario null_scenario(const Dataset& ds) {
  Scenario s;
  s.theta.assign(ds.n_genes(), 1.0);
  return s;
}

}  // namespace somfdr
