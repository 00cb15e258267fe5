#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"
#include "somfdr/genmodel.hpp"
#include "somfdr/numeric.hpp"
#include "somfdr/rng.hpp"

// Dirichlet-process mixture over gene effects with a spiked base measure
//   A = total_mass * (pi0 * delta_1 + (1 - pi0) * (1 + Gamma(shape, rate))).
// Because every gene likelihood is C * theta^n * exp(-S * theta), integrals of
// products of likelihoods against A reduce to finite gamma-function sums.
namespace somfdr {

struct SpikedBaseMeasure {
  double total_mass = 1.0;
  double spike_fraction = 0.5;
  double shape = 1.0;
  double rate = 1.0;

  void validate() const {
    if (!(total_mass > 0.0) || !std::isfinite(total_mass)) fail(errc::domain, "total_mass must be positive");
    if (!(spike_fraction > 0.0 && spike_fraction < 1.0)) fail(errc::domain, "spike_fraction must lie in (0, 1)");
    if (!(shape > 0.0) || !std::isfinite(shape)) fail(errc::domain, "shape must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate)) fail(errc::domain, "rate must be positive");
  }

  /// Mean and variance of the normalized base (the centering distribution).
  double centering_mean() const { return 1.0 + (1.0 - spike_fraction) * shape / rate; }
  double centering_variance() const {
    const double m = shape / rate, v = shape / (rate * rate);
    const double second = (1.0 - spike_fraction) * (v + m * m);
    const double shift = (1.0 - spike_fraction) * m;
    return second - shift * shift;
  }
};

/// Discrete estimate of the mixing distribution of gene effects.
struct MixingEstimate {
  std::vector<double> support;
  std::vector<double> weights;
  double loglik = 0.0;
  int iterations = 0;

  double mass_below(double upper) const {
    double s = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k)
      if (support[k] < upper) s += weights[k];
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) s += weights[k] * support[k];
    return s;
  }
  double variance() const {
    const double mu = mean();
    double s = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) s += weights[k] * (support[k] - mu) * (support[k] - mu);
    return s;
  }
};

inline std::vector<double> geometric_grid(double lo = 1.0, double hi = 1e3, std::size_t n = 200) {
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k)
    grid[k] = k == 0 ? lo : (k + 1 == n ? hi : lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
  return grid;
}

struct NpmleOptions {
  double tol = 1e-8;
  int max_iter = 5000;
  double prune_below = 1e-8;
};

/// Fixed-support NPMLE of the effect distribution by EM.
inline MixingEstimate npmle_fit(const Dataset& ds, std::span<const double> grid, const NpmleOptions& opt = {}) {
  if (grid.empty()) fail(errc::input, "NPMLE grid is empty");
  if (grid.front() != 1.0) fail(errc::domain, "NPMLE grid must start at 1");
  if (!(opt.tol > 0.0)) fail(errc::domain, "NPMLE tolerance must be positive");
  const std::size_t n_genes = ds.n_genes(), n_grid = grid.size();
  MixingEstimate out;
  if (n_genes == 0) {
    out.support = {1.0};
    out.weights = {1.0};
    return out;
  }

  // Likelihood matrix scaled by each gene's row maximum.
  std::vector<double> lik(n_genes * n_grid);
  std::vector<double> log_grid(n_grid);
  for (std::size_t k = 0; k < n_grid; ++k) log_grid[k] = std::log(grid[k]);
  double offset = 0.0;
  for (std::size_t g = 0; g < n_genes; ++g) {
    const auto s = suff_stats(ds.genes[g], ds.rates);
    double* row = &lik[g * n_grid];
    double mx = numeric::kNegInf;
    for (std::size_t k = 0; k < n_grid; ++k) {
      row[k] = static_cast<double>(s.n) * log_grid[k] - s.exposure * grid[k];
      mx = std::max(mx, row[k]);
    }
    if (!std::isfinite(mx)) fail(errc::numeric, "non-finite likelihood for gene '" + ds.genes[g].gene_id + "'");
    for (std::size_t k = 0; k < n_grid; ++k) row[k] = std::exp(row[k] - mx);
    offset += mx + s.log_const;
  }

  std::vector<double> w(n_grid, 1.0 / static_cast<double>(n_grid)), acc(n_grid);
  double prev = numeric::kNegInf;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double ll = offset;
    for (std::size_t g = 0; g < n_genes; ++g) {
      const double* row = &lik[g * n_grid];
      double denom = 0.0;
      for (std::size_t k = 0; k < n_grid; ++k) denom += w[k] * row[k];
      ll += std::log(denom);
      const double inv = 1.0 / denom;
      for (std::size_t k = 0; k < n_grid; ++k) acc[k] += row[k] * inv;
    }
    if (!std::isfinite(ll)) fail(errc::numeric, "NPMLE log-likelihood is not finite");
    for (std::size_t k = 0; k < n_grid; ++k) w[k] *= acc[k] / static_cast<double>(n_genes);
    out.loglik = ll;  // at the weights used in this pass
    if (ll - prev < opt.tol) {
      ++it;
      break;
    }
    prev = ll;
  }
  out.iterations = it;

  double kept = 0.0;
  for (std::size_t k = 0; k < n_grid; ++k)
    if (w[k] >= opt.prune_below) kept += w[k];
  for (std::size_t k = 0; k < n_grid; ++k) {
    if (w[k] < opt.prune_below) continue;
    out.support.push_back(grid[k]);
    out.weights.push_back(w[k] / kept);
  }
  return out;
}

/// Centers the base measure on `fhat`: the spike weight is the estimated mass
/// in [1, spike_window), and the gamma part is chosen so the centering
/// distribution has the same mean and variance as `fhat`.
inline SpikedBaseMeasure elicit_base_measure(const MixingEstimate& fhat, double total_mass,
                                             double spike_window = 2.0) {
  if (fhat.support.empty()) fail(errc::input, "empty mixing estimate");
  const double pi0 = fhat.mass_below(spike_window);
  if (!(pi0 > 0.0)) fail(errc::infeasible, "spike mass: no estimated mass below the spike window");
  if (!(pi0 < 1.0)) fail(errc::infeasible, "spike mass: no estimated mass at or above the spike window");
  const double mu = fhat.mean(), var = fhat.variance();
  const double cont_mean = (mu - 1.0) / (1.0 - pi0);
  if (!(cont_mean > 0.0)) fail(errc::infeasible, "mean: estimated mean does not exceed 1");
  const double cont_second = (var + (mu - 1.0) * (mu - 1.0)) / (1.0 - pi0);
  const double cont_var = cont_second - cont_mean * cont_mean;
  if (!(cont_var > 1e-12 * cont_second))
    fail(errc::infeasible, "variance: continuous part has non-positive variance after spike subtraction");
  SpikedBaseMeasure base;
  base.total_mass = total_mass;
  base.spike_fraction = pi0;
  base.shape = cont_mean * cont_mean / cont_var;
  base.rate = cont_mean / cont_var;
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Cluster marginals. For a set of genes with n total counts and exposure S,
//   int theta^n e^{-S theta} dA/|A| = pi0 e^{-S} + (1 - pi0) e^{-S} sum_k choose(n,k)
//       rate^shape Gamma(shape + k) / (Gamma(shape) (rate + S)^(shape + k)).

/// Log of term k of the gamma-part sum (the weights of the posterior mixture of gammas).
inline void continuous_terms(std::int64_t n, double exposure, const SpikedBaseMeasure& base, std::vector<double>& terms) {
  terms.resize(static_cast<std::size_t>(n) + 1);
  const double a = base.rate, b = base.shape;
  const double head = b * std::log(a) - numeric::log_gamma(b);
  const double log_as = std::log(a + exposure);
  for (std::int64_t k = 0; k <= n; ++k)
    terms[static_cast<std::size_t>(k)] = numeric::log_choose(n, k) + head + numeric::log_gamma(b + static_cast<double>(k)) -
                                         (b + static_cast<double>(k)) * log_as;
}

/// log int theta^n e^{-S theta} over the shifted-gamma part (normalized).
inline double log_continuous_kernel(std::int64_t n, double exposure, const SpikedBaseMeasure& base) {
  std::vector<double> terms;
  continuous_terms(n, exposure, base, terms);
  return -exposure + numeric::log_sum_exp(terms);
}

/// log of the kernel integrated against the normalized base (spike plus gamma part).
inline double log_marginal_kernel(std::int64_t n, double exposure, const SpikedBaseMeasure& base) {
  return numeric::log_add_exp(std::log(base.spike_fraction) - exposure,
                              std::log1p(-base.spike_fraction) + log_continuous_kernel(n, exposure, base));
}

/// Log marginal likelihood of a set of genes sharing one effect drawn from the
/// normalized base measure.
inline double cluster_marginal_loglik(std::span<const GeneRecord> genes, const MutationTypeTable& rates,
                                      const SpikedBaseMeasure& base) {
  if (genes.empty()) fail(errc::input, "cluster must contain at least one gene");
  std::int64_t n = 0;
  double exposure = 0.0, log_const = 0.0;
  for (const auto& g : genes) {
    const auto s = suff_stats(g, rates);
    n += s.n;
    exposure += s.exposure;
    log_const += s.log_const;
  }
  return log_const + log_marginal_kernel(n, exposure, base);
}

/// Draws a cluster effect from its conditional posterior given n total counts
/// and exposure S: the spike with its exact posterior odds, otherwise an exact
/// draw from the gamma mixture (1 + u, u ~ sum_k w_k Gamma(shape + k, rate + S)).
inline double draw_cluster_theta(std::int64_t n, double exposure, const SpikedBaseMeasure& base, splitmix64& rng,
                                 std::vector<double>& scratch) {
  continuous_terms(n, exposure, base, scratch);
  const double log_cont = numeric::log_sum_exp(scratch);
  const double log_spike = std::log(base.spike_fraction);
  const double log_gamma_part = std::log1p(-base.spike_fraction) + log_cont;
  const double p_spike = std::exp(log_spike - numeric::log_add_exp(log_spike, log_gamma_part));
  if (rng.uniform() < p_spike) return 1.0;

  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < scratch.size(); ++k) {
    u -= std::exp(scratch[k] - log_cont);
    if (u < 0.0) break;
  }
  std::gamma_distribution<double> gamma(base.shape + static_cast<double>(k), 1.0 / (base.rate + exposure));
  double theta = 1.0 + gamma(rng);
  if (theta == 1.0) theta = 1.0 + 1e-12;
  return theta;
}

// ---------------------------------------------------------------------------
// Polya-urn Gibbs sampler.

/// One retained draw. Cluster 0 is the spike (theta exactly 1, possibly empty);
/// clusters 1.. have theta > 1.
struct PosteriorState {
  std::vector<std::uint32_t> assignment;
  std::vector<double> cluster_theta;
  std::int64_t iteration = 0;

  double theta_of(std::size_t gene) const { return cluster_theta[assignment[gene]]; }
  std::size_t n_drivers() const {
    std::size_t n = 0;
    for (auto c : assignment) n += c != 0;
    return n;
  }
};

struct ChainTrace {
  std::int64_t iteration = 0;
  std::size_t n_clusters = 0;  // occupied clusters, spike counted once
  std::size_t n_drivers = 0;
  double log_posterior = 0.0;
};

struct McmcOptions {
  std::int64_t iters = 3000;
  std::int64_t burnin = 2000;
  std::int64_t thin = 10;
  std::uint64_t seed = 0;
};

inline std::int64_t retained_states(const McmcOptions& o) { return (o.iters - o.burnin) / o.thin; }

namespace detail {

struct Block {
  std::size_t size = 0;
  std::int64_t n = 0;
  double exposure = 0.0;
  double theta = 1.0;
  double log_theta = 0.0;
};

inline double log_base_density(double theta, const SpikedBaseMeasure& base) {
  if (theta == 1.0) return std::log(base.spike_fraction);
  const double u = theta - 1.0;
  return std::log1p(-base.spike_fraction) + base.shape * std::log(base.rate) - numeric::log_gamma(base.shape) +
         (base.shape - 1.0) * std::log(u) - base.rate * u;
}

}  // namespace detail

/// Gibbs sampler on (partition, cluster effects). Each sweep reassigns every
/// gene (existing cluster c with weight size_c * L_g(theta_c), a fresh cluster
/// with weight total_mass * marginal_g) and then redraws every cluster effect
/// from its conditional posterior, which may land on the spike. Several
/// internal clusters may sit at theta = 1; emitted states merge them.
inline void run_mcmc(const Dataset& ds, const SpikedBaseMeasure& base, const McmcOptions& opt,
                     const std::function<void(const PosteriorState&)>& on_state,
                     const std::function<void(const ChainTrace&)>& on_trace = {}) {
  base.validate();
  if (opt.burnin < 0) fail(errc::input, "burn-in must be non-negative");
  if (opt.iters <= opt.burnin) fail(errc::input, "iterations must exceed burn-in");
  if (opt.thin < 1) fail(errc::input, "thinning interval must be at least 1");

  const std::size_t n_genes = ds.n_genes();
  std::vector<GeneSuffStats> stats(n_genes);
  std::vector<double> log_fresh(n_genes);  // log(total_mass * marginal kernel)
  double log_const_total = 0.0;
  for (std::size_t g = 0; g < n_genes; ++g) {
    stats[g] = suff_stats(ds.genes[g], ds.rates);
    log_fresh[g] = std::log(base.total_mass) + log_marginal_kernel(stats[g].n, stats[g].exposure, base);
    log_const_total += stats[g].log_const;
  }

  splitmix64 rng(derive_seed(opt.seed, 0x6d636d63ULL));
  std::vector<detail::Block> blocks;
  std::vector<std::size_t> free_slots;
  std::vector<std::size_t> assign(n_genes, 0);
  if (n_genes > 0) {
    detail::Block all;
    for (const auto& s : stats) {
      ++all.size;
      all.n += s.n;
      all.exposure += s.exposure;
    }
    blocks.push_back(all);
  }

  std::vector<double> logw;
  std::vector<std::size_t> candidates;
  std::vector<double> scratch;

  auto new_block = [&]() -> std::size_t {
    if (!free_slots.empty()) {
      auto id = free_slots.back();
      free_slots.pop_back();
      blocks[id] = detail::Block{};
      return id;
    }
    blocks.emplace_back();
    return blocks.size() - 1;
  };

  PosteriorState state;
  std::vector<std::uint32_t> relabel;

  for (std::int64_t it = 1; it <= opt.iters; ++it) {
    // (a) reassignment scan
    for (std::size_t g = 0; g < n_genes; ++g) {
      const auto& s = stats[g];
      {
        auto& b = blocks[assign[g]];
        --b.size;
        b.n -= s.n;
        b.exposure -= s.exposure;
        if (b.size == 0) free_slots.push_back(assign[g]);
      }
      logw.clear();
      candidates.clear();
      for (std::size_t c = 0; c < blocks.size(); ++c) {
        const auto& b = blocks[c];
        if (b.size == 0) continue;
        candidates.push_back(c);
        logw.push_back(std::log(static_cast<double>(b.size)) + static_cast<double>(s.n) * b.log_theta -
                       s.exposure * b.theta);
      }
      logw.push_back(log_fresh[g]);
      const double total = numeric::log_sum_exp(logw);
      double u = rng.uniform();
      std::size_t pick = logw.size() - 1;
      for (std::size_t j = 0; j + 1 < logw.size(); ++j) {
        u -= std::exp(logw[j] - total);
        if (u < 0.0) {
          pick = j;
          break;
        }
      }
      std::size_t target;
      if (pick + 1 == logw.size()) {
        target = new_block();
        const double theta = draw_cluster_theta(s.n, s.exposure, base, rng, scratch);
        blocks[target].theta = theta;
        blocks[target].log_theta = std::log(theta);
      } else {
        target = candidates[pick];
      }
      auto& b = blocks[target];
      ++b.size;
      b.n += s.n;
      b.exposure += s.exposure;
      assign[g] = target;
    }
    // (b) cluster effects; block totals rebuilt so incremental updates cannot drift
    for (auto& b : blocks) {
      b.n = 0;
      b.exposure = 0.0;
    }
    for (std::size_t g = 0; g < n_genes; ++g) {
      blocks[assign[g]].n += stats[g].n;
      blocks[assign[g]].exposure += stats[g].exposure;
    }
    for (auto& b : blocks) {
      if (b.size == 0) continue;
      b.theta = draw_cluster_theta(b.n, b.exposure, base, rng, scratch);
      b.log_theta = std::log(b.theta);
    }

    const bool emit = it > opt.burnin && (it - opt.burnin) % opt.thin == 0;
    if (!emit && !on_trace) continue;

    // Merge spike blocks into cluster 0, number the rest by block index.
    relabel.assign(blocks.size(), 0);
    state.cluster_theta.assign(1, 1.0);
    bool spike_used = false;
    for (std::size_t c = 0; c < blocks.size(); ++c) {
      if (blocks[c].size == 0) continue;
      if (blocks[c].theta == 1.0) {
        spike_used = true;
        continue;
      }
      relabel[c] = static_cast<std::uint32_t>(state.cluster_theta.size());
      state.cluster_theta.push_back(blocks[c].theta);
    }
    state.assignment.resize(n_genes);
    std::size_t drivers = 0;
    for (std::size_t g = 0; g < n_genes; ++g) {
      state.assignment[g] = relabel[assign[g]];
      drivers += state.assignment[g] != 0;
    }
    state.iteration = it;

    if (on_trace) {
      ChainTrace tr;
      tr.iteration = it;
      tr.n_clusters = state.cluster_theta.size() - 1 + (spike_used ? 1 : 0);
      tr.n_drivers = drivers;
      double lp = log_const_total;
      std::size_t k = 0;
      for (const auto& b : blocks) {
        if (b.size == 0) continue;
        ++k;
        lp += static_cast<double>(b.n) * b.log_theta - b.exposure * b.theta;
        lp += numeric::log_gamma(static_cast<double>(b.size)) + detail::log_base_density(b.theta, base);
      }
      lp += static_cast<double>(k) * std::log(base.total_mass) -
            (numeric::log_gamma(base.total_mass + static_cast<double>(n_genes)) - numeric::log_gamma(base.total_mass));
      tr.log_posterior = lp;
      on_trace(tr);
    }
    if (emit) on_state(state);
  }
}

inline std::vector<PosteriorState> run_mcmc(const Dataset& ds, const SpikedBaseMeasure& base, const McmcOptions& opt) {
  std::vector<PosteriorState> out;
  run_mcmc(ds, base, opt, [&](const PosteriorState& s) { out.push_back(s); });
  return out;
}

inline Scenario export_scenario(const PosteriorState& state, const Dataset& ds, std::uint64_t seed) {
  if (state.assignment.size() != ds.n_genes())
    fail(errc::length_mismatch, "posterior state does not match the dataset");
  Scenario s;
  s.gene_ids.reserve(ds.n_genes());
  s.theta.resize(ds.n_genes());
  for (std::size_t g = 0; g < ds.n_genes(); ++g) {
    s.gene_ids.push_back(ds.genes[g].gene_id);
    s.theta[g] = state.theta_of(g);
  }
  s.origin = {state.iteration, seed};
  return s;
}

inline std::vector<Scenario> export_scenarios(std::span<const PosteriorState> states, const Dataset& ds,
                                              std::uint64_t seed) {
  if (states.empty()) fail(errc::input, "no posterior states to export");
  std::vector<Scenario> out;
  out.reserve(states.size());
  for (const auto& st : states) out.push_back(export_scenario(st, ds, seed));
  return out;
}

struct DriverCountSummary {
  double mean = 0.0;
  double p05 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
  std::size_t n_states = 0;
};

inline DriverCountSummary summarize_driver_counts(std::vector<double> counts) {
  if (counts.empty()) fail(errc::input, "no posterior states");
  std::sort(counts.begin(), counts.end());
  DriverCountSummary s;
  s.n_states = counts.size();
  s.mean = numeric::mean(counts);
  s.p05 = numeric::quantile_sorted(counts, 0.05);
  s.p25 = numeric::quantile_sorted(counts, 0.25);
  s.p50 = numeric::quantile_sorted(counts, 0.50);
  s.p75 = numeric::quantile_sorted(counts, 0.75);
  s.p95 = numeric::quantile_sorted(counts, 0.95);
  return s;
}

inline DriverCountSummary posterior_driver_count(std::span<const PosteriorState> states) {
  std::vector<double> counts;
  counts.reserve(states.size());
  for (const auto& s : states) counts.push_back(static_cast<double>(s.n_drivers()));
  return summarize_driver_counts(std::move(counts));
}

}  // namespace somfdr
