#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"
#include "somfdr/genmodel.hpp"
#include "somfdr/rng.hpp"

// Synthetic study designs and scenario collections with known truth, for tests,
// benchmarks and demos.
namespace somfdr::synthetic {

struct Design {
  std::size_t genes = 2000;
  std::size_t types = 5;
  std::int64_t tumors_stage1 = 11;
  std::int64_t tumors_stage2 = 24;
  double mean_length = 1500.0;   // sequenced nucleotides per gene per tumor
  double length_sdlog = 0.6;
  /// Average expected discovery-stage passenger mutations per gene.
  double mean_discovery_exposure = 0.04;
  double stage2_rate_ratio = 1.0;  // gamma2 / gamma1
  std::uint64_t seed = 1;
};

/// Relative passenger rates across types; the first type plays the role of
/// the hypermutable CpG transitions.
inline double relative_rate(std::size_t m) {
  static constexpr double w[] = {4.0, 1.0, 0.8, 0.6, 0.5, 1.5, 0.7, 0.4, 0.9, 0.3};
  return w[m % 10];
}

/// Template dataset: coverages from the design, all counts zero.
inline Dataset make_template(const Design& d) {
  if (d.genes == 0 || d.types == 0) fail(errc::input, "design needs genes and types");
  splitmix64 rng(derive_seed(d.seed, 0x7465));
  std::lognormal_distribution<double> length(std::log(d.mean_length) - 0.5 * d.length_sdlog * d.length_sdlog,
                                             d.length_sdlog);
  std::vector<double> base_frac(d.types);
  for (std::size_t m = 0; m < d.types; ++m) base_frac[m] = 1.0 + 0.5 * static_cast<double>(m % 3);
  const double tot = std::accumulate(base_frac.begin(), base_frac.end(), 0.0);
  for (auto& f : base_frac) f /= tot;

  Dataset ds;
  ds.meta = {d.tumors_stage1, d.tumors_stage2, "synthetic design"};
  ds.genes.resize(d.genes);
  double weighted = 0.0;
  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  std::uniform_real_distribution<double> quality(0.85, 1.0);
  for (std::size_t g = 0; g < d.genes; ++g) {
    auto& gene = ds.genes[g];
    gene.gene_id = "G" + std::to_string(g + 1);
    const double len = length(rng);
    const double q1 = quality(rng), q2 = quality(rng);
    gene.cov1.resize(d.types);
    gene.cov2.resize(d.types);
    gene.x1.assign(d.types, 0);
    gene.x2.assign(d.types, 0);
    for (std::size_t m = 0; m < d.types; ++m) {
      const double nt = len * base_frac[m] * jitter(rng);
      gene.cov1[m] = std::llround(nt * static_cast<double>(d.tumors_stage1) * q1);
      gene.cov2[m] = std::llround(nt * static_cast<double>(d.tumors_stage2) * q2);
      weighted += relative_rate(m) * static_cast<double>(gene.cov1[m]);
    }
  }
  const double scale = d.mean_discovery_exposure * static_cast<double>(d.genes) / weighted;
  std::vector<MutationType> types;
  for (std::size_t m = 0; m < d.types; ++m) {
    const double g1 = scale * relative_rate(m);
    types.push_back({"type" + std::to_string(m + 1), g1, g1 * d.stage2_rate_ratio});
  }
  ds.rates = MutationTypeTable(std::move(types));
  return ds;
}

struct EffectPrior {
  double shape = 0.8;  // theta - 1 ~ Gamma(shape, mean)
  double mean = 15.0;
};

/// Scenarios with exactly round(driver_fraction * genes) drivers at random
/// positions and effects 1 + Gamma.
inline std::vector<Scenario> two_groups_scenarios(std::size_t genes, std::size_t count, double driver_fraction,
                                                  const EffectPrior& effect, std::uint64_t seed) {
  const auto n_drivers = static_cast<std::size_t>(std::llround(driver_fraction * static_cast<double>(genes)));
  std::vector<Scenario> out(count);
  for (std::size_t s = 0; s < count; ++s) {
    splitmix64 rng(derive_seed(seed, s));
    std::gamma_distribution<double> gamma(effect.shape, effect.mean / effect.shape);
    std::vector<std::size_t> idx(genes);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n_drivers; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, genes - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    auto& scn = out[s];
    scn.theta.assign(genes, 1.0);
    for (std::size_t i = 0; i < n_drivers; ++i) {
      double t = 1.0 + gamma(rng);
      if (t == 1.0) t = 1.0 + 1e-12;
      scn.theta[idx[i]] = t;
    }
    scn.origin = {static_cast<std::int64_t>(s), seed};
  }
  return out;
}

/// An "observed" dataset drawn from one two-groups scenario.
inline Dataset observed_dataset(const Dataset& tmpl, double driver_fraction, const EffectPrior& effect,
                                std::uint64_t seed) {
  auto scn = two_groups_scenarios(tmpl.n_genes(), 1, driver_fraction, effect, seed);
  return simulate_dataset(scn.front(), tmpl, derive_seed(seed, 0x6f6273));
}

}  // namespace somfdr::synthetic
