#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <array>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "somfdr/domain.hpp"
#include "somfdr/error.hpp"
#include "somfdr/genmodel.hpp"
#include "somfdr/io.hpp"
#include "somfdr/numeric.hpp"
#include "somfdr/parallel.hpp"
#include "somfdr/rng.hpp"

namespace somfdr {

enum class ScoreKind { camp, tailp_two_stage, tailp_single_stage, loglik_ratio, pg_prob };

inline constexpr std::array<ScoreKind, 5> kAllScoreKinds = {ScoreKind::camp, ScoreKind::tailp_two_stage,
                                                            ScoreKind::tailp_single_stage, ScoreKind::loglik_ratio,
                                                            ScoreKind::pg_prob};

constexpr std::string_view to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::camp: return "camp";
    case ScoreKind::tailp_two_stage: return "tailp_two_stage";
    case ScoreKind::tailp_single_stage: return "tailp_single_stage";
    case ScoreKind::loglik_ratio: return "loglik_ratio";
    case ScoreKind::pg_prob: return "pg_prob";
  }
  return "?";
}

inline ScoreKind parse_score_kind(std::string_view s) {
  for (auto k : kAllScoreKinds)
    if (to_string(k) == s) return k;
  fail(errc::input, "unknown score kind '" + std::string(s) + "'");
}

/// Whether the kind's values are probabilities (small = extreme) rather than scores (large = extreme).
constexpr bool is_probability(ScoreKind k) {
  return k == ScoreKind::tailp_two_stage || k == ScoreKind::tailp_single_stage || k == ScoreKind::pg_prob;
}

/// Maps a raw value to a common orientation where larger means more driver-like.
inline double extremity(ScoreKind k, double value) {
  switch (k) {
    case ScoreKind::camp: return value;
    case ScoreKind::loglik_ratio: return -value;
    default: return value > 0.0 ? -std::log(value) : std::numeric_limits<double>::infinity();
  }
}

struct GeneScore {
  std::string gene_id;
  ScoreKind kind = ScoreKind::camp;
  double value = 0.0;
  std::size_t rank = 0;  // 1 = most extreme; for camp this is the rank q_g of p_g
};

// ---------------------------------------------------------------------------
// Binomial passenger probability p_g.

inline double log_binom_choose(std::int64_t n, std::int64_t k) {
  if (k < 32) {
    double s = -numeric::log_factorial(k);
    for (std::int64_t i = 0; i < k; ++i) s += std::log(static_cast<double>(n - i));
    return s;
  }
  return numeric::log_choose(n, k);
}

inline double log_binom_pmf(std::int64_t x, std::int64_t n, double p) {
  return log_binom_choose(n, x) + static_cast<double>(x) * std::log(p) + static_cast<double>(n - x) * std::log1p(-p);
}

inline double log_pg_probability(const GeneRecord& g, const MutationTypeTable& rates) {
  const auto n1 = g.total_x1(), n2 = g.total_x2();
  double s = 0.0;
  if (n1 + n2 == 0) {
    for (std::size_t m = 0; m < rates.size(); ++m) s += log_binom_pmf(0, g.cov1[m], rates[m].gamma1);
    return s;
  }
  if (n1 > 0) {
    for (std::size_t m = 0; m < rates.size(); ++m) {
      s += log_binom_pmf(g.x1[m], g.cov1[m], rates[m].gamma1);
      s += log_binom_pmf(g.x2[m], g.cov2[m], rates[m].gamma2);
    }
    return s;
  }
  return numeric::kNegInf;  // validation mutations without discovery ones: excluded by ingestion
}

inline double pg_probability(const GeneRecord& g, const MutationTypeTable& rates) {
  return std::exp(log_pg_probability(g, rates));
}

/// CaMP from precomputed log p_g: ranks ascending in p_g (ties by gene id),
/// then -log10(p_g / q_g) for validated genes and -inf for the rest.
inline std::vector<GeneScore> camp_from_log_pg(std::span<const std::string> ids, std::span<const double> log_pg,
                                               std::span<const bool> validated) {
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (log_pg[a] != log_pg[b]) return log_pg[a] < log_pg[b];
    return ids[a] < ids[b];
  });
  std::vector<GeneScore> out(n);
  const double ln10 = std::log(10.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = order[r];
    const std::size_t q = r + 1;
    out[g].gene_id = ids[g];
    out[g].kind = ScoreKind::camp;
    out[g].rank = q;
    out[g].value = validated[g] ? (std::log(static_cast<double>(q)) - log_pg[g]) / ln10 : numeric::kNegInf;
  }
  return out;
}

inline std::vector<GeneScore> camp_scores(const Dataset& ds) {
  const std::size_t n = ds.n_genes();
  std::vector<std::string> ids(n);
  std::vector<double> log_pg(n);
  auto validated = std::make_unique<bool[]>(n);
  for (std::size_t g = 0; g < n; ++g) {
    ids[g] = ds.genes[g].gene_id;
    log_pg[g] = log_pg_probability(ds.genes[g], ds.rates);
    validated[g] = ds.genes[g].total_x2() > 0;
  }
  return camp_from_log_pg(ids, log_pg, std::span<const bool>(validated.get(), n));
}

// ---------------------------------------------------------------------------
// Aggregate tail probabilities. Two-stage: N = N1 + 1{N1 > 0} N2 with
// N1 ~ Poisson(L1), N2 ~ Poisson(L2). For n >= 1,
//   P(N >= n) = sum_{k=1}^{n-1} P(N1 = k) P(N2 >= n - k) + P(N1 >= n).

/// P(N >= n) (or the mid-p value P(N > n) + P(N = n) / 2), floored at the
/// smallest normal double so extreme counts never produce a zero p-value.
inline double tail_probability(std::int64_t n_obs, double lambda1, double lambda2, bool two_stage, bool mid_p = false) {
  if (!(lambda1 > 0.0)) fail(errc::domain, "discovery exposure must be positive");
  auto clamp = [](double p) { return std::clamp(p, std::numeric_limits<double>::min(), 1.0); };
  if (!two_stage) {
    const double mu = lambda1 + lambda2;
    if (!mid_p) return clamp(numeric::poisson_tail_ge(n_obs, mu));
    return clamp(numeric::poisson_tail_ge(n_obs + 1, mu) + 0.5 * numeric::poisson_pmf(n_obs, mu));
  }
  auto ge = [&](std::int64_t n) {
    if (n <= 0) return 1.0;
    double p = numeric::poisson_tail_ge(n, lambda1);
    for (std::int64_t k = 1; k < n; ++k)
      p += numeric::poisson_pmf(k, lambda1) * numeric::poisson_tail_ge(n - k, lambda2);
    return p;
  };
  if (!mid_p) return clamp(ge(n_obs));
  double eq = 0.0;
  if (n_obs == 0) eq = std::exp(-lambda1);
  else
    for (std::int64_t k = 1; k <= n_obs; ++k)
      eq += numeric::poisson_pmf(k, lambda1) * numeric::poisson_pmf(n_obs - k, lambda2);
  return clamp(ge(n_obs + 1) + 0.5 * eq);
}

inline double tail_pvalue(const GeneRecord& g, const MutationTypeTable& rates, bool two_stage, bool mid_p = false) {
  check_screening(g);
  const auto e = exposure(g, rates);
  return tail_probability(g.total_x1() + g.total_x2(), e.stage1, e.stage2, two_stage, mid_p);
}

/// log L(1) - log L(theta_hat); zero when the gene has no exposure at all.
inline double loglik_ratio(const GeneRecord& g, const MutationTypeTable& rates) {
  const auto s = suff_stats(g, rates);
  if (s.exposure == 0.0) return 0.0;
  const double n = static_cast<double>(s.n);
  if (s.n == 0) return -s.exposure;
  return std::min(0.0, n - s.exposure - n * std::log(n / s.exposure));
}

struct ScoreOptions {
  bool mid_p = false;  // tail p-values only
  unsigned threads = 1;
};

/// Scores every gene of `ds`; ranks order genes by extremity (ties by id),
/// except camp, whose rank is q_g.
inline std::vector<GeneScore> score_dataset(const Dataset& ds, ScoreKind kind, const ScoreOptions& opt = {}) {
  if (kind == ScoreKind::camp) return camp_scores(ds);
  const std::size_t n = ds.n_genes();
  std::vector<GeneScore> out(n);
  parallel_for(n, opt.threads, [&](std::size_t g) {
    const auto& gene = ds.genes[g];
    out[g].gene_id = gene.gene_id;
    out[g].kind = kind;
    switch (kind) {
      case ScoreKind::tailp_two_stage:
      case ScoreKind::tailp_single_stage: {
        const auto e = exposure(gene, ds.rates);
        out[g].value = e.stage1 > 0.0 ? tail_pvalue(gene, ds.rates, kind == ScoreKind::tailp_two_stage, opt.mid_p) : 1.0;
        break;
      }
      case ScoreKind::loglik_ratio: out[g].value = loglik_ratio(gene, ds.rates); break;
      case ScoreKind::pg_prob: out[g].value = pg_probability(gene, ds.rates); break;
      case ScoreKind::camp: break;
    }
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = extremity(kind, out[a].value), eb = extremity(kind, out[b].value);
    if (ea != eb) return ea > eb;
    return out[a].gene_id < out[b].gene_id;
  });
  for (std::size_t r = 0; r < n; ++r) out[order[r]].rank = r + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo null distributions.

struct NullSample {
  ScoreKind kind = ScoreKind::camp;
  std::size_t reps = 0;
  std::vector<double> extremity_sorted;        // pooled over replicates and genes, ascending
  std::vector<std::size_t> screened_in;        // per replicate
  std::vector<double> values;                  // pooled raw values, replicate-major order

  std::size_t size() const noexcept { return extremity_sorted.size(); }
};

/// Scores `reps` all-passenger datasets drawn over the template's coverages.
inline NullSample null_score_sample(const Dataset& tmpl, ScoreKind kind, std::int64_t reps, std::uint64_t seed,
                                    const ScoreOptions& opt = {}) {
  if (reps < 1) fail(errc::input, "null sample needs at least one replicate");
  const auto r = static_cast<std::size_t>(reps);
  const auto null = null_scenario(tmpl);
  std::vector<std::vector<double>> per_rep(r);
  NullSample out;
  out.kind = kind;
  out.reps = r;
  out.screened_in.assign(r, 0);
  ScoreOptions inner = opt;
  inner.threads = 1;
  parallel_for(r, opt.threads, [&](std::size_t i) {
    const auto ds = simulate_dataset(null, tmpl, derive_seed(seed, i));
    const auto scores = score_dataset(ds, kind, inner);
    per_rep[i].reserve(scores.size());
    for (const auto& s : scores) per_rep[i].push_back(s.value);
    for (const auto& g : ds.genes) out.screened_in[i] += g.screened_in();
  });
  out.values.reserve(r * tmpl.n_genes());
  for (const auto& v : per_rep) out.values.insert(out.values.end(), v.begin(), v.end());
  out.extremity_sorted.reserve(out.values.size());
  for (double v : out.values) out.extremity_sorted.push_back(extremity(kind, v));
  std::sort(out.extremity_sorted.begin(), out.extremity_sorted.end());
  return out;
}

/// Add-one Monte Carlo p-value: (1 + #{null at least as extreme}) / (1 + #null).
inline double mc_pvalue(double value, const NullSample& null) {
  if (null.extremity_sorted.empty()) fail(errc::input, "empty null sample");
  const double e = extremity(null.kind, value);
  const auto& xs = null.extremity_sorted;
  const auto at_least = static_cast<double>(xs.end() - std::lower_bound(xs.begin(), xs.end(), e));
  return (1.0 + at_least) / (1.0 + static_cast<double>(xs.size()));
}

// ---------------------------------------------------------------------------
// Score files: `gene_id,kind,value,rank`, -inf written as `-inf`.

inline void write_scores(std::ostream& out, std::span<const GeneScore> scores) {
  out << "gene_id,kind,value,rank\n";
  for (const auto& s : scores)
    out << s.gene_id << ',' << to_string(s.kind) << ',' << io::format_double(s.value) << ',' << s.rank << '\n';
}

inline std::vector<GeneScore> read_scores(std::istream& in) {
  auto lines = io::read_lines(in);
  std::vector<GeneScore> out;
  for (std::size_t i = 0; i < lines.rows.size(); ++i) {
    const auto& [no, text] = lines.rows[i];
    auto f = io::split(text);
    if (i == 0 && io::trim(f[0]) == "gene_id") continue;
    if (f.size() != 4) fail(errc::parse, "score row must have 4 fields" + io::at_line(no));
    GeneScore s;
    s.gene_id = std::string(io::trim(f[0]));
    s.kind = parse_score_kind(io::trim(f[1]));
    s.value = io::parse_double(f[2], "score value");
    s.rank = static_cast<std::size_t>(io::parse_int(f[3], "rank"));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace somfdr
