#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "somfdr/error.hpp"
#include "somfdr/io.hpp"
#include "somfdr/scores.hpp"

namespace somfdr {

enum class Method { bh, storey, eb };

inline constexpr std::array<Method, 3> kAllMethods = {Method::bh, Method::eb, Method::storey};

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::bh: return "bh";
    case Method::storey: return "storey";
    case Method::eb: return "eb";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "bh") return Method::bh;
  if (s == "storey" || s == "st") return Method::storey;
  if (s == "eb") return Method::eb;
  fail(errc::input, "unknown selection method '" + std::string(s) + "'");
}

struct SelectionResult {
  Method method = Method::bh;
  double alpha = 0.1;
  std::vector<bool> mask;              // aligned with the input order
  std::vector<std::string> rejected;   // sorted gene ids
  double threshold = 0.0;              // p-value cutoff (bh, storey) or raw score cutoff (eb)
  std::optional<double> p0_hat;
  double estimated_fdr = 0.0;          // eb only
  std::size_t zero_null_regions = 0;   // eb candidate regions with no null mass

  std::size_t n_rejected() const { return rejected.size(); }
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::domain, "alpha must lie in (0, 1)");
}

inline void check_inputs(std::span<const std::string> ids, std::span<const double> values) {
  if (ids.size() != values.size()) fail(errc::length_mismatch, "gene ids and values differ in length");
}

inline void fill_rejected(SelectionResult& r, std::span<const std::string> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (r.mask[i]) r.rejected.push_back(ids[i]);
  std::sort(r.rejected.begin(), r.rejected.end());
}

/// Step-up rule with bounds alpha * g / (G * p0): the cutoff is the largest
/// order statistic p_(g) < alpha * g / (G * p0), or 0 when none qualifies.
inline SelectionResult step_up(std::span<const std::string> ids, std::span<const double> pvals, double alpha,
                               double p0, Method method) {
  check_inputs(ids, pvals);
  check_alpha(alpha);
  for (double p : pvals)
    if (!(p > 0.0 && p <= 1.0)) fail(errc::domain, "p-values must lie in (0, 1]");
  SelectionResult r;
  r.method = method;
  r.alpha = alpha;
  r.mask.assign(pvals.size(), false);
  const std::size_t n = pvals.size();
  if (n == 0) return r;
  std::vector<double> sorted(pvals.begin(), pvals.end());
  std::sort(sorted.begin(), sorted.end());
  const double scale = alpha / (static_cast<double>(n) * p0);
  double cutoff = 0.0;
  for (std::size_t g = n; g-- > 0;) {
    if (sorted[g] < scale * static_cast<double>(g + 1)) {
      cutoff = sorted[g];
      break;
    }
  }
  r.threshold = cutoff;
  for (std::size_t i = 0; i < n; ++i) r.mask[i] = cutoff > 0.0 && pvals[i] <= cutoff;
  fill_rejected(r, ids);
  return r;
}

}  // namespace detail

inline SelectionResult bh_select(std::span<const std::string> ids, std::span<const double> pvals, double alpha) {
  return detail::step_up(ids, pvals, alpha, 1.0, Method::bh);
}

inline double storey_p0(std::span<const double> pvals, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) fail(errc::domain, "lambda must lie in (0, 1)");
  if (pvals.empty()) return 1.0;
  const auto above = std::count_if(pvals.begin(), pvals.end(), [&](double p) { return p > lambda; });
  return std::min(1.0, static_cast<double>(above) / ((1.0 - lambda) * static_cast<double>(pvals.size())));
}

/// BH with the bounds inflated by 1 / p0_hat, p0_hat estimated from p-values above lambda.
inline SelectionResult storey_select(std::span<const std::string> ids, std::span<const double> pvals, double alpha,
                                     double lambda = 0.5) {
  const double p0 = storey_p0(pvals, lambda);
  auto r = detail::step_up(ids, pvals, alpha, p0, Method::storey);
  r.p0_hat = p0;
  return r;
}

struct EbOptions {
  std::size_t bins = 50;
  std::size_t p0_bins = 10;
};

/// Equal-mass histogram edges over a pooled sorted sample.
inline std::vector<double> equal_mass_edges(std::span<const double> pooled_sorted, std::size_t bins) {
  std::vector<double> edges;
  const std::size_t n = pooled_sorted.size();
  if (n == 0 || bins < 2) return edges;
  for (std::size_t k = 1; k < bins; ++k) edges.push_back(pooled_sorted[std::min(n - 1, k * n / bins)]);
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// p0 as the ratio of observed to null mass over the least extreme histogram bins.
inline double eb_p0(std::span<const double> obs_extremity, const NullSample& null, const EbOptions& opt = {}) {
  std::vector<double> pooled(obs_extremity.begin(), obs_extremity.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> merged;
  merged.reserve(pooled.size() + null.size());
  std::merge(pooled.begin(), pooled.end(), null.extremity_sorted.begin(), null.extremity_sorted.end(),
             std::back_inserter(merged));
  const auto edges = equal_mass_edges(merged, opt.bins);
  // Least extreme bins up to a cumulative pooled mass of p0_bins / bins. Tied
  // values collapse bins, so the cut is made by mass rather than by bin count.
  const double target = static_cast<double>(opt.p0_bins) / static_cast<double>(opt.bins);
  double upper = std::numeric_limits<double>::infinity();
  for (double e : edges) {
    const auto below = std::upper_bound(merged.begin(), merged.end(), e) - merged.begin();
    if (static_cast<double>(below) >= target * static_cast<double>(merged.size())) {
      upper = e;
      break;
    }
  }
  auto count_le = [&](std::span<const double> sorted) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), upper) - sorted.begin());
  };
  const double f = count_le(pooled) / static_cast<double>(std::max<std::size_t>(1, pooled.size()));
  const double f0 = count_le(null.extremity_sorted) / static_cast<double>(null.size());
  if (f0 <= 0.0) return 1.0;
  return std::clamp(f / f0, 0.0, 1.0);
}

inline double raw_from_extremity(ScoreKind kind, double e) {
  switch (kind) {
    case ScoreKind::camp: return e;
    case ScoreKind::loglik_ratio: return -e;
    default: return std::exp(-e);
  }
}

/// Empirical-Bayes selection over nested tail regions {extremity >= t}: the
/// estimated FDR of a region is p0_hat * P0(region) / P(region), and the
/// largest region with estimate <= alpha is returned.
inline SelectionResult eb_select(std::span<const std::string> ids, std::span<const double> values,
                                 const NullSample& null, double alpha, const EbOptions& opt = {}) {
  detail::check_inputs(ids, values);
  detail::check_alpha(alpha);
  if (null.size() == 0) fail(errc::input, "empty null sample");
  SelectionResult r;
  r.method = Method::eb;
  r.alpha = alpha;
  r.mask.assign(values.size(), false);
  r.threshold = std::numeric_limits<double>::infinity();
  const std::size_t n = values.size();
  if (n == 0) {
    r.p0_hat = 1.0;
    return r;
  }
  std::vector<double> obs(n);
  for (std::size_t i = 0; i < n; ++i) obs[i] = extremity(null.kind, values[i]);
  const double p0 = eb_p0(obs, null, opt);
  r.p0_hat = p0;

  std::vector<double> sorted = obs;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto& nulls = null.extremity_sorted;
  const double n_null = static_cast<double>(nulls.size());
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_fdr = 0.0;
  for (std::size_t i = 0; i < n;) {
    const double t = sorted[i];
    if (!std::isfinite(t) && t < 0) break;  // -inf scores are never rejected
    std::size_t j = i;
    while (j < n && sorted[j] == t) ++j;
    const double in_region = static_cast<double>(j);
    const double null_in = static_cast<double>(nulls.end() - std::lower_bound(nulls.begin(), nulls.end(), t));
    if (null_in == 0.0) ++r.zero_null_regions;
    const double fdr = p0 * (null_in / n_null) / (in_region / static_cast<double>(n));
    if (fdr <= alpha) {
      best = t;
      best_fdr = fdr;
    }
    i = j;
  }
  if (!std::isnan(best)) {
    for (std::size_t i = 0; i < n; ++i) r.mask[i] = obs[i] >= best;
    r.threshold = raw_from_extremity(null.kind, best);
    r.estimated_fdr = best_fdr;
  }
  detail::fill_rejected(r, ids);
  return r;
}

// ---------------------------------------------------------------------------
// Selection files: `gene_id,method,alpha,rejected` rows, then
// `#summary,<method>,<alpha>,threshold=<t>,p0_hat=<p|NA>`.

inline void write_selection(std::ostream& out, std::span<const std::string> ids, const SelectionResult& r) {
  out << "gene_id,method,alpha,rejected\n";
  const auto alpha = io::format_double(r.alpha);
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << to_string(r.method) << ',' << alpha << ',' << (r.mask[i] ? "true" : "false") << '\n';
  out << "#summary," << to_string(r.method) << ',' << alpha << ",threshold=" << io::format_double(r.threshold)
      << ",p0_hat=" << (r.p0_hat ? io::format_double(*r.p0_hat) : std::string("NA")) << '\n';
}

}  // namespace somfdr
