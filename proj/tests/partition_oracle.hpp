#pragma once

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "somfdr/somfdr.hpp"

namespace somfdr::testing {

/// int_0^inf f(u) du split at u = 1 so endpoint singularities of gamma
/// densities with shape < 1 are handled by tanh-sinh.
inline double integrate_half_line(const std::function<double(double)>& f) {
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  const double head = ts.integrate(f, 0.0, 1.0, 1e-14);
  const double tail = es.integrate([&](double u) { return f(1.0 + u); }, 1e-14);
  return head + tail;
}

/// int theta^n exp(-S theta) over theta = 1 + u, u ~ Gamma(shape, rate), by quadrature.
inline double continuous_integral(std::int64_t n, double S, const SpikedBaseMeasure& base) {
  boost::math::gamma_distribution<double> gd(base.shape, 1.0 / base.rate);
  return integrate_half_line([&](double u) {
    if (u <= 0.0) return 0.0;
    const double theta = 1.0 + u;
    return std::exp(static_cast<double>(n) * std::log(theta) - S * theta) * boost::math::pdf(gd, u);
  });
}

inline void set_partitions_rec(std::size_t i, std::size_t n, std::vector<int>& label, int blocks,
                               std::vector<std::vector<int>>& out) {
  if (i == n) {
    out.push_back(label);
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    label[i] = b;
    set_partitions_rec(i + 1, n, label, std::max(blocks, b + 1), out);
  }
}

/// All set partitions of {0..n-1} as restricted growth strings.
inline std::vector<std::vector<int>> set_partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> label(n, 0);
  if (n == 0) return {{}};
  set_partitions_rec(0, n, label, 0, out);
  return out;
}

/// Key of an effect configuration as seen after merging spike clusters: per
/// gene, 0 for the spike, otherwise 1 + the smallest gene index sharing its cluster.
inline std::string state_key(const std::vector<int>& cluster, const std::vector<bool>& spike) {
  std::string key;
  for (std::size_t g = 0; g < cluster.size(); ++g) {
    int v = 0;
    if (!spike[g])
      for (std::size_t h = 0; h < cluster.size(); ++h)
        if (cluster[h] == cluster[g]) {
          v = static_cast<int>(h) + 1;
          break;
        }
    if (!key.empty()) key += ',';
    key += std::to_string(v);
  }
  return key;
}

inline std::string state_key(const PosteriorState& s) {
  std::vector<int> cluster(s.assignment.begin(), s.assignment.end());
  std::vector<bool> spike(cluster.size());
  for (std::size_t g = 0; g < cluster.size(); ++g) spike[g] = s.assignment[g] == 0;
  return state_key(cluster, spike);
}

/// Exact posterior over merged effect configurations for genes with
/// sufficient statistics (n_j, S_j): Chinese-restaurant prior on partitions,
/// each cluster either on the spike or on the shifted gamma.
inline std::map<std::string, double> enumerate_posterior(const std::vector<std::int64_t>& n,
                                                         const std::vector<double>& S,
                                                         const SpikedBaseMeasure& base) {
  std::map<std::string, double> out;
  double total = 0.0;
  for (const auto& part : set_partitions(n.size())) {
    const int k = part.empty() ? 0 : *std::max_element(part.begin(), part.end()) + 1;
    std::vector<std::int64_t> bn(k, 0);
    std::vector<double> bs(k, 0.0);
    std::vector<int> size(k, 0);
    for (std::size_t g = 0; g < part.size(); ++g) {
      bn[part[g]] += n[g];
      bs[part[g]] += S[g];
      ++size[part[g]];
    }
    double prior = std::pow(base.total_mass, k);
    for (int b = 0; b < k; ++b) prior *= std::tgamma(size[b]);
    std::vector<double> w_spike(k), w_cont(k);
    for (int b = 0; b < k; ++b) {
      w_spike[b] = base.spike_fraction * std::exp(-bs[b]);
      w_cont[b] = (1.0 - base.spike_fraction) * continuous_integral(bn[b], bs[b], base);
    }
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      double w = prior;
      std::vector<bool> spike(part.size());
      for (int b = 0; b < k; ++b) w *= (mask >> b & 1u) ? w_spike[b] : w_cont[b];
      for (std::size_t g = 0; g < part.size(); ++g) spike[g] = (mask >> part[g]) & 1u;
      out[state_key(part, spike)] += w;
      total += w;
    }
  }
  for (auto& [key, w] : out) w /= total;
  return out;
}

/// Batch-means standard error of the frequency of each key along a chain.
struct ChainFrequencies {
  std::map<std::string, double> freq;
  std::map<std::string, double> se;
};

inline ChainFrequencies chain_frequencies(const std::vector<std::string>& keys,
                                          const std::vector<std::string>& all_keys, std::size_t batches = 100) {
  ChainFrequencies out;
  const std::size_t per = keys.size() / batches;
  for (const auto& k : all_keys) {
    std::vector<double> means(batches, 0.0);
    double hits = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) means[b] += keys[i] == k;
      hits += means[b];
      means[b] /= static_cast<double>(per);
    }
    out.freq[k] = hits / static_cast<double>(per * batches);
    out.se[k] = numeric::stddev(means) / std::sqrt(static_cast<double>(batches));
  }
  return out;
}

}  // namespace somfdr::testing
