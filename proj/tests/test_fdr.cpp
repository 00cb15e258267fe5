#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace somfdr;
using namespace somfdr::testing;

namespace {

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "g" + std::to_string(i);
  return ids;
}

// Largest t among the p-values with t < alpha * #{p <= t} / G; all p <= t rejected.
std::vector<bool> brute_bh(const std::vector<double>& p, double alpha) {
  double best = 0.0;
  for (double t : p) {
    const auto r = std::count_if(p.begin(), p.end(), [&](double q) { return q <= t; });
    if (t < alpha * static_cast<double>(r) / static_cast<double>(p.size())) best = std::max(best, t);
  }
  std::vector<bool> mask(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) mask[i] = best > 0.0 && p[i] <= best;
  return mask;
}

NullSample sample_of(ScoreKind kind, std::vector<double> values) {
  NullSample s;
  s.kind = kind;
  s.reps = 1;
  s.values = values;
  for (double v : values) s.extremity_sorted.push_back(extremity(kind, v));
  std::sort(s.extremity_sorted.begin(), s.extremity_sorted.end());
  return s;
}

double uniform_open(splitmix64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

TEST(Bh, HandExample) {
  auto ids = ids_for(4);
  std::vector<double> p{0.01, 0.02, 0.5, 0.9};
  auto r = bh_select(ids, p, 0.1);
  EXPECT_EQ(r.mask, (std::vector<bool>{true, true, false, false}));
  EXPECT_EQ(r.threshold, 0.02);
  EXPECT_EQ(r.rejected, (std::vector<std::string>{"g0", "g1"}));
  EXPECT_FALSE(r.p0_hat);
}

TEST(Bh, AllOnesRejectNothing) {
  auto ids = ids_for(5);
  std::vector<double> p(5, 1.0);
  auto r = bh_select(ids, p, 0.5);
  EXPECT_EQ(r.n_rejected(), 0u);
  EXPECT_EQ(r.threshold, 0.0);
}

TEST(Bh, EmptyInput) {
  std::vector<std::string> ids;
  std::vector<double> p;
  auto r = bh_select(ids, p, 0.1);
  EXPECT_EQ(r.n_rejected(), 0u);
  EXPECT_EQ(r.threshold, 0.0);
}

TEST(Bh, InputErrors) {
  auto ids = ids_for(2);
  std::vector<double> zero{0.0, 0.5}, big{1.5, 0.5}, ok{0.1, 0.2}, short_p{0.1};
  EXPECT_THROW(bh_select(ids, zero, 0.1), error);
  EXPECT_THROW(bh_select(ids, big, 0.1), error);
  EXPECT_THROW(bh_select(ids, ok, 0.0), error);
  EXPECT_THROW(bh_select(ids, ok, 1.0), error);
  EXPECT_THROW(bh_select(ids, short_p, 0.1), error);
  EXPECT_THROW(storey_select(ids, ok, 0.1, 1.0), error);
}

TEST(Bh, MatchesBruteForceOnRandomVectors) {
  splitmix64 rng(1);
  const double grid[] = {0.001, 0.004, 0.01, 0.02, 0.03, 0.05, 0.1, 0.3, 0.7, 1.0};
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> p(n);
    for (auto& v : p) v = (rep % 2) ? grid[rng() % 10] : uniform_open(rng) * 0.2;
    const double alpha = 0.05 + 0.3 * rng.uniform();
    auto ids = ids_for(n);
    ASSERT_EQ(bh_select(ids, p, alpha).mask, brute_bh(p, alpha)) << rep;
  }
}

TEST(Bh, DuplicatingAnExtremePValueKeepsRejections) {
  splitmix64 rng(2);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<double> p(n);
    for (auto& v : p) v = rng.uniform() < 0.3 ? uniform_open(rng) * 0.01 : uniform_open(rng);
    auto ids = ids_for(n);
    auto r = bh_select(ids, p, 0.1);
    if (r.n_rejected() == 0) continue;
    auto it = std::min_element(p.begin(), p.end());
    auto p2 = p;
    p2.push_back(*it);
    auto ids2 = ids_for(n + 1);
    auto r2 = bh_select(ids2, p2, 0.1);
    for (std::size_t i = 0; i < n; ++i)
      if (r.mask[i]) ASSERT_TRUE(r2.mask[i]);
  }
}

TEST(Bh, FdrControlAndSharpness) {
  // alternatives at p ~ 0, so FDR = p0 * alpha
  splitmix64 rng(3);
  const std::size_t G = 1000, m1 = 100;
  const double alpha = 0.1, p0 = 0.9;
  std::vector<double> fdp;
  auto ids = ids_for(G);
  for (int s = 0; s < 500; ++s) {
    std::vector<double> p(G);
    for (std::size_t i = 0; i < G; ++i) p[i] = i < m1 ? 1e-12 * uniform_open(rng) : uniform_open(rng);
    auto r = bh_select(ids, p, alpha);
    std::size_t false_r = 0;
    for (std::size_t i = m1; i < G; ++i) false_r += r.mask[i];
    fdp.push_back(r.n_rejected() ? static_cast<double>(false_r) / static_cast<double>(r.n_rejected()) : 0.0);
  }
  const double mean = numeric::mean(fdp), se = numeric::stddev(fdp) / std::sqrt(500.0);
  EXPECT_LE(mean, alpha + 2 * se);
  EXPECT_NEAR(mean, p0 * alpha, 3 * se);
}

TEST(Storey, UniformPValuesGiveP0NearOne) {
  splitmix64 rng(4);
  std::vector<double> p(10000);
  for (auto& v : p) v = uniform_open(rng);
  EXPECT_NEAR(storey_p0(p, 0.5), 1.0, 0.03);
}

TEST(Storey, CappedP0CoincidesWithBh) {
  auto ids = ids_for(6);
  std::vector<double> p{0.001, 0.6, 0.7, 0.8, 0.9, 0.95};
  auto s = storey_select(ids, p, 0.1, 0.5);
  auto b = bh_select(ids, p, 0.1);
  EXPECT_EQ(*s.p0_hat, 1.0);
  EXPECT_EQ(s.mask, b.mask);
  EXPECT_EQ(s.threshold, b.threshold);
}

TEST(Storey, HalfSignalMixture) {
  splitmix64 rng(5);
  const std::size_t G = 4000;
  std::vector<double> p(G);
  for (std::size_t i = 0; i < G; ++i) p[i] = i < G / 2 ? 1e-4 * uniform_open(rng) + 1e-9 : uniform_open(rng);
  auto ids = ids_for(G);
  auto s = storey_select(ids, p, 0.05);
  auto b = bh_select(ids, p, 0.05);
  EXPECT_NEAR(*s.p0_hat, 0.5, 0.05);
  EXPECT_GT(s.n_rejected(), b.n_rejected());
}

TEST(Storey, ContainsBhRejections) {
  splitmix64 rng(6);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 5 + rng() % 200;
    std::vector<double> p(n);
    for (auto& v : p) v = rng.uniform() < 0.2 ? uniform_open(rng) * 1e-3 : uniform_open(rng);
    auto ids = ids_for(n);
    auto b = bh_select(ids, p, 0.1);
    auto s = storey_select(ids, p, 0.1);
    EXPECT_LE(*s.p0_hat, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      if (b.mask[i]) ASSERT_TRUE(s.mask[i]);
  }
}

TEST(Eb, SeparatedScoresAreAllRejected) {
  std::vector<double> null_vals, obs;
  for (int i = 0; i < 1000; ++i) null_vals.push_back(i * 0.001);
  for (int i = 0; i < 50; ++i) obs.push_back(10.0 + i);
  auto null = sample_of(ScoreKind::camp, null_vals);
  auto ids = ids_for(obs.size());
  auto r = eb_select(ids, obs, null, 0.1);
  EXPECT_EQ(*r.p0_hat, 0.0);
  EXPECT_EQ(r.n_rejected(), 50u);
  EXPECT_GT(r.zero_null_regions, 0u);
  EXPECT_EQ(r.threshold, 10.0);
}

TEST(Eb, PureNullRarelyRejects) {
  std::normal_distribution<double> z;
  splitmix64 rng(7);
  const std::size_t G = 2000;
  auto ids = ids_for(G);
  int any = 0;
  const int reps = 60;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> null_vals(20 * G), obs(G);
    for (auto& v : null_vals) v = z(rng);
    for (auto& v : obs) v = z(rng);
    auto r = eb_select(ids, obs, sample_of(ScoreKind::camp, null_vals), 0.1);
    EXPECT_LE(r.estimated_fdr, 0.1);
    any += r.n_rejected() > 0;
  }
  // every rejection is false here, so the FDR is the chance of rejecting anything
  const double rate = static_cast<double>(any) / reps;
  EXPECT_LE(rate, 0.1 + 3 * std::sqrt(0.1 * 0.9 / reps));
}

TEST(Eb, P0CalibrationOnTwoGroupsMixture) {
  std::normal_distribution<double> z;
  splitmix64 rng(8);
  const std::size_t G = 20000;
  int inside = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<double> null_vals(10 * G), obs(G);
    for (auto& v : null_vals) v = z(rng);
    for (std::size_t i = 0; i < G; ++i) obs[i] = z(rng) + (i < G / 10 ? 3.0 : 0.0);
    const auto null = sample_of(ScoreKind::camp, null_vals);
    const double p0 = eb_p0(obs, null);
    inside += p0 >= 0.85 && p0 <= 0.95;
  }
  EXPECT_GE(inside, 95);
}

TEST(Eb, ReturnedRegionMeetsTargetAndMinusInfinityNeverRejected) {
  std::normal_distribution<double> z;
  splitmix64 rng(9);
  std::vector<double> null_vals(5000), obs(600);
  for (auto& v : null_vals) v = rng.uniform() < 0.5 ? -std::numeric_limits<double>::infinity() : z(rng);
  for (std::size_t i = 0; i < obs.size(); ++i)
    obs[i] = i < 100 ? 4.0 + z(rng) : (rng.uniform() < 0.5 ? -std::numeric_limits<double>::infinity() : z(rng));
  auto ids = ids_for(obs.size());
  auto r = eb_select(ids, obs, sample_of(ScoreKind::camp, null_vals), 0.1);
  EXPECT_GT(r.n_rejected(), 0u);
  EXPECT_LE(r.estimated_fdr, 0.1);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (std::isinf(obs[i])) EXPECT_FALSE(r.mask[i]);
    EXPECT_EQ(r.mask[i], obs[i] >= r.threshold);
  }
}

TEST(Eb, ProbabilityOrientation) {
  // small p-values are extreme; threshold is reported on the raw scale
  std::vector<double> null_vals, obs;
  splitmix64 rng(10);
  for (int i = 0; i < 20000; ++i) null_vals.push_back(uniform_open(rng));
  for (int i = 0; i < 1000; ++i) obs.push_back(i < 100 ? 1e-7 * uniform_open(rng) : uniform_open(rng));
  auto ids = ids_for(obs.size());
  auto r = eb_select(ids, obs, sample_of(ScoreKind::tailp_two_stage, null_vals), 0.1);
  EXPECT_GE(r.n_rejected(), 100u);
  for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_EQ(r.mask[i], obs[i] <= r.threshold * (1 + 1e-12));
}

TEST(Selection, PermutationInvariance) {
  splitmix64 rng(11);
  std::normal_distribution<double> z;
  const std::size_t n = 300;
  std::vector<double> p(n), s(n), null_vals(3000);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = i < 30 ? uniform_open(rng) * 1e-4 : uniform_open(rng);
    s[i] = i < 30 ? 3 + z(rng) : z(rng);
  }
  for (auto& v : null_vals) v = z(rng);
  auto null = sample_of(ScoreKind::camp, null_vals);
  auto ids = ids_for(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> ids2(n);
  std::vector<double> p2(n), s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids2[i] = ids[perm[i]];
    p2[i] = p[perm[i]];
    s2[i] = s[perm[i]];
  }
  EXPECT_EQ(bh_select(ids, p, 0.1).rejected, bh_select(ids2, p2, 0.1).rejected);
  EXPECT_EQ(storey_select(ids, p, 0.1).rejected, storey_select(ids2, p2, 0.1).rejected);
  EXPECT_EQ(eb_select(ids, s, null, 0.1).rejected, eb_select(ids2, s2, null, 0.1).rejected);
}

TEST(Selection, FileFormat) {
  auto ids = ids_for(3);
  std::vector<double> p{0.001, 0.5, 0.9};
  std::ostringstream out;
  write_selection(out, ids, storey_select(ids, p, 0.1));
  const std::string text = out.str();
  EXPECT_NE(text.find("gene_id,method,alpha,rejected\n"), std::string::npos);
  EXPECT_NE(text.find("g0,storey,0.1,true\n"), std::string::npos);
  EXPECT_NE(text.find("#summary,storey,"), std::string::npos);
  EXPECT_NE(text.find("p0_hat="), std::string::npos);
  EXPECT_EQ(parse_method("st"), Method::storey);
  EXPECT_THROW(parse_method("xyz"), error);
}
