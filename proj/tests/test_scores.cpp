#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "test_util.hpp"

using namespace somfdr;
using namespace somfdr::testing;

namespace {

double pois(std::int64_t k, double mu) { return std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0)); }

// P(N >= n) by direct double sum over (N1, N2); N2 is forced to 0 when N1 = 0.
double brute_tail(std::int64_t n, double l1, double l2) {
  double p = 0.0;
  for (int a = 0; a <= 80; ++a) {
    if (a == 0) {
      if (n <= 0) p += pois(0, l1);
      continue;
    }
    for (int b = 0; b <= 80; ++b)
      if (a + b >= n) p += pois(a, l1) * (l2 > 0 ? pois(b, l2) : (b == 0 ? 1.0 : 0.0));
  }
  return p;
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

}  // namespace

TEST(PgProbability, ZeroCounts) {
  auto rates = one_type(1e-5, 1e-5);
  // (1 - 1e-5)^1000 in 40-digit arithmetic
  EXPECT_NEAR(pg_probability(gene1("G", 1000, 1000, 0, 0), rates), 0.99004978424634758461, 1e-15);
  EXPECT_NEAR(pg_probability(gene1("G", 1000, 1000, 0, 0), rates), 0.990050, 5e-7);
}

TEST(PgProbability, OneMutationEachStage) {
  auto rates = one_type(1e-5, 1e-5);
  const double one = 1000 * 1e-5 * std::pow(1 - 1e-5, 999);
  EXPECT_NEAR(pg_probability(gene1("G", 1000, 1000, 1, 1), rates) / (one * one), 1.0, 1e-12);
  EXPECT_NEAR(pg_probability(gene1("G", 1000, 1000, 1, 1), rates), 9.8020e-5, 1e-8);
}

TEST(PgProbability, FullCoverageBoundary) {
  auto rates = one_type(0.01, 0.01);
  const double p = pg_probability(gene1("G", 3, 0, 3, 0), rates);
  EXPECT_GT(p, 0.0);
  EXPECT_NEAR(p, 1e-6, 1e-18);
}

TEST(Camp, HandEvaluatedPair) {
  std::vector<std::string> ids{"A", "B"};
  std::vector<double> lp{std::log(1e-6), std::log(1e-2)};
  bool validated[] = {true, true};
  auto s = camp_from_log_pg(ids, lp, validated);
  EXPECT_NEAR(s[0].value, 6.0, 1e-12);
  EXPECT_NEAR(s[1].value, 2.0 + std::log10(2.0), 1e-12);
  EXPECT_EQ(s[0].rank, 1u);
  EXPECT_EQ(s[1].rank, 2u);
}

TEST(Camp, UnvalidatedGenesAreMinusInfinity) {
  auto rates = one_type(1e-3, 1e-3);
  auto ds = dataset_of(rates, {gene1("A", 1000, 1000, 2, 0), gene1("B", 1000, 1000, 1, 1), gene1("C", 1000, 1000, 0, 0)});
  auto s = camp_scores(ds);
  EXPECT_TRUE(std::isinf(s[0].value) && s[0].value < 0);
  EXPECT_TRUE(std::isfinite(s[1].value));
  EXPECT_TRUE(std::isinf(s[2].value) && s[2].value < 0);
  std::set<std::size_t> ranks;
  for (const auto& g : s) ranks.insert(g.rank);
  EXPECT_EQ(ranks, (std::set<std::size_t>{1, 2, 3}));
}

TEST(Camp, NotMonotoneInPg) {
  // Ten validated genes with the same counts; coverage grows slowly so p_g
  // grows slowly while the rank q_g grows by one each step.
  auto rates = one_type(1e-3, 1e-3);
  std::vector<GeneRecord> genes;
  for (int i = 0; i < 10; ++i) genes.push_back(gene1(std::string(1, static_cast<char>('A' + i)), 1000 + i, 1000 + i, 3, 3));
  auto ds = dataset_of(rates, genes);
  auto s = camp_scores(ds);
  const double p_first = pg_probability(genes[0], rates), p_last = pg_probability(genes[9], rates);
  ASSERT_LT(p_first, p_last);
  EXPECT_GT(s[9].value, s[0].value);
  EXPECT_EQ(s[0].rank, 1u);
  EXPECT_EQ(s[9].rank, 10u);
}

TEST(Camp, TiesBrokenByGeneId) {
  auto rates = one_type(1e-3, 1e-3);
  auto ds = dataset_of(rates, {gene1("Z", 1000, 1000, 1, 1), gene1("A", 1000, 1000, 1, 1)});
  auto s = camp_scores(ds);
  EXPECT_EQ(s[1].rank, 1u);
  EXPECT_EQ(s[0].rank, 2u);
}

TEST(TailP, ZeroAndOneObservation) {
  auto rates = one_type(1e-3, 2e-3);
  EXPECT_EQ(tail_pvalue(gene1("G", 700, 900, 0, 0), rates, true), 1.0);
  EXPECT_EQ(tail_pvalue(gene1("G", 700, 900, 0, 0), rates, false), 1.0);
  EXPECT_NEAR(tail_pvalue(gene1("G", 700, 900, 1, 0), rates, true), 1 - std::exp(-0.7), 1e-15);
}

TEST(TailP, MatchesEnumeration) {
  for (double l1 : {0.05, 0.3, 0.7, 1.0, 1.6, 2.0})
    for (double l2 : {0.0, 0.05, 0.4, 1.0, 2.0})
      for (std::int64_t n = 0; n <= 6; ++n)
        EXPECT_NEAR(tail_probability(n, l1, l2, true), brute_tail(n, l1, l2), 1e-12) << l1 << ' ' << l2 << ' ' << n;
}

TEST(TailP, SingleStageIsPoissonOfTotal) {
  for (double l1 : {0.2, 1.0, 2.0})
    for (double l2 : {0.1, 1.5})
      for (std::int64_t n = 0; n <= 6; ++n) {
        double below = 0;
        for (std::int64_t k = 0; k < n; ++k) below += pois(k, l1 + l2);
        EXPECT_NEAR(tail_probability(n, l1, l2, false), 1.0 - below, 1e-12);
      }
}

TEST(TailP, VariantsAgreeAtZeroAndDifferOtherwise) {
  auto rates = one_type(1e-3, 1e-3);
  auto zero = gene1("G", 1000, 2000, 0, 0);
  EXPECT_EQ(tail_pvalue(zero, rates, true), tail_pvalue(zero, rates, false));
  auto hit = gene1("G", 1000, 2000, 2, 0);
  EXPECT_GT(std::abs(tail_pvalue(hit, rates, true) - tail_pvalue(hit, rates, false)), 1e-3);
}

TEST(TailP, MidPAddsHalfTheAtom) {
  for (std::int64_t n = 0; n <= 5; ++n) {
    const double ge = tail_probability(n, 0.8, 1.1, true);
    const double gt = tail_probability(n + 1, 0.8, 1.1, true);
    EXPECT_NEAR(tail_probability(n, 0.8, 1.1, true, true), gt + 0.5 * (ge - gt), 1e-13);
  }
}

TEST(TailP, NeedsDiscoveryExposure) {
  try {
    tail_pvalue(gene1("G", 0, 100, 0, 0), one_type(), true);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::domain);
  }
}

TEST(TailP, ExtremeCountsStayPositive) {
  EXPECT_GT(tail_probability(5000, 1e-3, 1e-3, true), 0.0);
  EXPECT_GT(tail_probability(5000, 1e-3, 1e-3, false), 0.0);
}

TEST(LogLikRatio, Examples) {
  auto rates = one_type(1e-3, 1e-3);
  EXPECT_NEAR(loglik_ratio(gene1("G", 1500, 1500, 0, 0), rates), -1.5, 1e-15);
  EXPECT_NEAR(loglik_ratio(gene1("G", 1000, 2000, 1, 2), rates), 0.0, 1e-14);
  // matches the likelihood difference at the MLE
  auto g = gene1("G", 1000, 1000, 4, 2);
  const double direct = loglik_gene(g, rates, 1.0).value - loglik_gene(g, rates, mle_theta(g, rates)).value;
  EXPECT_NEAR(loglik_ratio(g, rates), direct, 1e-12);
}

TEST(LogLikRatio, NonPositiveOnFuzzedGenes) {
  auto rates = MutationTypeTable({{"a", 1e-4, 3e-4}, {"b", 2e-3, 1e-3}});
  splitmix64 rng(99);
  for (int i = 0; i < 100000; ++i) {
    GeneRecord g{"G", {static_cast<std::int64_t>(rng() % 3000), static_cast<std::int64_t>(rng() % 3000)},
                 {static_cast<std::int64_t>(rng() % 3000), static_cast<std::int64_t>(rng() % 3000)}, {0, 0}, {0, 0}};
    g.x1[0] = std::min<std::int64_t>(g.cov1[0], static_cast<std::int64_t>(rng() % 5));
    g.x1[1] = std::min<std::int64_t>(g.cov1[1], static_cast<std::int64_t>(rng() % 5));
    if (g.total_x1() > 0) g.x2[1] = std::min<std::int64_t>(g.cov2[1], static_cast<std::int64_t>(rng() % 5));
    ASSERT_LE(loglik_ratio(g, rates), 0.0);
  }
}

TEST(ScoreDataset, RanksArePermutationsAndValuesInRange) {
  synthetic::Design d;
  d.genes = 500;
  d.mean_discovery_exposure = 0.7;
  auto tmpl = synthetic::make_template(d);
  Scenario s = null_scenario(tmpl);
  for (std::size_t g = 0; g < 500; g += 10) s.theta[g] = 30.0;
  auto ds = simulate_dataset(s, tmpl, 5);
  for (auto kind : kAllScoreKinds) {
    auto scores = score_dataset(ds, kind, {false, 3});
    std::set<std::size_t> ranks;
    for (const auto& sc : scores) {
      ranks.insert(sc.rank);
      if (kind == ScoreKind::tailp_two_stage || kind == ScoreKind::tailp_single_stage) {
        EXPECT_GT(sc.value, 0.0);
        EXPECT_LE(sc.value, 1.0);
      }
      if (kind == ScoreKind::loglik_ratio) EXPECT_LE(sc.value, 0.0);
    }
    EXPECT_EQ(ranks.size(), 500u);
    EXPECT_EQ(*ranks.rbegin(), 500u);
    auto again = score_dataset(ds, kind, {false, 1});
    for (std::size_t g = 0; g < scores.size(); ++g) {
      EXPECT_EQ(again[g].value, scores[g].value);
      EXPECT_EQ(again[g].rank, scores[g].rank);
    }
  }
}

TEST(NullSample, ZeroRepsIsAnError) {
  auto tmpl = dataset_of(one_type(), {gene1("G", 10, 10, 0, 0)});
  EXPECT_THROW(null_score_sample(tmpl, ScoreKind::camp, 0, 1), error);
}

TEST(NullSample, CampMinusInfinityExactlyForUnvalidated) {
  synthetic::Design d;
  d.genes = 400;
  d.mean_discovery_exposure = 1.0;
  auto tmpl = synthetic::make_template(d);
  auto null = null_score_sample(tmpl, ScoreKind::camp, 5, 77, {false, 2});
  ASSERT_EQ(null.values.size(), 2000u);
  for (std::size_t r = 0; r < 5; ++r) {
    auto ds = simulate_dataset(null_scenario(tmpl), tmpl, derive_seed(77, r));
    std::size_t screened = 0;
    for (std::size_t g = 0; g < 400; ++g) {
      const double v = null.values[r * 400 + g];
      EXPECT_EQ(std::isinf(v), ds.genes[g].total_x2() == 0);
      screened += ds.genes[g].screened_in();
    }
    EXPECT_EQ(null.screened_in[r], screened);
  }
}

TEST(NullSample, TailPValuesAreSuperUniformAndMidPNearlyUniform) {
  synthetic::Design d;
  d.genes = 2000;
  d.mean_discovery_exposure = 30.0;
  auto tmpl = synthetic::make_template(d);
  auto plain = null_score_sample(tmpl, ScoreKind::tailp_two_stage, 10, 3);
  auto mid = null_score_sample(tmpl, ScoreKind::tailp_two_stage, 10, 3, {true, 1});
  std::vector<double> p, m;
  for (std::size_t i = 0; i < plain.values.size(); ++i) {
    if (plain.values[i] == 1.0) continue;  // screened out
    p.push_back(plain.values[i]);
    m.push_back(mid.values[i]);
  }
  std::sort(p.begin(), p.end());
  std::sort(m.begin(), m.end());
  const double n = static_cast<double>(p.size());
  ASSERT_GT(n, 15000);
  // super-uniform: empirical CDF never exceeds t by more than sampling noise
  for (double t = 0.01; t < 1.0; t += 0.01) {
    const double F = static_cast<double>(std::upper_bound(p.begin(), p.end(), t) - p.begin()) / n;
    EXPECT_LE(F, t + 4 * std::sqrt(t * (1 - t) / n) + 1e-12) << t;
  }
  double ks = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    ks = std::max({ks, std::abs((i + 1) / n - m[i]), std::abs(i / n - m[i])});
  EXPECT_LE(ks, 0.05);
}

TEST(McPValue, CountingFormula) {
  std::vector<double> v(999);
  for (int i = 0; i < 999; ++i) v[i] = i;
  auto camp = sample_of(ScoreKind::camp, v);
  EXPECT_DOUBLE_EQ(mc_pvalue(5000.0, camp), 1.0 / 1000.0);
  EXPECT_NEAR(mc_pvalue(499.0, camp), 0.5, 0.002);
  EXPECT_DOUBLE_EQ(mc_pvalue(-std::numeric_limits<double>::infinity(), camp), 1.0);
  auto lr = sample_of(ScoreKind::loglik_ratio, {-5.0, -1.0, 0.0});
  EXPECT_DOUBLE_EQ(mc_pvalue(-10.0, lr), 0.25);
  EXPECT_DOUBLE_EQ(mc_pvalue(-1.0, lr), 0.75);
  NullSample empty;
  EXPECT_THROW(mc_pvalue(1.0, empty), error);
}

TEST(ScoreFile, RoundTrip) {
  auto rates = one_type(1e-3, 1e-3);
  auto ds = dataset_of(rates, {gene1("A", 1000, 1000, 2, 0), gene1("B", 1000, 1000, 1, 3)});
  auto scores = camp_scores(ds);
  std::ostringstream out;
  write_scores(out, scores);
  EXPECT_NE(out.str().find("-inf"), std::string::npos);
  std::istringstream in(out.str());
  auto back = read_scores(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].gene_id, scores[i].gene_id);
    EXPECT_EQ(back[i].value, scores[i].value);
    EXPECT_EQ(back[i].rank, scores[i].rank);
    EXPECT_EQ(back[i].kind, ScoreKind::camp);
  }
  EXPECT_THROW(parse_score_kind("nope"), error);
}
