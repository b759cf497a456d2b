#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "psychoval/adequacy.hpp"
#include "psychoval/simulate.hpp"

using namespace psychoval;

namespace {

SymMatrix equicorrelated(std::size_t p, double r) {
  SymMatrix R = SymMatrix::identity(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) R.set(i, j, r);
  return R;
}

oracle::Rows rows_of(const SymMatrix& R) { return R.matrix().to_rows(); }

/// Random correlation matrix: normalized Gram matrix of random vectors.
SymMatrix random_correlation(std::mt19937_64& gen, std::size_t p) {
  std::normal_distribution<double> z;
  Matrix v(p, p + 2);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < p + 2; ++k) v(i, k) = z(gen) + (k == 0 ? 1.0 : 0.0);
  Matrix g = v * v.transpose();
  SymMatrix R = SymMatrix::identity(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) R.set(i, j, g(i, j) / std::sqrt(g(i, i) * g(j, j)));
  return R;
}

FactorModelSpec prune_fixture_spec() {
  FactorModelSpec spec;
  spec.items = {"S1", "S2", "S3", "T1", "T2", "T3", "NOISE"};
  spec.loadings = Matrix{{0.75, 0}, {0.75, 0}, {0.75, 0}, {0, 0.75}, {0, 0.75}, {0, 0.75}, {0, 0}};
  spec.phi = Matrix{{1.0, 0.3}, {0.3, 1.0}};
  spec.n = 500;
  spec.seed = 7;
  return spec;
}

FactorSolution solution_with(std::size_t p, std::size_t m, double h2) {
  FactorSolution s;
  s.loadings = Matrix(p, m, 0.0);
  s.communalities.assign(p, h2);
  return s;
}

}  // namespace

TEST(Bartlett, IdentityGivesZeroAndOne) {
  const auto b = bartlett_sphericity(SymMatrix::identity(4), 100);
  EXPECT_EQ(b.chi2, 0.0);
  EXPECT_EQ(b.p_value, 1.0);
  EXPECT_EQ(b.df, 6);
}

TEST(Bartlett, ClosedFormTwoItems) {
  // -(100 - 9/6) ln 0.75, evaluated by hand: 98.5 * 0.28768207245178 = 28.3367
  const double frozen = 28.3367;
  const auto b = bartlett_sphericity(SymMatrix{{1.0, 0.5}, {0.5, 1.0}}, 101);
  EXPECT_NEAR(b.chi2, frozen, 0.01);
  EXPECT_NEAR(b.chi2, -(100.0 - 9.0 / 6.0) * std::log(0.75), 1e-12);
  EXPECT_EQ(b.df, 1);
}

TEST(Bartlett, NearSingularDiverges) {
  const auto b = bartlett_sphericity(SymMatrix{{1.0, 0.9999}, {0.9999, 1.0}}, 100);
  EXPECT_GT(b.chi2, 500.0);
  EXPECT_LT(b.p_value, 1e-10);
}

TEST(Bartlett, PValueFallsAsCorrelationGrows) {
  double last = 1.1;
  for (double r : {0.1, 0.3, 0.5}) {
    const auto b = bartlett_sphericity(equicorrelated(4, r), 60);
    EXPECT_GE(b.chi2, 0.0);
    EXPECT_LT(b.p_value, last);
    last = b.p_value;
  }
}

TEST(Bartlett, Errors) {
  try {
    (void)bartlett_sphericity(SymMatrix::identity(1), 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewItems);
  }
  try {
    (void)bartlett_sphericity(SymMatrix::identity(5), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SampleTooSmall);
  }
}

TEST(Kmo, EquicorrelatedMatchesCofactorOracle) {
  const auto R = equicorrelated(3, 0.5);
  const auto want = oracle::kmo(rows_of(R));
  const auto got = kmo(R);
  EXPECT_NEAR(got.overall, want.overall, 1e-9);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.msa[j], want.msa[j], 1e-9);
}

TEST(Kmo, RandomSmallMatricesMatchOracle) {
  std::mt19937_64 gen(41);
  for (int t = 0; t < 60; ++t) {
    const std::size_t p = 2 + t % 3;
    const auto R = random_correlation(gen, p);
    const auto want = oracle::kmo(rows_of(R));
    const auto got = kmo(R);
    EXPECT_NEAR(got.overall, want.overall, 1e-9);
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(got.msa[j], want.msa[j], 1e-9);
  }
}

TEST(Kmo, IndependentBlocksMatchBlockRestrictedOracle) {
  const SymMatrix R{{1, 0.8, 0, 0}, {0.8, 1, 0, 0}, {0, 0, 1, 0.8}, {0, 0, 0.8, 1}};
  const auto got = kmo(R);
  const auto block = oracle::kmo({{1, 0.8}, {0.8, 1}});
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.msa[j], block.msa[j % 2], 1e-12);
  EXPECT_NEAR(got.msa[0], 0.5, 1e-12);  // 2x2: partial equals raw correlation
}

TEST(Kmo, UncorrelatedItemHasMinimumMsa) {
  // The uncorrelated item's ratio is 0/0, reported as 0.
  const SymMatrix R{{1, 0.6, 0.5, 0.0}, {0.6, 1, 0.55, 0.0}, {0.5, 0.55, 1, 0.0}, {0, 0, 0, 1}};
  const auto got = kmo(R);
  const auto want = oracle::kmo(rows_of(R));
  EXPECT_EQ(std::min_element(got.msa.begin(), got.msa.end()) - got.msa.begin(), 3);
  EXPECT_EQ(got.msa[3], 0.0);
  EXPECT_TRUE(std::isnan(want.msa[3]));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.msa[j], want.msa[j], 1e-12);
}

TEST(Kmo, BoundsAndAntiImageShape) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t p = 3 + t % 6;
    const auto k = kmo(random_correlation(gen, p));
    EXPECT_GE(k.overall, 0.0);
    EXPECT_LE(k.overall, 1.0);
    for (double m : k.msa) {
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
    }
    for (std::size_t i = 0; i < p; ++i) {
      EXPECT_EQ(k.anti_image(i, i), 1.0);
      for (std::size_t j = 0; j < p; ++j) EXPECT_EQ(k.anti_image(i, j), k.anti_image(j, i));
    }
  }
}

TEST(Kmo, MergingUnrelatedBlocksKeepsWithinBlockMsa) {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 10; ++t) {
    const auto A = random_correlation(gen, 3), B = random_correlation(gen, 3);
    SymMatrix merged = SymMatrix::identity(6);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) {
        merged.set(i, j, A(i, j));
        merged.set(i + 3, j + 3, B(i, j));
      }
    const auto km = kmo(merged), ka = kmo(A), kb = kmo(B);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GE(km.msa[j], ka.msa[j] - 1e-12);
      EXPECT_GE(km.msa[j + 3], kb.msa[j] - 1e-12);
    }
  }
}

TEST(Prune, AllAboveThresholdLeavesTrailEmpty) {
  const auto R = equicorrelated(5, 0.5);
  const std::vector<std::string> items{"a", "b", "c", "d", "e"};
  const auto trail = msa_prune(R, items);
  EXPECT_TRUE(trail.steps.empty());
  EXPECT_EQ(trail.retained, items);
  EXPECT_EQ(trail.termination, "threshold_met");
}

TEST(Prune, ZeroThresholdNeverPrunes) {
  const auto ds = generate(prune_fixture_spec());
  EXPECT_TRUE(msa_prune(ds, 0.0).steps.empty());
  std::mt19937_64 gen(3);
  for (int t = 0; t < 10; ++t) {
    const auto R = random_correlation(gen, 6);
    EXPECT_TRUE(msa_prune(R, {"a", "b", "c", "d", "e", "f"}, 0.0).steps.empty());
  }
}

TEST(Prune, NoiseItemRemovedFirst) {
  const auto ds = generate(prune_fixture_spec());
  const auto trail = msa_prune(ds);
  ASSERT_FALSE(trail.steps.empty());
  EXPECT_EQ(trail.steps.front().item, "NOISE");
  EXPECT_TRUE(trail.reached_threshold);
  for (double m : trail.final_msa) EXPECT_GE(m, 0.5);
  EXPECT_EQ(std::find(trail.retained.begin(), trail.retained.end(), "NOISE"),
            trail.retained.end());
}

TEST(Prune, EveryStepRemovesTheArgmin) {
  std::mt19937_64 gen(23);
  int pruned_runs = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t p = 5 + t % 4;
    std::vector<std::string> items;
    for (std::size_t j = 0; j < p; ++j) items.push_back("i" + std::to_string(j));
    const auto R = random_correlation(gen, p);
    const auto trail = msa_prune(R, items, 0.7);
    EXPECT_LT(trail.steps.size(), p);
    EXPECT_GE(trail.retained.size(), 3u);
    std::vector<std::string> live = items;
    double kmo_before = trail.initial_kmo;
    for (const auto& step : trail.steps) {
      std::vector<std::size_t> idx;
      for (const auto& id : live)
        idx.push_back(static_cast<std::size_t>(std::find(items.begin(), items.end(), id) -
                                               items.begin()));
      const auto k = kmo(R.submatrix(idx));
      const auto low = std::min_element(k.msa.begin(), k.msa.end()) - k.msa.begin();
      EXPECT_EQ(step.item, live[static_cast<std::size_t>(low)]);
      EXPECT_DOUBLE_EQ(step.msa, k.msa[static_cast<std::size_t>(low)]);
      live.erase(live.begin() + low);
      if (!(step.kmo_after > kmo_before)) {
        EXPECT_FALSE(trail.termination.empty());
      }
      kmo_before = step.kmo_after;
    }
    EXPECT_EQ(live, trail.retained);
    pruned_runs += !trail.steps.empty();
  }
  EXPECT_GT(pruned_runs, 0);
}

TEST(Prune, CannotReachThresholdRecordedOrThrown) {
  const SymMatrix R{{1, 0.6, 0.6}, {0.6, 1, 0.0}, {0.6, 0.0, 1}};
  const std::vector<std::string> items{"a", "b", "c"};
  const auto trail = msa_prune(R, items);
  EXPECT_FALSE(trail.reached_threshold);
  EXPECT_EQ(trail.termination, "CannotReachThreshold");
  EXPECT_EQ(trail.retained, items);
  try {
    (void)msa_prune(R, items, 0.5, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CannotReachThreshold);
  }
}

TEST(Advice, AllBandsSatisfied) {
  const auto a = sample_adequacy_advice(solution_with(6, 1, 0.8), 100);
  EXPECT_EQ(a.band, CommunalityBand::High);
  EXPECT_DOUBLE_EQ(a.items_per_factor, 6.0);
  EXPECT_FALSE(a.caution);
  EXPECT_EQ(a.label, "advisory heuristic");
}

TEST(Advice, AllTriggersMet) {
  const auto a = sample_adequacy_advice(solution_with(6, 2, 0.3), 100);
  EXPECT_EQ(a.band, CommunalityBand::Low);
  EXPECT_TRUE(a.caution);
}

TEST(Advice, BoundaryIsClosedBelow) {
  EXPECT_EQ(sample_adequacy_advice(solution_with(6, 2, 0.4), 100).band, CommunalityBand::Moderate);
  EXPECT_EQ(sample_adequacy_advice(solution_with(2, 1, 0.7), 100).band, CommunalityBand::High);
  EXPECT_FALSE(sample_adequacy_advice(solution_with(6, 2, 0.3), 300).caution);
}

TEST(Adequacy, ReportBundlesBoth) {
  const auto R = equicorrelated(4, 0.4);
  const auto rep = assess_adequacy(R, 200, {"a", "b", "c", "d"});
  EXPECT_EQ(rep.bartlett.df, 6);
  EXPECT_EQ(rep.msa.size(), 4u);
  EXPECT_EQ(rep.p, 4u);
  EXPECT_NEAR(rep.kmo_overall, oracle::kmo(rows_of(R)).overall, 1e-12);
}
