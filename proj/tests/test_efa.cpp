#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "psychoval/adequacy.hpp"
#include "psychoval/efa.hpp"
#include "psychoval/simulate.hpp"

using namespace psychoval;

namespace {

SymMatrix population(const Matrix& lambda, const Matrix& phi) {
  Matrix R = lambda * phi * lambda.transpose();
  for (std::size_t j = 0; j < R.rows(); ++j) R(j, j) = 1.0;
  return SymMatrix::symmetrize(R);
}

SymMatrix block_matrix(double r) {
  SymMatrix R = SymMatrix::identity(6);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) R.set(3 * b + i, 3 * b + j, r);
  return R;
}

/// Smallest max-abs error over column permutations and sign flips.
double aligned_error(const Matrix& got, const Matrix& want) {
  const std::size_t m = want.cols();
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double plus = 0.0, minus = 0.0;
      for (std::size_t j = 0; j < want.rows(); ++j) {
        plus = std::max(plus, std::abs(got(j, perm[k]) - want(j, k)));
        minus = std::max(minus, std::abs(-got(j, perm[k]) - want(j, k)));
      }
      worst = std::max(worst, std::min(plus, minus));
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

FactorSolution make_solution(const Matrix& loadings) {
  FactorSolution s;
  s.loadings = loadings;
  s.phi = Matrix::identity(loadings.cols());
  s.rotation_matrix = Matrix::identity(loadings.cols());
  for (std::size_t j = 0; j < loadings.rows(); ++j) s.items.push_back("i" + std::to_string(j));
  detail::finalize(s);
  return s;
}

Matrix planar(double angle) {
  return Matrix{{std::cos(angle), -std::sin(angle)}, {std::sin(angle), std::cos(angle)}};
}

}  // namespace

TEST(Pca, IdentityGivesIdentityLoadings) {
  const auto s = extract_pca(SymMatrix::identity(4), 4);
  EXPECT_LT(max_abs_diff(s.loadings, Matrix::identity(4)), 1e-15);
  for (double h : s.communalities) EXPECT_DOUBLE_EQ(h, 1.0);
}

TEST(Pca, TwoItemsOneComponent) {
  const auto s = extract_pca(SymMatrix{{1, 0.6}, {0.6, 1}}, 1);
  EXPECT_NEAR(s.loadings(0, 0), std::sqrt(0.8), 1e-14);
  EXPECT_NEAR(s.loadings(1, 0), std::sqrt(0.8), 1e-14);
  EXPECT_NEAR(s.loadings(0, 0), 0.894, 1e-3);
}

TEST(Pca, BlockStructureMatchesPerBlockEigenOracle) {
  const auto R = block_matrix(0.64);
  const oracle::Rows block{{1, 0.64, 0.64}, {0.64, 1, 0.64}, {0.64, 0.64, 1}};
  const double top = oracle::polish_root(block, oracle::sym3_eigenvalues(block)[0]);
  // eigenvector: cross product of two rows of (block - top I)
  const double a[3] = {block[0][0] - top, block[0][1], block[0][2]};
  const double b[3] = {block[1][0], block[1][1] - top, block[1][2]};
  double v[3] = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  Matrix want(6, 2, 0.0);
  for (int i = 0; i < 3; ++i) {
    want(i, 0) = std::sqrt(top) * std::abs(v[i]) / len;
    want(i + 3, 1) = want(i, 0);
  }
  const auto s = extract_pca(R, 2);
  EXPECT_LT(aligned_error(s.loadings, want), 1e-10);
  EXPECT_NEAR(want(0, 0), std::sqrt(0.76), 1e-12);
}

TEST(Pca, VarianceSharesSumToOneAndDecrease) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 10; ++t) {
    Matrix lam(7, 2);
    std::uniform_real_distribution<double> u(0.2, 0.7);
    for (std::size_t j = 0; j < 7; ++j) lam(j, j % 2) = u(gen);
    const auto R = population(lam, Matrix::identity(2));
    const auto full = extract_pca(R, 7);
    EXPECT_NEAR(full.cumulative_variance.back(), 1.0, 1e-9);
    double total = 0.0;
    for (double l : full.eigenvalues) total += l / 7.0;
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t k = 0; k + 1 < 7; ++k) {
      EXPECT_GE(full.variance_explained[k] + 1e-12, full.variance_explained[k + 1]);
    }
  }
}

TEST(Paf, RecoversExactOneFactorModel) {
  const Matrix lam{{0.8}, {0.8}, {0.8}, {0.8}, {0.8}};
  const auto s = extract_paf(population(lam, Matrix::identity(1)), 1);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(std::abs(s.loadings(j, 0)), 0.8, 1e-3);
    EXPECT_NEAR(s.communalities[j], 0.64, 1e-3);
  }
  EXPECT_TRUE(s.extraction_info.converged);
  EXPECT_FALSE(s.heywood);
}

TEST(Paf, IdentityCollapsesToZero) {
  const auto s = extract_paf(SymMatrix::identity(4), 1);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(s.loadings(j, 0), 0.0, 1e-12);
    EXPECT_NEAR(s.communalities[j], 0.0, 1e-12);
  }
}

TEST(Paf, BlockStructureAgainstPca) {
  // Exact values on this matrix: PCA loading sqrt(1 + 2r)/sqrt(3) = sqrt(0.76),
  // PAF loading sqrt(r) = 0.8. Their gap is sqrt(0.76) - 0.8 = 0.0718.
  const auto R = block_matrix(0.64);
  const auto pca = extract_pca(R, 2);
  const auto paf = extract_paf(R, 2);
  Matrix want_paf(6, 2, 0.0), want_pca(6, 2, 0.0);
  for (int i = 0; i < 3; ++i) {
    want_paf(i, 0) = want_paf(i + 3, 1) = 0.8;
    want_pca(i, 0) = want_pca(i + 3, 1) = std::sqrt(0.76);
  }
  EXPECT_LT(aligned_error(paf.loadings, want_paf), 1e-3);
  EXPECT_LT(aligned_error(pca.loadings, want_pca), 1e-12);
  const double gap = aligned_error(pca.loadings, paf.loadings);
  EXPECT_NEAR(gap, std::sqrt(0.76) - 0.8, 1e-3);
}

TEST(Paf, CommunalitiesReproduceRowSumsAndStayInRange) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.3, 0.9);
  for (int t = 0; t < 10; ++t) {
    Matrix lam(6, 2);
    for (std::size_t j = 0; j < 6; ++j) {
      lam(j, j % 2) = u(gen);
      lam(j, 1 - j % 2) = 0.2 * u(gen);
    }
    const auto s = extract_paf(population(lam, Matrix::identity(2)), 2);
    for (std::size_t j = 0; j < 6; ++j) {
      double ss = 0.0;
      for (std::size_t k = 0; k < 2; ++k) ss += s.loadings(j, k) * s.loadings(j, k);
      EXPECT_NEAR(s.communalities[j], std::min(ss, 1.0), 1e-9);
      EXPECT_GE(s.communalities[j], 0.0);
      EXPECT_LE(s.communalities[j], 1.0);
      EXPECT_NEAR(s.uniquenesses[j], 1.0 - s.communalities[j], 1e-15);
    }
  }
}

TEST(Paf, HeywoodCaseClampedAndFlagged) {
  // One-factor fit needs lambda_1^2 = r12 r13 / r23 = 0.85^2 / 0.6 > 1.
  const SymMatrix R{{1.0, 0.85, 0.85}, {0.85, 1.0, 0.6}, {0.85, 0.6, 1.0}};
  const auto s = extract_paf(R, 1);
  EXPECT_TRUE(s.heywood);
  EXPECT_NEAR(s.communalities[0], 1.0, 1e-12);
  for (std::size_t j = 0; j < 3; ++j) {
    const double ss = s.loadings(j, 0) * s.loadings(j, 0);
    EXPECT_LE(ss, 1.0 + 1e-12);
    EXPECT_NEAR(s.communalities[j], ss, 1e-9);
  }
}

TEST(Paf, NoConvergenceReported) {
  const auto R = block_matrix(0.5);
  try {
    (void)extract_paf(R, 2, {}, {1, 1e-12});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoConvergence);
    EXPECT_GT(e.value(), 0.0);
  }
}

TEST(Extraction, BadFactorCount) {
  EXPECT_THROW((void)extract_pca(SymMatrix::identity(3), 0), Error);
  EXPECT_THROW((void)extract_paf(SymMatrix::identity(3), 4), Error);
}

TEST(Kaiser, Examples) {
  const std::vector<double> a{2.5, 1.2, 0.8, 0.5};
  EXPECT_EQ(retain_kaiser(a).m, 2u);
  EXPECT_FALSE(retain_kaiser(a).forced);
  const std::vector<double> flat{1.0, 1.0, 1.0};
  EXPECT_EQ(retain_kaiser(flat).m, 1u);
  EXPECT_TRUE(retain_kaiser(flat).forced);
  const std::vector<double> edge{1.0000001, 0.9999999};
  EXPECT_EQ(retain_kaiser(edge).m, 1u);
  EXPECT_FALSE(retain_kaiser(edge).forced);
}

TEST(SortAndSign, CanonicalInputUnchanged) {
  const auto s = make_solution(Matrix{{0.8, 0.1}, {0.7, 0.0}, {0.1, 0.6}, {0.0, 0.5}});
  EXPECT_EQ(sort_and_sign(s), s);
  EXPECT_EQ(sort_and_sign(sort_and_sign(s)), sort_and_sign(s));
}

TEST(SortAndSign, ColumnSwapUndone) {
  const auto s = make_solution(Matrix{{0.8, 0.1}, {0.7, 0.0}, {0.1, 0.6}, {0.0, 0.5}});
  const auto swapped = make_solution(Matrix{{0.1, 0.8}, {0.0, 0.7}, {0.6, 0.1}, {0.5, 0.0}});
  EXPECT_LT(max_abs_diff(sort_and_sign(swapped).loadings, s.loadings), 1e-15);
}

TEST(SortAndSign, NegatedColumnUndoneWithPhiConsistent) {
  auto s = make_solution(Matrix{{0.8, 0.1}, {0.7, 0.0}, {0.1, 0.6}, {0.0, 0.5}});
  s.phi = Matrix{{1.0, 0.3}, {0.3, 1.0}};
  detail::finalize(s);
  auto neg = s;
  for (std::size_t j = 0; j < 4; ++j) neg.loadings(j, 1) = -neg.loadings(j, 1);
  neg.phi = Matrix{{1.0, -0.3}, {-0.3, 1.0}};
  neg.rotation_matrix = Matrix{{1.0, 0.0}, {0.0, -1.0}};
  detail::finalize(neg);
  const auto fixed = sort_and_sign(neg);
  EXPECT_LT(max_abs_diff(fixed.loadings, s.loadings), 1e-15);
  EXPECT_LT(max_abs_diff(fixed.phi, s.phi), 1e-15);
  EXPECT_LT(max_abs_diff(fixed.structure, fixed.loadings * fixed.phi), 1e-15);
  EXPECT_LT(max_abs_diff(fixed.rotation_matrix, Matrix::identity(2)), 1e-15);
}

TEST(Varimax, SimpleStructureIsFixedPoint) {
  const Matrix simple{{0.8, 0}, {0.8, 0}, {0, 0.8}, {0, 0.8}};
  const auto out = rotate_varimax(make_solution(simple));
  EXPECT_LT(max_abs_diff(out.loadings, simple), 1e-12);
}

TEST(Varimax, UndoesPlanarMixing) {
  const Matrix simple{{0.8, 0}, {0.8, 0}, {0, 0.8}, {0, 0.8}};
  for (double deg : {45.0, 30.0, -20.0, 80.0}) {
    const Matrix mixed = simple * planar(deg * std::numbers::pi / 180.0);
    const auto out = rotate_varimax(make_solution(mixed));
    EXPECT_LT(aligned_error(out.loadings, simple), 1e-8) << deg;
  }
}

TEST(Varimax, InvariantsOnRandomLoadings) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int t = 0; t < 25; ++t) {
    const std::size_t m = 2 + t % 3, p = 3 * m + t % 4;
    Matrix a(p, m);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < m; ++k) a(j, k) = u(gen) / std::sqrt(static_cast<double>(m));
    for (bool normalize : {true, false}) {
      const auto in = make_solution(a);
      const auto out = rotate_varimax(in, {normalize, 100, 1e-8});
      for (std::size_t j = 0; j < p; ++j) {
        EXPECT_NEAR(out.communalities[j], in.communalities[j], 1e-10);
      }
      const Matrix tt = out.rotation_matrix.transpose() * out.rotation_matrix;
      EXPECT_LT(max_abs_diff(tt, Matrix::identity(m)), 1e-10);
      EXPECT_LT(max_abs_diff(in.loadings * out.rotation_matrix, out.loadings), 1e-12);
      const auto& h = out.rotation_info.criterion_history;
      for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1] - 1e-14);
      EXPECT_LT(max_abs_diff(out.phi, Matrix::identity(m)), 0.0 + 1e-300);
    }
  }
}

TEST(Varimax, SingleFactorPassesThrough) {
  const auto in = make_solution(Matrix{{0.7}, {0.6}, {0.5}});
  const auto out = rotate_varimax(in);
  EXPECT_EQ(out.loadings, in.loadings);
  EXPECT_EQ(out.rotation, Rotation::None);
}

TEST(Oblimin, CriterionGradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (double gamma : {0.0, 0.5, -1.0}) {
    Matrix L(5, 3);
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t k = 0; k < 3; ++k) L(j, k) = u(gen);
    const auto q = oblimin_criterion(L, gamma);
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t k = 0; k < 3; ++k) {
        Matrix up = L, down = L;
        up(j, k) += 1e-6;
        down(j, k) -= 1e-6;
        const double fd =
            (oblimin_criterion(up, gamma).value - oblimin_criterion(down, gamma).value) / 2e-6;
        EXPECT_NEAR(q.gradient(j, k), fd, 1e-7);
      }
  }
}

TEST(Oblimin, ReproducedMatrixIsRotationInvariant) {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 2 + t % 2, p = 4 * m;
    Matrix a(p, m);
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < m; ++k) a(j, k) = (k == j % m ? 0.7 : 0.0) + 0.25 * u(gen);
    const auto in = make_solution(a);
    const auto out = rotate_oblimin(in, {t % 3 == 0 ? 0.3 : 0.0, 1000, 1e-6});
    EXPECT_LT(max_abs_diff(reproduced_correlation(out).matrix(),
                           reproduced_correlation(in).matrix()),
              1e-8);
    for (std::size_t k = 0; k < m; ++k) EXPECT_EQ(out.phi(k, k), 1.0);
    EXPECT_LT(max_abs_diff(out.structure, out.loadings * out.phi), 1e-15);
    EXPECT_TRUE(out.rotation_info.converged);
  }
}

TEST(Oblimin, RecoversCorrelatedSimpleStructure) {
  const Matrix lam{{0.8, 0}, {0.7, 0}, {0.6, 0}, {0, 0.8}, {0, 0.7}, {0, 0.6}};
  const Matrix phi{{1.0, 0.5}, {0.5, 1.0}};
  const auto paf = extract_paf(population(lam, phi), 2, {}, {5000, 1e-10});
  const auto out = rotate_oblimin(paf);
  EXPECT_LT(aligned_error(out.loadings, lam), 1e-4);
  EXPECT_NEAR(out.phi(0, 1), 0.5, 1e-4);
}

TEST(Rotation, SimulatedPhiRoundTrips) {
  for (double phi12 : {0.0, 0.5}) {
    FactorModelSpec spec;
    spec.loadings = Matrix{{0.8, 0}, {0.8, 0}, {0.8, 0}, {0, 0.8}, {0, 0.8}, {0, 0.8}};
    spec.phi = Matrix{{1.0, phi12}, {phi12, 1.0}};
    spec.n = 2000;
    spec.seed = 2024;
    const auto ds = generate(spec);
    const auto view = complete_cases(ds);
    const auto out = rotate_oblimin(extract_paf(correlation_matrix(view), 2, view.items));
    EXPECT_NEAR(out.phi(0, 1), phi12, 0.1);
  }
}

TEST(Recovery, PopulationGridWithinTolerance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> h2(0.3, 0.81), corr(0.2, 0.5);
    std::uniform_int_distribution<int> per(3, 5);
    std::bernoulli_distribution flip(0.3);
    const std::size_t m = 2 + seed % 2;
    std::vector<std::size_t> owner;
    for (std::size_t k = 0; k < m; ++k)
      for (int i = per(gen); i > 0; --i) owner.push_back(k);
    Matrix lam(owner.size(), m, 0.0);
    for (std::size_t j = 0; j < owner.size(); ++j) {
      lam(j, owner[j]) = (flip(gen) ? -1.0 : 1.0) * std::sqrt(h2(gen));
    }
    const bool oblique = seed % 2 == 0;
    Matrix phi = Matrix::identity(m);
    if (oblique)
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) phi(a, b) = phi(b, a) = corr(gen);
    const auto paf = extract_paf(population(lam, phi), m);
    const auto out = oblique ? rotate_oblimin(paf) : rotate_varimax(paf);
    EXPECT_LT(aligned_error(out.loadings, lam), 0.02) << "seed " << seed;
  }
}

TEST(Assign, Examples) {
  const auto clear = assign_items(make_solution(Matrix{{0.8, 0.1}, {0.1, 0.8}}));
  EXPECT_EQ(clear[0].status, AssignmentStatus::Assigned);
  EXPECT_EQ(clear[0].factor, 0u);
  EXPECT_EQ(clear[1].factor, 1u);
  const auto cross = assign_items(make_solution(Matrix{{0.5, 0.5}}));
  EXPECT_EQ(cross[0].status, AssignmentStatus::CrossLoaded);
  ASSERT_TRUE(cross[0].second_factor.has_value());
  const auto weak = assign_items(make_solution(Matrix{{0.3, 0.2}}));
  EXPECT_EQ(weak[0].status, AssignmentStatus::Unassigned);
  const auto negative = assign_items(make_solution(Matrix{{-0.7, 0.1}}));
  EXPECT_EQ(negative[0].status, AssignmentStatus::Assigned);
  EXPECT_DOUBLE_EQ(negative[0].loading, -0.7);
}

TEST(Names, RoundTrip) {
  EXPECT_EQ(parse_rotation(to_string(Rotation::Oblimin)), Rotation::Oblimin);
  EXPECT_EQ(parse_extraction(to_string(Extraction::Pca)), Extraction::Pca);
  EXPECT_THROW((void)parse_rotation("promax"), Error);
}
