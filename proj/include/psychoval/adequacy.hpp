#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "psychoval/core_stats.hpp"
#include "psychoval/efa.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/ingest.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

struct BartlettResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool operator==(const BartlettResult&) const = default;
};

/// Bartlett's test of sphericity: H0 is R = I.
/// chi2 = -(n - 1 - (2p + 5) / 6) ln|R|, df = p(p - 1) / 2.
[[nodiscard]] inline BartlettResult bartlett_sphericity(const SymMatrix& R, std::size_t n) {
  const std::size_t p = R.dim();
  if (p < 2) throw Error(Errc::TooFewItems, "sphericity needs at least 2 items");
  if (n <= p) {
    throw Error(Errc::SampleTooSmall, "n = " + std::to_string(n) + " must exceed p = " +
                                          std::to_string(p));
  }
  const double logdet = log_determinant(R);
  const double factor = static_cast<double>(n) - 1.0 - (2.0 * static_cast<double>(p) + 5.0) / 6.0;
  BartlettResult out;
  out.chi2 = std::max(0.0, -factor * logdet);
  out.df = static_cast<int>(p * (p - 1) / 2);
  out.p_value = chi_square_sf(out.chi2, out.df);
  return out;
}

struct KmoResult {
  double overall = 0.0;
  std::vector<double> msa;
  SymMatrix anti_image;  // partial correlations, unit diagonal
};

/// Kaiser-Meyer-Olkin adequacy from partial correlations of R^-1. A ratio
/// with an all-zero denominator (no correlation at all) is reported as 0.
[[nodiscard]] inline KmoResult kmo(const SymMatrix& R) {
  const std::size_t p = R.dim();
  const SymMatrix S = inverse(R);
  KmoResult out;
  out.anti_image = SymMatrix::identity(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      out.anti_image.set(i, j, -S(i, j) / std::sqrt(S(i, i) * S(j, j)));
    }
  double r2_total = 0.0, q2_total = 0.0;
  out.msa.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double r2 = 0.0, q2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (i == j) continue;
      r2 += R(i, j) * R(i, j);
      q2 += out.anti_image(i, j) * out.anti_image(i, j);
    }
    out.msa[j] = r2 + q2 > 0.0 ? r2 / (r2 + q2) : 0.0;
    r2_total += r2;
    q2_total += q2;
  }
  out.overall = r2_total + q2_total > 0.0 ? r2_total / (r2_total + q2_total) : 0.0;
  return out;
}

/// Sphericity plus sampling adequacy on one correlation matrix.
struct AdequacyReport {
  BartlettResult bartlett;
  double kmo_overall = 0.0;
  std::vector<std::string> items;
  std::vector<double> msa;  // aligned with `items`
  std::size_t n = 0;
  std::size_t p = 0;
  bool operator==(const AdequacyReport&) const = default;
};

[[nodiscard]] inline AdequacyReport assess_adequacy(const SymMatrix& R, std::size_t n,
                                                    std::vector<std::string> items) {
  AdequacyReport rep;
  rep.bartlett = bartlett_sphericity(R, n);
  const auto k = kmo(R);
  rep.kmo_overall = k.overall;
  rep.msa = k.msa;
  rep.items = std::move(items);
  rep.n = n;
  rep.p = R.dim();
  return rep;
}

struct PruneStep {
  std::string item;
  double msa = 0.0;        // the item's MSA when it was removed
  double kmo_after = 0.0;  // overall KMO on the remaining items
  bool operator==(const PruneStep&) const = default;
};

struct PruneTrail {
  std::vector<PruneStep> steps;
  std::vector<std::string> retained;
  std::vector<double> final_msa;  // aligned with `retained`
  double initial_kmo = 0.0;
  double final_kmo = 0.0;
  bool reached_threshold = true;
  /// "threshold_met" or "CannotReachThreshold" (stopped at 3 items).
  std::string termination = "threshold_met";
  bool operator==(const PruneTrail&) const = default;
};

/// Removes the single lowest-MSA item (first in item order on ties) while its
/// MSA is below `threshold` and more than three items remain. Works on
/// principal submatrices of R, which equal the correlations of the item subset.
/// With `strict`, an unreachable threshold raises CannotReachThreshold instead
/// of being recorded in the trail.
[[nodiscard]] inline PruneTrail msa_prune(const SymMatrix& R, const std::vector<std::string>& items,
                                          double threshold = 0.5, bool strict = false) {
  if (items.size() != R.dim()) throw Error(Errc::LengthMismatch, "item labels vs matrix size");
  std::vector<std::size_t> keep(R.dim());
  for (std::size_t j = 0; j < keep.size(); ++j) keep[j] = j;

  PruneTrail trail;
  auto current = kmo(R.submatrix(keep));
  trail.initial_kmo = current.overall;
  while (true) {
    const auto low = std::min_element(current.msa.begin(), current.msa.end());
    if (low == current.msa.end() || !(*low < threshold)) break;
    if (keep.size() <= 3) {
      trail.reached_threshold = false;
      trail.termination = "CannotReachThreshold";
      break;
    }
    const auto pos = static_cast<std::size_t>(low - current.msa.begin());
    PruneStep step;
    step.item = items[keep[pos]];
    step.msa = *low;
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(pos));
    current = kmo(R.submatrix(keep));
    step.kmo_after = current.overall;
    trail.steps.push_back(std::move(step));
  }
  for (std::size_t j : keep) trail.retained.push_back(items[j]);
  trail.final_msa = current.msa;
  trail.final_kmo = current.overall;
  if (strict && !trail.reached_threshold) {
    throw Error(Errc::CannotReachThreshold,
                "minimum MSA still below " + std::to_string(threshold) + " with 3 items left");
  }
  return trail;
}

[[nodiscard]] inline PruneTrail msa_prune(const SurveyDataset& ds, double threshold = 0.5,
                                          MissingPolicy policy = MissingPolicy::Listwise) {
  const auto view = complete_cases(ds, policy);
  return msa_prune(correlation_matrix(view), view.items, threshold);
}

enum class CommunalityBand { High, Moderate, Low };

[[nodiscard]] inline std::string_view to_string(CommunalityBand b) noexcept {
  switch (b) {
    case CommunalityBand::High: return "high";
    case CommunalityBand::Moderate: return "moderate";
    case CommunalityBand::Low: return "low";
  }
  return "low";
}

/// Advisory heuristic on whether n is comfortable for the solution found.
struct SampleAdvice {
  double mean_communality = 0.0;
  CommunalityBand band = CommunalityBand::Low;
  double items_per_factor = 0.0;
  std::size_t n = 0;
  bool caution = false;
  std::string label = "advisory heuristic";
  bool operator==(const SampleAdvice&) const = default;
};

inline constexpr double kHighCommunality = 0.7;
inline constexpr double kModerateCommunality = 0.4;
inline constexpr double kComfortableItemsPerFactor = 4.0;
inline constexpr std::size_t kComfortableSampleSize = 300;

[[nodiscard]] inline SampleAdvice sample_adequacy_advice(const FactorSolution& s, std::size_t n) {
  SampleAdvice a;
  a.n = n;
  if (!s.communalities.empty()) {
    // Extended accumulation so equal communalities give their exact mean at
    // the band boundaries.
    long double sum = 0.0L;
    for (double h : s.communalities) sum += h;
    a.mean_communality =
        static_cast<double>(sum / static_cast<long double>(s.communalities.size()));
  }
  a.band = a.mean_communality >= kHighCommunality       ? CommunalityBand::High
           : a.mean_communality >= kModerateCommunality ? CommunalityBand::Moderate
                                                        : CommunalityBand::Low;
  a.items_per_factor = s.m() ? static_cast<double>(s.p()) / static_cast<double>(s.m()) : 0.0;
  a.caution = a.band == CommunalityBand::Low && a.items_per_factor < kComfortableItemsPerFactor &&
              n < kComfortableSampleSize;
  return a;
}

}  // namespace psychoval
