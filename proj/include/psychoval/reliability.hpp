#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "psychoval/core_stats.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/ingest.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

struct AlphaCoefficients {
  double raw = 0.0;
  double standardized = 0.0;
};

/// Cronbach's alpha from an item covariance matrix. The total-score variance
/// is the sum of all covariance entries.
[[nodiscard]] inline AlphaCoefficients alpha_from_covariance(const SymMatrix& cov) {
  const std::size_t k = cov.dim();
  if (k < 2) throw Error(Errc::TooFewItems, "alpha needs at least 2 items");
  double item_var = 0.0;
  double total_var = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(cov(i, i) > 0.0)) {
      throw Error(Errc::ZeroVariance, "item " + std::to_string(i + 1) + " has zero variance");
    }
    item_var += cov(i, i);
    for (std::size_t j = 0; j < k; ++j) total_var += cov(i, j);
  }
  const double kk = static_cast<double>(k);
  AlphaCoefficients a;
  a.raw = kk / (kk - 1.0) * (1.0 - item_var / total_var);

  double rsum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) rsum += cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
  const double rbar = rsum / (kk * (kk - 1.0) / 2.0);
  a.standardized = kk * rbar / (1.0 + (kk - 1.0) * rbar);
  return a;
}

struct AlphaReport {
  std::string scale;
  std::vector<std::string> items;
  std::size_t k = 0;
  std::size_t n = 0;  // listwise-complete respondents on the scale items
  double alpha_raw = 0.0;
  double alpha_standardized = 0.0;
  /// Corrected item-total correlation: item vs. the sum of the other items.
  std::vector<double> item_total_correlations;
  /// Empty optional when the reduced scale would have a single item (k = 2).
  std::vector<std::optional<double>> alpha_if_deleted;
  bool negative = false;

  bool operator==(const AlphaReport&) const = default;
};

/// Alpha report computed entirely from a covariance matrix.
[[nodiscard]] inline AlphaReport alpha_report(const SymMatrix& cov,
                                              std::vector<std::string> items = {}) {
  const std::size_t k = cov.dim();
  const auto coef = alpha_from_covariance(cov);
  AlphaReport rep;
  rep.k = k;
  rep.items = std::move(items);
  rep.alpha_raw = coef.raw;
  rep.alpha_standardized = coef.standardized;
  rep.negative = coef.raw < 0.0;

  double total = 0.0;
  std::vector<double> row_sum(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      row_sum[i] += cov(i, j);
      total += cov(i, j);
    }
  for (std::size_t i = 0; i < k; ++i) {
    const double cov_rest = row_sum[i] - cov(i, i);
    const double var_rest = total - 2.0 * row_sum[i] + cov(i, i);
    rep.item_total_correlations.push_back(
        var_rest > 0.0 ? cov_rest / std::sqrt(cov(i, i) * var_rest) : 0.0);

    if (k < 3) {
      rep.alpha_if_deleted.emplace_back(std::nullopt);
      continue;
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) keep.push_back(j);
    rep.alpha_if_deleted.emplace_back(alpha_from_covariance(cov.submatrix(keep)).raw);
  }
  return rep;
}

/// Cronbach's alpha for one scale over the respondents complete on its items.
[[nodiscard]] inline AlphaReport cronbach_alpha(const SurveyDataset& ds,
                                                const ScaleDefinition& scale) {
  validate_scale(ds, scale);
  if (scale.item_ids.size() < 2) {
    throw Error(Errc::TooFewItems, "scale '" + scale.name + "' has fewer than 2 items");
  }
  const auto sub = ds.select_items(scale.item_ids);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < sub.n(); ++r) {
    bool complete = true;
    for (std::size_t c = 0; c < sub.p() && complete; ++c) complete = sub.at(r, c).has_value();
    if (complete) rows.push_back(r);
  }
  if (rows.size() < 3) {
    throw Error(Errc::InsufficientRows, "scale '" + scale.name + "' has " +
                                            std::to_string(rows.size()) + " complete respondents");
  }
  Matrix data(rows.size(), sub.p());
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t c = 0; c < sub.p(); ++c) data(k, c) = *sub.at(rows[k], c);

  const SymMatrix cov = covariance_matrix(data);
  for (std::size_t c = 0; c < sub.p(); ++c)
    if (cov(c, c) == 0.0) {
      throw Error(Errc::ZeroVariance, "item '" + scale.item_ids[c] + "' in scale '" + scale.name +
                                          "' has zero variance");
    }
  auto rep = alpha_report(cov, scale.item_ids);
  rep.scale = scale.name;
  rep.n = rows.size();
  return rep;
}

struct RetestReport {
  std::vector<std::string> items;
  std::vector<double> item_r;
  double total_r = 0.0;
  std::size_t matched_n = 0;       // respondents used (matched and complete)
  std::size_t unmatched_first = 0;
  std::size_t unmatched_second = 0;
  std::size_t incomplete = 0;      // matched but missing a scale item on either occasion
};

/// Test-retest stability: respondents matched by exact id, then Pearson r per
/// item and for the scale total. Pairs are processed in id order so swapping
/// the occasions yields identical values.
[[nodiscard]] inline RetestReport test_retest(const SurveyDataset& first,
                                              const SurveyDataset& second,
                                              const ScaleDefinition& scale) {
  validate_scale(first, scale);
  validate_scale(second, scale);
  std::unordered_map<std::string, std::size_t> second_rows;
  for (std::size_t r = 0; r < second.n(); ++r) second_rows.emplace(second.respondents()[r], r);

  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> matched;
  for (std::size_t r = 0; r < first.n(); ++r) {
    const auto it = second_rows.find(first.respondents()[r]);
    if (it != second_rows.end()) matched.push_back({first.respondents()[r], {r, it->second}});
  }
  std::sort(matched.begin(), matched.end());

  RetestReport rep;
  rep.items = scale.item_ids;
  rep.unmatched_first = first.n() - matched.size();
  rep.unmatched_second = second.n() - matched.size();

  std::vector<std::size_t> idx1, idx2;
  for (const auto& id : scale.item_ids) {
    idx1.push_back(*first.item_index(id));
    idx2.push_back(*second.item_index(id));
  }
  const std::size_t k = scale.item_ids.size();
  std::vector<std::vector<double>> x1(k), x2(k);
  std::vector<double> t1, t2;
  for (const auto& [id, rows] : matched) {
    bool complete = true;
    for (std::size_t c = 0; c < k && complete; ++c)
      complete = first.at(rows.first, idx1[c]) && second.at(rows.second, idx2[c]);
    if (!complete) {
      ++rep.incomplete;
      continue;
    }
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double a = *first.at(rows.first, idx1[c]);
      const double b = *second.at(rows.second, idx2[c]);
      x1[c].push_back(a);
      x2[c].push_back(b);
      s1 += a;
      s2 += b;
    }
    t1.push_back(s1);
    t2.push_back(s2);
  }
  rep.matched_n = t1.size();
  if (rep.matched_n < 3) {
    throw Error(Errc::NoOverlap, std::to_string(rep.matched_n) +
                                     " complete respondents appear on both occasions");
  }

  auto correlate = [](const std::vector<double>& a, const std::vector<double>& b,
                      const std::string& what) {
    try {
      return pearson(a, b);
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroVariance) throw;
      const char* which = e.detail().starts_with("first") ? "first" : "second";
      throw Error(Errc::ZeroVariance, std::string(which) + " dataset: " + what + " is constant");
    }
  };
  for (std::size_t c = 0; c < k; ++c) {
    rep.item_r.push_back(correlate(x1[c], x2[c], "item '" + scale.item_ids[c] + "'"));
  }
  rep.total_r = correlate(t1, t2, "total score of '" + scale.name + "'");
  return rep;
}

}  // namespace psychoval
