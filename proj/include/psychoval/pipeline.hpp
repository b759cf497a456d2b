#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psychoval/adequacy.hpp"
#include "psychoval/core_stats.hpp"
#include "psychoval/efa.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/ingest.hpp"
#include "psychoval/reliability.hpp"

namespace psychoval {

/// `kaiser` or `fixed:k`.
struct RetentionRule {
  bool kaiser = true;
  std::size_t fixed = 0;
  bool operator==(const RetentionRule&) const = default;
};

[[nodiscard]] inline std::string to_string(const RetentionRule& r) {
  return r.kaiser ? "kaiser" : "fixed:" + std::to_string(r.fixed);
}

[[nodiscard]] inline RetentionRule parse_retention(std::string_view s) {
  if (s == "kaiser") return {};
  if (s.starts_with("fixed:")) {
    const std::string digits(s.substr(6));
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
      const auto k = std::stoul(digits);
      if (k >= 1) return {false, k};
    }
  }
  throw Error(Errc::InvalidConfig, "retention must be 'kaiser' or 'fixed:k' with k >= 1, got '" +
                                       std::string(s) + "'");
}

struct ValidationConfig {
  // Echo of how the dataset was read; not used by the analysis itself.
  int likert_min = 1;
  int likert_max = 7;
  std::string missing_token = "NA";
  std::vector<std::string> reverse_items;
  std::uint64_t seed = 42;

  MissingPolicy missing_policy = MissingPolicy::Listwise;
  double bartlett_alpha = 0.05;
  bool force = false;
  double msa_threshold = 0.5;
  Extraction extraction = Extraction::Paf;
  RetentionRule retention;
  Rotation rotation = Rotation::Oblimin;
  double gamma = 0.0;
  double loading_cutoff = 0.4;
  PafOptions paf;
  VarimaxOptions varimax;
  int oblimin_max_iter = 1000;
  double oblimin_tolerance = 1e-6;
  std::string alpha_placement = "per_factor_after_rotation";

  bool operator==(const ValidationConfig& o) const {
    return likert_min == o.likert_min && likert_max == o.likert_max &&
           missing_token == o.missing_token && reverse_items == o.reverse_items &&
           seed == o.seed && missing_policy == o.missing_policy &&
           bartlett_alpha == o.bartlett_alpha && force == o.force &&
           msa_threshold == o.msa_threshold && extraction == o.extraction &&
           retention == o.retention && rotation == o.rotation && gamma == o.gamma &&
           loading_cutoff == o.loading_cutoff && paf.max_iter == o.paf.max_iter &&
           paf.tolerance == o.paf.tolerance &&
           varimax.kaiser_normalize == o.varimax.kaiser_normalize &&
           varimax.max_sweeps == o.varimax.max_sweeps &&
           varimax.tolerance == o.varimax.tolerance && oblimin_max_iter == o.oblimin_max_iter &&
           oblimin_tolerance == o.oblimin_tolerance && alpha_placement == o.alpha_placement;
  }
};

inline void validate_config(const ValidationConfig& c) {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (!(c.bartlett_alpha > 0.0 && c.bartlett_alpha < 1.0)) fail("bartlett alpha must be in (0,1)");
  if (!(c.msa_threshold >= 0.0 && c.msa_threshold <= 1.0)) fail("msa threshold must be in [0,1]");
  if (!(c.loading_cutoff >= 0.0 && c.loading_cutoff <= 1.0)) {
    fail("loading cutoff must be in [0,1]");
  }
  if (!std::isfinite(c.gamma) || c.gamma > 1.0) fail("oblimin gamma must be finite and <= 1");
  if (c.paf.max_iter < 1 || !(c.paf.tolerance > 0.0)) fail("PAF iteration settings");
  if (!c.retention.kaiser && c.retention.fixed < 1) fail("fixed retention needs k >= 1");
  if (c.likert_min >= c.likert_max) fail("likert bounds need min < max");
}

struct Warning {
  std::string code;
  std::string stage;
  std::string message;
  bool operator==(const Warning&) const = default;
};

struct DatasetSummary {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<std::string> items;
  std::size_t missing_cells = 0;
  MissingPolicy missing_policy = MissingPolicy::Listwise;
  std::size_t effective_n = 0;
  bool operator==(const DatasetSummary&) const = default;
};

struct ScaleResult {
  std::string name;
  std::size_t factor = 0;
  std::vector<std::string> items;     // assigned items used for alpha
  std::vector<std::string> excluded;  // cross-loaded or unassigned items peaking on this factor
  std::optional<AlphaReport> alpha;   // absent with fewer than 2 items
  bool operator==(const ScaleResult&) const = default;
};

struct StageRecord {
  int seq = 0;
  std::string name;
  bool operator==(const StageRecord&) const = default;
};

struct ValidationReport {
  DatasetSummary dataset;
  AdequacyReport adequacy;
  PruneTrail prune_trail;
  std::string retention_rule;
  bool retention_forced = false;
  FactorSolution solution;
  std::vector<ItemAssignment> assignments;
  std::vector<ScaleResult> scales;
  SampleAdvice sample_advice;
  std::vector<Warning> warnings;
  std::vector<StageRecord> stages;
  ValidationConfig config;
  bool operator==(const ValidationReport&) const = default;
};

namespace detail {

class WarningLog {
 public:
  explicit WarningLog(std::vector<Warning>& out) : out_(out) {}
  void add(std::string code, std::string stage, std::string message) {
    Warning w{std::move(code), std::move(stage), std::move(message)};
    if (std::find(out_.begin(), out_.end(), w) == out_.end()) out_.push_back(std::move(w));
  }

 private:
  std::vector<Warning>& out_;
};

template <typename F>
auto run_stage(std::vector<StageRecord>& stages, const char* name, F&& body) {
  stages.push_back({static_cast<int>(stages.size()) + 1, name});
  try {
    return body();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.in_stage(name);
  }
}

inline std::string fmt(double v) {
  std::ostringstream o;
  o.precision(4);
  o << v;
  return o.str();
}

}  // namespace detail

/// Runs, in order: missing-data policy, correlations, Bartlett (abort unless
/// significant or forced), KMO and MSA pruning, extraction with retention,
/// rotation, canonical ordering, item assignment, per-factor alpha and the
/// sample-size advisory.
[[nodiscard]] inline ValidationReport run_validation(const SurveyDataset& ds,
                                                     const ValidationConfig& config = {}) {
  validate_config(config);
  ValidationReport rep;
  rep.config = config;
  rep.retention_rule = to_string(config.retention);
  auto& stages = rep.stages;
  detail::WarningLog warn(rep.warnings);

  const AnalysisView view = detail::run_stage(stages, "missing_data", [&] {
    return complete_cases(ds, config.missing_policy);
  });
  rep.dataset = {ds.n(), ds.p(), ds.items(), ds.missing_count(), config.missing_policy,
                 view.effective_n};

  const SymMatrix R =
      detail::run_stage(stages, "correlation", [&] { return correlation_matrix(view); });

  detail::run_stage(stages, "bartlett", [&] {
    rep.adequacy.bartlett = bartlett_sphericity(R, view.effective_n);
    if (rep.adequacy.bartlett.p_value > config.bartlett_alpha) {
      const std::string msg = "sphericity not rejected: p = " +
                              detail::fmt(rep.adequacy.bartlett.p_value) + " > alpha = " +
                              detail::fmt(config.bartlett_alpha);
      if (!config.force) throw Error(Errc::AssumptionsNotMet, msg);
      warn.add("AssumptionsNotMet", "bartlett", msg + " (continued with --force)");
    }
  });

  detail::run_stage(stages, "kmo", [&] {
    const auto k = kmo(R);
    rep.adequacy.kmo_overall = k.overall;
    rep.adequacy.msa = k.msa;
    rep.adequacy.items = view.items;
    rep.adequacy.n = view.effective_n;
    rep.adequacy.p = R.dim();
    if (k.overall < config.msa_threshold) {
      warn.add("KmoBelowThreshold", "kmo",
               "overall KMO " + detail::fmt(k.overall) + " below " +
                   detail::fmt(config.msa_threshold) + " before pruning");
    }
  });

  rep.prune_trail = detail::run_stage(stages, "prune", [&] {
    return msa_prune(R, view.items, config.msa_threshold);
  });
  if (!rep.prune_trail.reached_threshold) {
    warn.add("CannotReachThreshold", "prune",
             "minimum MSA still below " + detail::fmt(config.msa_threshold) +
                 " with 3 items retained");
  }

  std::vector<std::size_t> keep;
  for (const auto& id : rep.prune_trail.retained) {
    keep.push_back(static_cast<std::size_t>(
        std::find(view.items.begin(), view.items.end(), id) - view.items.begin()));
  }
  const SymMatrix Rk = R.submatrix(keep);
  const auto& kept_items = rep.prune_trail.retained;

  const std::size_t m = detail::run_stage(stages, "retention", [&]() -> std::size_t {
    if (!config.retention.kaiser) {
      if (config.retention.fixed > Rk.dim()) {
        throw Error(Errc::BadFactorCount, "fixed:" + std::to_string(config.retention.fixed) +
                                              " exceeds " + std::to_string(Rk.dim()) + " items");
      }
      return config.retention.fixed;
    }
    const auto eig = sym_eigen(Rk);
    const auto r = retain_kaiser(eig.eigenvalues);
    rep.retention_forced = r.forced;
    if (r.forced) warn.add("ForcedSingleFactor", "retention", "no eigenvalue exceeds 1");
    return r.m;
  });

  FactorSolution sol = detail::run_stage(stages, "extraction", [&] {
    return config.extraction == Extraction::Pca ? extract_pca(Rk, m, kept_items)
                                                : extract_paf(Rk, m, kept_items, config.paf);
  });
  if (sol.heywood) {
    warn.add("HeywoodCase", "extraction", "a communality exceeded 1 and was clamped");
  }

  sol = detail::run_stage(stages, "rotation", [&] {
    switch (config.rotation) {
      case Rotation::Varimax: return rotate_varimax(sol, config.varimax);
      case Rotation::Oblimin:
        return rotate_oblimin(sol, {config.gamma, config.oblimin_max_iter,
                                    config.oblimin_tolerance});
      case Rotation::None: break;
    }
    return sol;
  });

  rep.solution = detail::run_stage(stages, "canonicalize", [&] { return sort_and_sign(sol); });

  rep.assignments = detail::run_stage(stages, "assignment", [&] {
    return assign_items(rep.solution, config.loading_cutoff);
  });
  for (const auto& a : rep.assignments) {
    if (a.status == AssignmentStatus::CrossLoaded) {
      warn.add("CrossLoading", "assignment",
               "item '" + a.item + "' loads >= " + detail::fmt(config.loading_cutoff) +
                   " on F" + std::to_string(a.factor + 1) + " and F" +
                   std::to_string(*a.second_factor + 1));
    }
  }

  detail::run_stage(stages, "reliability", [&] {
    // Listwise and strict policies score alpha on the same respondents as the
    // factor analysis; pairwise uses each scale's own complete cases.
    const SurveyDataset scored = config.missing_policy == MissingPolicy::Pairwise
                                     ? ds
                                     : ds.select_respondents(view.respondents);
    for (std::size_t k = 0; k < rep.solution.m(); ++k) {
      ScaleResult scale;
      scale.factor = k;
      scale.name = "F" + std::to_string(k + 1);
      for (const auto& a : rep.assignments) {
        if (a.factor != k) continue;
        (a.status == AssignmentStatus::Assigned ? scale.items : scale.excluded).push_back(a.item);
      }
      if (scale.items.size() >= 2) {
        scale.alpha = cronbach_alpha(scored, {scale.name, scale.items});
        if (scale.alpha->negative) {
          warn.add("NegativeAlpha", "reliability",
                   scale.name + " alpha = " + detail::fmt(scale.alpha->alpha_raw) +
                       " (check for mis-keyed items)");
        }
      } else {
        warn.add("TooFewItemsForAlpha", "reliability",
                 scale.name + " has " + std::to_string(scale.items.size()) + " assigned item(s)");
      }
      rep.scales.push_back(std::move(scale));
    }
  });

  rep.sample_advice = detail::run_stage(stages, "advice", [&] {
    return sample_adequacy_advice(rep.solution, view.effective_n);
  });
  if (rep.sample_advice.caution) {
    warn.add("SampleSizeCaution", "advice",
             "low communalities, few items per factor and n < 300 (advisory heuristic)");
  }
  return rep;
}

}  // namespace psychoval
