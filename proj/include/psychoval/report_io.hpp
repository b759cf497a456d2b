#pragma once

// JSON (stable key order) and aligned-text renderings of the validation
// report. JSON round-trips: from_json(to_json(r)) == r.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "psychoval/pipeline.hpp"

namespace psychoval {

using Json = nlohmann::ordered_json;

inline void to_json(Json& j, const Matrix& m) {
  j = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (double v : m.row(r)) row.push_back(v);
    j.push_back(std::move(row));
  }
}

inline void from_json(const Json& j, Matrix& m) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) rows.push_back(row.get<std::vector<double>>());
  m = Matrix::from_rows(rows);
}

namespace detail {

inline Json labelled(const std::vector<std::string>& keys, const std::vector<double>& values) {
  Json o = Json::object();
  for (std::size_t i = 0; i < keys.size() && i < values.size(); ++i) o[keys[i]] = values[i];
  return o;
}

inline std::vector<double> unlabelled(const Json& o, const std::vector<std::string>& keys) {
  std::vector<double> out;
  for (const auto& k : keys) out.push_back(o.at(k).get<double>());
  return out;
}

inline Json convergence_json(const ConvergenceInfo& c) {
  return {{"iterations", c.iterations},
          {"achieved", c.achieved},
          {"converged", c.converged},
          {"criterion_history", c.criterion_history}};
}

inline ConvergenceInfo convergence_from(const Json& j) {
  ConvergenceInfo c;
  c.iterations = j.at("iterations").get<int>();
  c.achieved = j.at("achieved").get<double>();
  c.converged = j.at("converged").get<bool>();
  c.criterion_history = j.at("criterion_history").get<std::vector<double>>();
  return c;
}

}  // namespace detail

inline Json solution_json(const FactorSolution& s, const std::string& retention_rule,
                          bool forced) {
  Json j;
  j["extraction"] = to_string(s.extraction);
  j["rotation"] = to_string(s.rotation);
  j["gamma"] = s.gamma;
  j["m"] = s.m();
  j["retention"] = {{"rule", retention_rule}, {"forced", forced}};
  j["items"] = s.items;
  j["eigenvalues"] = s.eigenvalues;
  j["loadings"] = s.loadings;
  j["structure"] = s.structure;
  j["phi"] = s.phi;
  j["rotation_matrix"] = s.rotation_matrix;
  j["communalities"] = detail::labelled(s.items, s.communalities);
  j["uniquenesses"] = detail::labelled(s.items, s.uniquenesses);
  j["variance_explained"] = s.variance_explained;
  j["cumulative_variance"] = s.cumulative_variance;
  j["heywood"] = s.heywood;
  j["convergence"] = {{"extraction", detail::convergence_json(s.extraction_info)},
                      {"rotation", detail::convergence_json(s.rotation_info)}};
  return j;
}

inline FactorSolution solution_from_json(const Json& j) {
  FactorSolution s;
  s.extraction = parse_extraction(j.at("extraction").get<std::string>());
  s.rotation = parse_rotation(j.at("rotation").get<std::string>());
  s.gamma = j.at("gamma").get<double>();
  s.items = j.at("items").get<std::vector<std::string>>();
  s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  s.loadings = j.at("loadings").get<Matrix>();
  s.structure = j.at("structure").get<Matrix>();
  s.phi = j.at("phi").get<Matrix>();
  s.rotation_matrix = j.at("rotation_matrix").get<Matrix>();
  s.communalities = detail::unlabelled(j.at("communalities"), s.items);
  s.uniquenesses = detail::unlabelled(j.at("uniquenesses"), s.items);
  s.variance_explained = j.at("variance_explained").get<std::vector<double>>();
  s.cumulative_variance = j.at("cumulative_variance").get<std::vector<double>>();
  s.heywood = j.at("heywood").get<bool>();
  s.extraction_info = detail::convergence_from(j.at("convergence").at("extraction"));
  s.rotation_info = detail::convergence_from(j.at("convergence").at("rotation"));
  return s;
}

inline Json config_json(const ValidationConfig& c) {
  return {{"likert", {c.likert_min, c.likert_max}},
          {"missing_token", c.missing_token},
          {"reverse_items", c.reverse_items},
          {"seed", c.seed},
          {"missing_policy", to_string(c.missing_policy)},
          {"bartlett_alpha", c.bartlett_alpha},
          {"force", c.force},
          {"msa_threshold", c.msa_threshold},
          {"extraction", to_string(c.extraction)},
          {"retention", to_string(c.retention)},
          {"rotation", to_string(c.rotation)},
          {"gamma", c.gamma},
          {"loading_cutoff", c.loading_cutoff},
          {"paf", {{"max_iter", c.paf.max_iter}, {"tolerance", c.paf.tolerance}}},
          {"varimax",
           {{"kaiser_normalize", c.varimax.kaiser_normalize},
            {"max_sweeps", c.varimax.max_sweeps},
            {"tolerance", c.varimax.tolerance}}},
          {"oblimin", {{"max_iter", c.oblimin_max_iter}, {"tolerance", c.oblimin_tolerance}}},
          {"alpha_placement", c.alpha_placement},
          {"advisory_thresholds",
           {{"label", "advisory heuristic"},
            {"high_communality", kHighCommunality},
            {"moderate_communality", kModerateCommunality},
            {"items_per_factor", kComfortableItemsPerFactor},
            {"sample_size", kComfortableSampleSize}}}};
}

inline ValidationConfig config_from_json(const Json& j) {
  ValidationConfig c;
  c.likert_min = j.at("likert").at(0).get<int>();
  c.likert_max = j.at("likert").at(1).get<int>();
  c.missing_token = j.at("missing_token").get<std::string>();
  c.reverse_items = j.at("reverse_items").get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.missing_policy = parse_missing_policy(j.at("missing_policy").get<std::string>());
  c.bartlett_alpha = j.at("bartlett_alpha").get<double>();
  c.force = j.at("force").get<bool>();
  c.msa_threshold = j.at("msa_threshold").get<double>();
  c.extraction = parse_extraction(j.at("extraction").get<std::string>());
  c.retention = parse_retention(j.at("retention").get<std::string>());
  c.rotation = parse_rotation(j.at("rotation").get<std::string>());
  c.gamma = j.at("gamma").get<double>();
  c.loading_cutoff = j.at("loading_cutoff").get<double>();
  c.paf.max_iter = j.at("paf").at("max_iter").get<int>();
  c.paf.tolerance = j.at("paf").at("tolerance").get<double>();
  c.varimax.kaiser_normalize = j.at("varimax").at("kaiser_normalize").get<bool>();
  c.varimax.max_sweeps = j.at("varimax").at("max_sweeps").get<int>();
  c.varimax.tolerance = j.at("varimax").at("tolerance").get<double>();
  c.oblimin_max_iter = j.at("oblimin").at("max_iter").get<int>();
  c.oblimin_tolerance = j.at("oblimin").at("tolerance").get<double>();
  c.alpha_placement = j.at("alpha_placement").get<std::string>();
  return c;
}

[[nodiscard]] inline Json to_json(const ValidationReport& r) {
  Json j;
  j["dataset"] = {{"n", r.dataset.n},
                  {"p", r.dataset.p},
                  {"items", r.dataset.items},
                  {"missing_cells", r.dataset.missing_cells},
                  {"missing_policy", to_string(r.dataset.missing_policy)},
                  {"effective_n", r.dataset.effective_n}};
  j["adequacy"] = {{"bartlett",
                    {{"chi2", r.adequacy.bartlett.chi2},
                     {"df", r.adequacy.bartlett.df},
                     {"p", r.adequacy.bartlett.p_value}}},
                   {"kmo_overall", r.adequacy.kmo_overall},
                   {"kmo_acceptable", r.adequacy.kmo_overall >= r.config.msa_threshold},
                   {"msa", detail::labelled(r.adequacy.items, r.adequacy.msa)},
                   {"n", r.adequacy.n},
                   {"p", r.adequacy.p}};
  Json steps = Json::array();
  for (const auto& s : r.prune_trail.steps) {
    steps.push_back({{"item", s.item}, {"msa", s.msa}, {"kmo_after", s.kmo_after}});
  }
  j["prune_trail"] = steps;
  j["prune_summary"] = {{"retained", r.prune_trail.retained},
                        {"final_msa", detail::labelled(r.prune_trail.retained,
                                                       r.prune_trail.final_msa)},
                        {"initial_kmo", r.prune_trail.initial_kmo},
                        {"final_kmo", r.prune_trail.final_kmo},
                        {"reached_threshold", r.prune_trail.reached_threshold},
                        {"termination", r.prune_trail.termination}};
  j["solution"] = solution_json(r.solution, r.retention_rule, r.retention_forced);

  Json assign = Json::array();
  for (const auto& a : r.assignments) {
    Json e = {{"item", a.item},
              {"status", to_string(a.status)},
              {"factor", a.factor},
              {"loading", a.loading}};
    e["second_factor"] = a.second_factor ? Json(*a.second_factor) : Json(nullptr);
    assign.push_back(std::move(e));
  }
  j["assignments"] = assign;

  Json scales = Json::array();
  for (const auto& s : r.scales) {
    Json e = {{"name", s.name}, {"factor", s.factor}, {"items", s.items},
              {"excluded", s.excluded}};
    if (s.alpha) {
      const auto& a = *s.alpha;
      e["n"] = a.n;
      e["alpha_raw"] = a.alpha_raw;
      e["alpha_standardized"] = a.alpha_standardized;
      Json del = Json::object();
      for (std::size_t i = 0; i < a.items.size(); ++i) {
        del[a.items[i]] = a.alpha_if_deleted[i] ? Json(*a.alpha_if_deleted[i]) : Json(nullptr);
      }
      e["alpha_if_deleted"] = del;
      e["item_total_correlations"] = detail::labelled(a.items, a.item_total_correlations);
      e["negative_alpha"] = a.negative;
    } else {
      e["n"] = nullptr;
      e["alpha_raw"] = nullptr;
      e["alpha_standardized"] = nullptr;
      e["alpha_if_deleted"] = nullptr;
      e["item_total_correlations"] = nullptr;
      e["negative_alpha"] = nullptr;
    }
    scales.push_back(std::move(e));
  }
  j["scales"] = scales;
  j["sample_advice"] = {{"label", r.sample_advice.label},
                        {"mean_communality", r.sample_advice.mean_communality},
                        {"band", to_string(r.sample_advice.band)},
                        {"items_per_factor", r.sample_advice.items_per_factor},
                        {"n", r.sample_advice.n},
                        {"caution", r.sample_advice.caution}};
  Json warnings = Json::array();
  for (const auto& w : r.warnings) {
    warnings.push_back({{"code", w.code}, {"stage", w.stage}, {"message", w.message}});
  }
  j["warnings"] = warnings;
  Json stages = Json::array();
  for (const auto& s : r.stages) stages.push_back({{"seq", s.seq}, {"name", s.name}});
  j["stages"] = stages;
  j["config"] = config_json(r.config);
  return j;
}

[[nodiscard]] inline ValidationReport report_from_json(const Json& j) {
  ValidationReport r;
  const auto& d = j.at("dataset");
  r.dataset.n = d.at("n").get<std::size_t>();
  r.dataset.p = d.at("p").get<std::size_t>();
  r.dataset.items = d.at("items").get<std::vector<std::string>>();
  r.dataset.missing_cells = d.at("missing_cells").get<std::size_t>();
  r.dataset.missing_policy = parse_missing_policy(d.at("missing_policy").get<std::string>());
  r.dataset.effective_n = d.at("effective_n").get<std::size_t>();

  const auto& a = j.at("adequacy");
  r.adequacy.bartlett.chi2 = a.at("bartlett").at("chi2").get<double>();
  r.adequacy.bartlett.df = a.at("bartlett").at("df").get<int>();
  r.adequacy.bartlett.p_value = a.at("bartlett").at("p").get<double>();
  r.adequacy.kmo_overall = a.at("kmo_overall").get<double>();
  for (const auto& [item, v] : a.at("msa").items()) {
    r.adequacy.items.push_back(item);
    r.adequacy.msa.push_back(v.get<double>());
  }
  r.adequacy.n = a.at("n").get<std::size_t>();
  r.adequacy.p = a.at("p").get<std::size_t>();

  for (const auto& s : j.at("prune_trail")) {
    r.prune_trail.steps.push_back(
        {s.at("item").get<std::string>(), s.at("msa").get<double>(), s.at("kmo_after").get<double>()});
  }
  const auto& ps = j.at("prune_summary");
  r.prune_trail.retained = ps.at("retained").get<std::vector<std::string>>();
  r.prune_trail.final_msa = detail::unlabelled(ps.at("final_msa"), r.prune_trail.retained);
  r.prune_trail.initial_kmo = ps.at("initial_kmo").get<double>();
  r.prune_trail.final_kmo = ps.at("final_kmo").get<double>();
  r.prune_trail.reached_threshold = ps.at("reached_threshold").get<bool>();
  r.prune_trail.termination = ps.at("termination").get<std::string>();

  const auto& s = j.at("solution");
  r.solution = solution_from_json(s);
  r.retention_rule = s.at("retention").at("rule").get<std::string>();
  r.retention_forced = s.at("retention").at("forced").get<bool>();

  for (const auto& e : j.at("assignments")) {
    ItemAssignment ia;
    ia.item = e.at("item").get<std::string>();
    const auto status = e.at("status").get<std::string>();
    ia.status = status == "assigned"       ? AssignmentStatus::Assigned
                : status == "cross_loaded" ? AssignmentStatus::CrossLoaded
                                           : AssignmentStatus::Unassigned;
    ia.factor = e.at("factor").get<std::size_t>();
    ia.loading = e.at("loading").get<double>();
    if (!e.at("second_factor").is_null()) ia.second_factor = e.at("second_factor").get<std::size_t>();
    r.assignments.push_back(std::move(ia));
  }

  for (const auto& e : j.at("scales")) {
    ScaleResult sc;
    sc.name = e.at("name").get<std::string>();
    sc.factor = e.at("factor").get<std::size_t>();
    sc.items = e.at("items").get<std::vector<std::string>>();
    sc.excluded = e.at("excluded").get<std::vector<std::string>>();
    if (!e.at("alpha_raw").is_null()) {
      AlphaReport ar;
      ar.scale = sc.name;
      ar.items = sc.items;
      ar.k = sc.items.size();
      ar.n = e.at("n").get<std::size_t>();
      ar.alpha_raw = e.at("alpha_raw").get<double>();
      ar.alpha_standardized = e.at("alpha_standardized").get<double>();
      for (const auto& id : sc.items) {
        const auto& v = e.at("alpha_if_deleted").at(id);
        ar.alpha_if_deleted.push_back(v.is_null() ? std::nullopt
                                                  : std::optional<double>(v.get<double>()));
      }
      ar.item_total_correlations = detail::unlabelled(e.at("item_total_correlations"), sc.items);
      ar.negative = e.at("negative_alpha").get<bool>();
      sc.alpha = std::move(ar);
    }
    r.scales.push_back(std::move(sc));
  }

  const auto& adv = j.at("sample_advice");
  r.sample_advice.label = adv.at("label").get<std::string>();
  r.sample_advice.mean_communality = adv.at("mean_communality").get<double>();
  const auto band = adv.at("band").get<std::string>();
  r.sample_advice.band = band == "high"       ? CommunalityBand::High
                         : band == "moderate" ? CommunalityBand::Moderate
                                              : CommunalityBand::Low;
  r.sample_advice.items_per_factor = adv.at("items_per_factor").get<double>();
  r.sample_advice.n = adv.at("n").get<std::size_t>();
  r.sample_advice.caution = adv.at("caution").get<bool>();

  for (const auto& w : j.at("warnings")) {
    r.warnings.push_back({w.at("code").get<std::string>(), w.at("stage").get<std::string>(),
                          w.at("message").get<std::string>()});
  }
  for (const auto& st : j.at("stages")) {
    r.stages.push_back({st.at("seq").get<int>(), st.at("name").get<std::string>()});
  }
  r.config = config_from_json(j.at("config"));
  return r;
}

[[nodiscard]] inline std::string render_json(const ValidationReport& r) {
  return to_json(r).dump(2) + "\n";
}

namespace detail {

inline std::string num(double v, int precision = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

inline std::size_t widest(const std::vector<std::string>& names, std::size_t floor) {
  std::size_t w = floor;
  for (const auto& s : names) w = std::max(w, s.size());
  return w;
}

}  // namespace detail

/// Aligned plain-text report. Loadings carry `*` for the assigned factor and
/// `~` for a cross-loading; the WARNINGS section appears only when non-empty.
[[nodiscard]] inline std::string render_text(const ValidationReport& r) {
  using detail::num;
  std::ostringstream o;
  const auto& s = r.solution;
  const std::size_t w = detail::widest(r.dataset.items, 6) + 2;

  o << "DATASET\n"
    << "  respondents " << r.dataset.n << ", items " << r.dataset.p << ", missing cells "
    << r.dataset.missing_cells << "\n"
    << "  missing policy " << to_string(r.dataset.missing_policy) << ", effective n "
    << r.dataset.effective_n << "\n\n";

  o << "ADEQUACY\n"
    << "  Bartlett sphericity: chi2 = " << num(r.adequacy.bartlett.chi2, 2)
    << ", df = " << r.adequacy.bartlett.df << ", p = " << std::scientific
    << std::setprecision(3) << r.adequacy.bartlett.p_value << std::defaultfloat << "\n"
    << "  KMO overall = " << num(r.adequacy.kmo_overall) << " ("
    << (r.adequacy.kmo_overall >= r.config.msa_threshold ? "acceptable" : "unacceptable")
    << " against " << num(r.config.msa_threshold, 2) << ")\n"
    << "  per-item MSA:\n";
  for (std::size_t i = 0; i < r.adequacy.items.size(); ++i) {
    o << "    " << std::left << std::setw(static_cast<int>(w)) << r.adequacy.items[i]
      << std::right << num(r.adequacy.msa[i]) << "\n";
  }
  o << "\nPRUNING (MSA threshold " << num(r.config.msa_threshold, 2) << ")\n";
  if (r.prune_trail.steps.empty()) o << "  no items removed\n";
  for (const auto& st : r.prune_trail.steps) {
    o << "  removed " << st.item << " (MSA " << num(st.msa) << "), KMO now "
      << num(st.kmo_after) << "\n";
  }
  o << "  termination: " << r.prune_trail.termination << "\n\n";

  o << "EXTRACTION " << to_string(s.extraction) << ", retention " << r.retention_rule << ", m = "
    << s.m() << (r.retention_forced ? " (forced)" : "") << "\n  eigenvalues:";
  for (double l : s.eigenvalues) o << ' ' << num(l);
  o << "\n\n";

  o << "LOADINGS (" << to_string(s.rotation);
  if (s.rotation == Rotation::Oblimin) o << ", gamma " << num(s.gamma, 2) << ", pattern";
  o << ")\n  " << std::left << std::setw(static_cast<int>(w)) << "item" << std::right;
  for (std::size_t k = 0; k < s.m(); ++k) o << std::setw(9) << ("F" + std::to_string(k + 1));
  o << std::setw(9) << "h2" << "\n";
  for (std::size_t j = 0; j < s.p(); ++j) {
    o << "  " << std::left << std::setw(static_cast<int>(w)) << s.items[j] << std::right;
    const ItemAssignment* a = j < r.assignments.size() ? &r.assignments[j] : nullptr;
    for (std::size_t k = 0; k < s.m(); ++k) {
      char mark = ' ';
      if (a && a->status != AssignmentStatus::Unassigned && a->factor == k) mark = '*';
      if (a && a->second_factor && *a->second_factor == k) mark = '~';
      if (a && a->status == AssignmentStatus::CrossLoaded && a->factor == k) mark = '~';
      o << std::setw(8) << num(s.loadings(j, k)) << mark;
    }
    o << std::setw(9) << num(s.communalities[j]) << "\n";
  }
  o << "  variance explained:";
  for (double v : s.variance_explained) o << ' ' << num(v);
  o << "\n";
  if (s.rotation == Rotation::Oblimin) {
    o << "\nFACTOR CORRELATIONS (phi)\n";
    for (std::size_t a = 0; a < s.m(); ++a) {
      o << "  ";
      for (std::size_t b = 0; b < s.m(); ++b) o << std::setw(8) << num(s.phi(a, b));
      o << "\n";
    }
  }

  o << "\nRELIABILITY (Cronbach's alpha per factor)\n";
  for (const auto& sc : r.scales) {
    o << "  " << sc.name << ": ";
    if (sc.alpha) {
      o << "alpha = " << num(sc.alpha->alpha_raw) << ", standardized = "
        << num(sc.alpha->alpha_standardized) << ", k = " << sc.alpha->k << ", n = "
        << sc.alpha->n << "\n";
      for (std::size_t i = 0; i < sc.alpha->items.size(); ++i) {
        o << "    " << std::left << std::setw(static_cast<int>(w)) << sc.alpha->items[i]
          << std::right << "item-total " << num(sc.alpha->item_total_correlations[i])
          << "  alpha if deleted "
          << (sc.alpha->alpha_if_deleted[i] ? num(*sc.alpha->alpha_if_deleted[i]) : "n/a")
          << "\n";
      }
    } else {
      o << "not computed (" << sc.items.size() << " assigned item(s))\n";
    }
    if (!sc.excluded.empty()) {
      o << "    excluded:";
      for (const auto& e : sc.excluded) o << ' ' << e;
      o << "\n";
    }
  }

  o << "\nSAMPLE SIZE (" << r.sample_advice.label << ")\n"
    << "  mean communality " << num(r.sample_advice.mean_communality) << " ("
    << to_string(r.sample_advice.band) << "), items per factor "
    << num(r.sample_advice.items_per_factor, 1) << ", n " << r.sample_advice.n
    << (r.sample_advice.caution ? ", CAUTION" : ", no caution") << "\n";

  if (!r.warnings.empty()) {
    o << "\nWARNINGS\n";
    for (const auto& wn : r.warnings) {
      o << "  [" << wn.code << "] " << wn.stage << ": " << wn.message << "\n";
    }
  }
  return o.str();
}

}  // namespace psychoval
