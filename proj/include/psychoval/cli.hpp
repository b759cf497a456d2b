#pragma once

// Command-line front end. Exit codes: 0 success, 1 analysis error (error name
// on the diagnostic stream), 2 usage error.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "psychoval/pipeline.hpp"
#include "psychoval/report_io.hpp"
#include "psychoval/simulate.hpp"

namespace psychoval {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAnalysis = 1;
inline constexpr int kExitUsage = 2;

struct CliConfig {
  std::string subcommand;
  std::string input;
  std::string retest_input;
  std::string scales_path;
  std::string spec_path;
  std::string out_path;
  std::string likert = "1:7";
  std::string missing_token = "NA";
  std::string missing_policy = "listwise";
  std::vector<std::string> reverse;
  std::string format = "json";
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::size_t n = 0;
  bool n_given = false;
  bool force = false;
  std::string extraction = "paf";
  std::string rotation = "oblimin";
  std::string retention = "kaiser";
  std::size_t factors = 0;
  double gamma = 0.0;
  double msa_threshold = 0.5;
  double cutoff = 0.4;
  double bartlett_alpha = 0.05;
};

namespace detail {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::pair<int, int> parse_likert(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_a = 0, used_b = 0;
    const std::string a = s.substr(0, colon), b = s.substr(colon + 1);
    const int lo = std::stoi(a, &used_a);
    const int hi = std::stoi(b, &used_b);
    if (used_a != a.size() || used_b != b.size() || lo >= hi) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError("--likert expects min:max with min < max, got '" + s + "'");
  }
}

inline std::uint64_t env_seed(std::uint64_t fallback) {
  const char* v = std::getenv("PSYCHOVAL_SEED");
  if (!v || !*v) return fallback;
  const std::string s(v);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("PSYCHOVAL_SEED must be a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw UsageError("PSYCHOVAL_SEED out of range");
  }
}

inline CsvOptions csv_options(const CliConfig& c) {
  CsvOptions o;
  std::tie(o.likert_min, o.likert_max) = parse_likert(c.likert);
  o.missing_token = c.missing_token;
  o.reverse_items = c.reverse;
  return o;
}

inline ValidationConfig validation_config(const CliConfig& c) {
  ValidationConfig v;
  std::tie(v.likert_min, v.likert_max) = parse_likert(c.likert);
  v.missing_token = c.missing_token;
  v.reverse_items = c.reverse;
  v.seed = c.seed;
  v.missing_policy = parse_missing_policy(c.missing_policy);
  v.bartlett_alpha = c.bartlett_alpha;
  v.force = c.force;
  v.msa_threshold = c.msa_threshold;
  v.extraction = parse_extraction(c.extraction);
  v.retention = c.factors ? RetentionRule{false, c.factors} : parse_retention(c.retention);
  v.rotation = parse_rotation(c.rotation);
  v.gamma = c.gamma;
  v.loading_cutoff = c.cutoff;
  validate_config(v);
  return v;
}

inline Json alpha_json(const AlphaReport& a) {
  Json del = Json::object();
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    del[a.items[i]] = a.alpha_if_deleted[i] ? Json(*a.alpha_if_deleted[i]) : Json(nullptr);
  }
  return {{"name", a.scale},
          {"items", a.items},
          {"k", a.k},
          {"n", a.n},
          {"alpha_raw", a.alpha_raw},
          {"alpha_standardized", a.alpha_standardized},
          {"alpha_if_deleted", del},
          {"item_total_correlations", labelled(a.items, a.item_total_correlations)},
          {"negative_alpha", a.negative}};
}

inline std::vector<ScaleDefinition> scales_or_all(const CliConfig& c, const SurveyDataset& ds) {
  if (!c.scales_path.empty()) return load_scales(c.scales_path);
  return {{"all", ds.items()}};
}

/// Writes to --out when given, else to the result stream.
inline void emit(const CliConfig& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out_path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot write '" + c.out_path + "'");
  f << text;
}

inline std::string text_alpha(const std::vector<AlphaReport>& reps) {
  std::ostringstream o;
  for (const auto& a : reps) {
    o << a.scale << ": alpha = " << num(a.alpha_raw) << ", standardized = "
      << num(a.alpha_standardized) << ", k = " << a.k << ", n = " << a.n << "\n";
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      o << "  " << std::left << std::setw(12) << a.items[i] << std::right << "item-total "
        << num(a.item_total_correlations[i]) << "  alpha if deleted "
        << (a.alpha_if_deleted[i] ? num(*a.alpha_if_deleted[i]) : "n/a") << "\n";
    }
  }
  return o.str();
}

inline std::string cmd_validate(const CliConfig& c) {
  const auto ds = load_csv(c.input, csv_options(c));
  const auto rep = run_validation(ds, validation_config(c));
  return c.format == "json" ? render_json(rep) : render_text(rep);
}

inline std::string cmd_efa(const CliConfig& c) {
  const auto cfg = validation_config(c);
  const auto ds = load_csv(c.input, csv_options(c));
  const auto view = complete_cases(ds, cfg.missing_policy);
  const auto R = correlation_matrix(view);
  RetentionRule rule = cfg.retention;
  bool forced = false;
  std::size_t m = rule.fixed;
  if (rule.kaiser) {
    const auto r = retain_kaiser(sym_eigen(R).eigenvalues);
    m = r.m;
    forced = r.forced;
  }
  FactorSolution s = cfg.extraction == Extraction::Pca ? extract_pca(R, m, view.items)
                                                       : extract_paf(R, m, view.items, cfg.paf);
  if (cfg.rotation == Rotation::Varimax) s = rotate_varimax(s, cfg.varimax);
  if (cfg.rotation == Rotation::Oblimin) {
    s = rotate_oblimin(s, {cfg.gamma, cfg.oblimin_max_iter, cfg.oblimin_tolerance});
  }
  s = sort_and_sign(s);
  const auto assignments = assign_items(s, cfg.loading_cutoff);
  if (c.format == "json") {
    Json j;
    j["n"] = view.effective_n;
    j["solution"] = solution_json(s, to_string(rule), forced);
    Json a = Json::array();
    for (const auto& x : assignments) {
      a.push_back({{"item", x.item},
                   {"status", to_string(x.status)},
                   {"factor", x.factor},
                   {"loading", x.loading}});
    }
    j["assignments"] = a;
    return j.dump(2) + "\n";
  }
  std::ostringstream o;
  o << to_string(s.extraction) << " + " << to_string(s.rotation) << ", m = " << s.m()
    << ", n = " << view.effective_n << "\n";
  for (std::size_t j = 0; j < s.p(); ++j) {
    o << "  " << std::left << std::setw(12) << s.items[j] << std::right;
    for (std::size_t k = 0; k < s.m(); ++k) o << std::setw(8) << num(s.loadings(j, k));
    o << "  h2 " << num(s.communalities[j]) << "  " << to_string(assignments[j].status) << "\n";
  }
  return o.str();
}

inline std::string cmd_alpha(const CliConfig& c) {
  const auto ds = load_csv(c.input, csv_options(c));
  std::vector<AlphaReport> reps;
  for (const auto& sc : scales_or_all(c, ds)) reps.push_back(cronbach_alpha(ds, sc));
  if (c.format != "json") return text_alpha(reps);
  Json j = Json::array();
  for (const auto& a : reps) j.push_back(alpha_json(a));
  return Json{{"scales", j}}.dump(2) + "\n";
}

inline std::string cmd_retest(const CliConfig& c) {
  if (c.retest_input.empty()) throw UsageError("retest needs --retest <second occasion csv>");
  const auto opt = csv_options(c);
  const auto first = load_csv(c.input, opt);
  const auto second = load_csv(c.retest_input, opt);
  Json scales = Json::array();
  std::ostringstream text;
  for (const auto& sc : scales_or_all(c, first)) {
    const auto r = test_retest(first, second, sc);
    scales.push_back({{"name", sc.name},
                      {"items", r.items},
                      {"item_r", labelled(r.items, r.item_r)},
                      {"total_r", r.total_r},
                      {"matched_n", r.matched_n},
                      {"unmatched_first", r.unmatched_first},
                      {"unmatched_second", r.unmatched_second},
                      {"incomplete", r.incomplete}});
    text << sc.name << ": total r = " << num(r.total_r) << ", matched n = " << r.matched_n
         << "\n";
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      text << "  " << std::left << std::setw(12) << r.items[i] << std::right << num(r.item_r[i])
           << "\n";
    }
  }
  return c.format == "json" ? Json{{"scales", scales}}.dump(2) + "\n" : text.str();
}

inline std::string cmd_kmo(const CliConfig& c) {
  const auto ds = load_csv(c.input, csv_options(c));
  const auto view = complete_cases(ds, parse_missing_policy(c.missing_policy));
  const auto R = correlation_matrix(view);
  const auto k = kmo(R);
  const auto trail = msa_prune(R, view.items, c.msa_threshold);
  if (c.format == "json") {
    Json steps = Json::array();
    for (const auto& s : trail.steps) {
      steps.push_back({{"item", s.item}, {"msa", s.msa}, {"kmo_after", s.kmo_after}});
    }
    return Json{{"kmo_overall", k.overall},
                {"msa", labelled(view.items, k.msa)},
                {"prune_trail", steps},
                {"retained", trail.retained},
                {"final_kmo", trail.final_kmo},
                {"termination", trail.termination}}
               .dump(2) +
           "\n";
  }
  std::ostringstream o;
  o << "KMO overall = " << num(k.overall) << "\n";
  for (std::size_t i = 0; i < view.items.size(); ++i) {
    o << "  " << std::left << std::setw(12) << view.items[i] << std::right << num(k.msa[i])
      << "\n";
  }
  for (const auto& s : trail.steps) o << "removed " << s.item << " (MSA " << num(s.msa) << ")\n";
  o << "termination: " << trail.termination << "\n";
  return o.str();
}

/// Prints the test, then fails with AssumptionsNotMet when sphericity is not
/// rejected at --bartlett-alpha.
inline std::string cmd_bartlett(const CliConfig& c, std::ostream& out) {
  const auto ds = load_csv(c.input, csv_options(c));
  const auto view = complete_cases(ds, parse_missing_policy(c.missing_policy));
  const auto b = bartlett_sphericity(correlation_matrix(view), view.effective_n);
  const bool significant = b.p_value <= c.bartlett_alpha;
  std::string body;
  if (c.format == "json") {
    body = Json{{"chi2", b.chi2}, {"df", b.df}, {"p", b.p_value}, {"n", view.effective_n},
                {"alpha", c.bartlett_alpha}, {"significant", significant}}
               .dump(2) +
           "\n";
  } else {
    std::ostringstream o;
    o << "chi2 = " << num(b.chi2, 4) << ", df = " << b.df << ", p = " << std::scientific
      << std::setprecision(4) << b.p_value << ", n = " << view.effective_n << "\n";
    body = o.str();
  }
  if (!significant) {
    emit(c, out, body);
    throw Error(Errc::AssumptionsNotMet, "p = " + fmt(b.p_value) + " > alpha = " +
                                             fmt(c.bartlett_alpha));
  }
  return body;
}

inline std::string cmd_simulate(const CliConfig& c) {
  auto spec = load_model_spec(c.spec_path);
  if (c.n_given) spec.n = c.n;
  if (c.seed_given) {
    spec.seed = c.seed;
  } else if (std::getenv("PSYCHOVAL_SEED")) {
    spec.seed = env_seed(spec.seed);
  }
  return to_csv(generate(spec), c.missing_token);
}

inline std::string cmd_describe(const CliConfig& c) {
  const auto ds = load_csv(c.input, csv_options(c));
  const auto rows = describe(ds);
  if (c.format == "json") {
    Json items = Json::array();
    for (const auto& s : rows) {
      items.push_back({{"item", s.item}, {"n", s.n}, {"mean", s.mean}, {"sd", s.sd},
                       {"min", s.min}, {"max", s.max}, {"missing", s.missing}});
    }
    return Json{{"n", ds.n()}, {"p", ds.p()}, {"missing_cells", ds.missing_count()},
                {"items", items}}
               .dump(2) +
           "\n";
  }
  std::ostringstream o;
  o << "respondents " << ds.n() << ", items " << ds.p() << ", missing cells "
    << ds.missing_count() << "\n";
  o << "  " << std::left << std::setw(12) << "item" << std::right << std::setw(6) << "n"
    << std::setw(8) << "mean" << std::setw(8) << "sd" << std::setw(5) << "min" << std::setw(5)
    << "max" << std::setw(8) << "missing" << "\n";
  for (const auto& s : rows) {
    o << "  " << std::left << std::setw(12) << s.item << std::right << std::setw(6) << s.n
      << std::setw(8) << num(s.mean) << std::setw(8) << num(s.sd) << std::setw(5) << s.min
      << std::setw(5) << s.max << std::setw(8) << s.missing << "\n";
  }
  return o.str();
}

}  // namespace detail

/// `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"psychoval: survey scale validation", "psychoval"};
  app.require_subcommand(1);

  auto data_flags = [&](CLI::App* s) {
    s->add_option("-i,--input", c.input, "survey CSV (header: id,item1,...)")
        ->required()
        ->check(CLI::ExistingFile);
    s->add_option("--likert", c.likert, "response bounds min:max")->capture_default_str();
    s->add_option("--missing-token", c.missing_token, "cell text meaning missing")
        ->capture_default_str();
    s->add_option("--missing-policy", c.missing_policy, "listwise | pairwise | strict")
        ->check(CLI::IsMember({"listwise", "pairwise", "strict"}))
        ->capture_default_str();
    s->add_option("--reverse", c.reverse, "items to reverse-code")->delimiter(',');
    s->add_option("-f,--format", c.format, "json | text")
        ->check(CLI::IsMember({"json", "text"}))
        ->capture_default_str();
    s->add_option("-o,--out", c.out_path, "write results here instead of stdout");
  };
  auto analysis_flags = [&](CLI::App* s) {
    s->add_option("--extraction", c.extraction, "paf | pca")
        ->check(CLI::IsMember({"paf", "pca"}))
        ->capture_default_str();
    s->add_option("--rotation", c.rotation, "oblimin | varimax | none")
        ->check(CLI::IsMember({"oblimin", "varimax", "none"}))
        ->capture_default_str();
    s->add_option("--gamma", c.gamma, "oblimin gamma")->capture_default_str();
    auto* ret = s->add_option("--retention", c.retention, "kaiser | fixed:k")
                    ->capture_default_str();
    s->add_option("--factors", c.factors, "retain exactly k factors")
        ->check(CLI::PositiveNumber)
        ->excludes(ret);
    s->add_option("--cutoff", c.cutoff, "loading cutoff for item assignment")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  };
  auto seed_flag = [&](CLI::App* s) {
    s->add_option("-s,--seed", c.seed, "RNG seed (default $PSYCHOVAL_SEED or 42)");
  };

  auto* validate = app.add_subcommand("validate", "full validation pipeline");
  data_flags(validate);
  analysis_flags(validate);
  seed_flag(validate);
  validate->add_flag("--force", c.force, "continue when Bartlett's test is not significant");
  validate->add_option("--msa-threshold", c.msa_threshold, "pruning threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  validate->add_option("--bartlett-alpha", c.bartlett_alpha, "sphericity significance level")
      ->capture_default_str();

  auto* efa = app.add_subcommand("efa", "extraction and rotation only");
  data_flags(efa);
  analysis_flags(efa);

  auto* alpha = app.add_subcommand("alpha", "Cronbach's alpha per scale");
  data_flags(alpha);
  alpha->add_option("--scales", c.scales_path, "scale file, lines 'name: item,item,...'")
      ->check(CLI::ExistingFile);

  auto* retest = app.add_subcommand("retest", "test-retest correlations");
  data_flags(retest);
  retest->add_option("--retest", c.retest_input, "second-occasion CSV")
      ->required()
      ->check(CLI::ExistingFile);
  retest->add_option("--scales", c.scales_path, "scale file")->check(CLI::ExistingFile);

  auto* kmo_cmd = app.add_subcommand("kmo", "KMO, per-item MSA and pruning trail");
  data_flags(kmo_cmd);
  kmo_cmd->add_option("--msa-threshold", c.msa_threshold, "pruning threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  auto* bartlett = app.add_subcommand("bartlett", "Bartlett's test of sphericity");
  data_flags(bartlett);
  bartlett->add_option("--bartlett-alpha", c.bartlett_alpha, "significance level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "generate Likert data from a factor model");
  simulate->add_option("--spec", c.spec_path, "model spec file")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--n", c.n, "respondents (overrides the spec)")->check(CLI::PositiveNumber);
  simulate->add_option("-o,--out", c.out_path, "output CSV");
  simulate->add_option("--missing-token", c.missing_token)->capture_default_str();
  seed_flag(simulate);

  auto* describe_cmd = app.add_subcommand("describe", "per-item summaries");
  data_flags(describe_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  c.subcommand = sub->get_name();
  try {
    c.seed_given = sub->get_option_no_throw("--seed") && sub->count("--seed") > 0;
    c.n_given = sub->get_option_no_throw("--n") && sub->count("--n") > 0;
    if (!c.seed_given) c.seed = detail::env_seed(c.seed);

    std::string result;
    if (c.subcommand == "validate") result = detail::cmd_validate(c);
    else if (c.subcommand == "efa") result = detail::cmd_efa(c);
    else if (c.subcommand == "alpha") result = detail::cmd_alpha(c);
    else if (c.subcommand == "retest") result = detail::cmd_retest(c);
    else if (c.subcommand == "kmo") result = detail::cmd_kmo(c);
    else if (c.subcommand == "bartlett") result = detail::cmd_bartlett(c, out);
    else if (c.subcommand == "simulate") result = detail::cmd_simulate(c);
    else result = detail::cmd_describe(c);
    detail::emit(c, out, result);
    return kExitOk;
  } catch (const detail::UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << sub->help();
    return kExitUsage;
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) {
      err << "usage error: " << e.what() << "\n\n" << sub->help();
      return kExitUsage;
    }
    err << e.what() << "\n";
    return kExitAnalysis;
  } catch (const std::exception& e) {
    err << "InternalError: " << e.what() << "\n";
    return kExitAnalysis;
  }
}

}  // namespace psychoval
