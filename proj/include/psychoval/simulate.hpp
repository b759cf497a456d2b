#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "psychoval/core_stats.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/ingest.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xorshift64* generator (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
/// The state is splitmix64(seed), with a zero state remapped to the
/// splitmix64 increment. Uniforms use the top 53 bits; normals use the
/// Marsaglia polar method and cache the second variate of each pair.
class ShiftRegisterRng {
 public:
  explicit ShiftRegisterRng(std::uint64_t seed) noexcept : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next() noexcept {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() noexcept {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return z;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
  }

  /// Independent child stream seeded from this stream's next output.
  [[nodiscard]] ShiftRegisterRng split() noexcept { return ShiftRegisterRng(next()); }

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

struct FactorModelSpec {
  std::vector<std::string> items;  // defaults to X1..Xp
  Matrix loadings;                 // p x m
  Matrix phi;                      // m x m; empty means identity
  int likert_min = 1;
  int likert_max = 7;
  std::size_t n = 500;
  /// One row shared by all items, or one row per item; empty means
  /// equal-probability cuts of the standard normal.
  std::vector<std::vector<double>> thresholds;
  std::uint64_t seed = 42;
};

/// Lower Cholesky factor; throws NotPositiveDefinite.
[[nodiscard]] inline Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw Error(Errc::NotPositiveDefinite, "Cholesky pivot " + std::to_string(j));
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Cut points i/K of the standard normal for K = max - min + 1 categories.
[[nodiscard]] inline std::vector<double> equal_probability_thresholds(int likert_min,
                                                                      int likert_max) {
  const int k = likert_max - likert_min + 1;
  std::vector<double> t;
  for (int i = 1; i < k; ++i) t.push_back(normal_quantile(static_cast<double>(i) / k));
  return t;
}

namespace detail {

inline Matrix phi_or_identity(const FactorModelSpec& spec) {
  return spec.phi.empty() ? Matrix::identity(spec.loadings.cols()) : spec.phi;
}

inline std::string spec_item(const FactorModelSpec& spec, std::size_t j) {
  return j < spec.items.size() ? spec.items[j] : "X" + std::to_string(j + 1);
}

inline std::vector<double> implied_communalities(const FactorModelSpec& spec) {
  const Matrix common = spec.loadings * phi_or_identity(spec) * spec.loadings.transpose();
  std::vector<double> h2(spec.loadings.rows());
  for (std::size_t j = 0; j < h2.size(); ++j) h2[j] = common(j, j);
  return h2;
}

}  // namespace detail

/// Checks the spec invariants and returns per-item thresholds.
[[nodiscard]] inline std::vector<std::vector<double>> validate_spec(const FactorModelSpec& spec) {
  const std::size_t p = spec.loadings.rows();
  const std::size_t m = spec.loadings.cols();
  if (p == 0 || m == 0) throw Error(Errc::InvalidSpec, "loadings matrix is empty");
  if (!spec.items.empty() && spec.items.size() != p) {
    throw Error(Errc::InvalidSpec, "item names do not match loading rows");
  }
  if (spec.likert_min >= spec.likert_max) throw Error(Errc::InvalidSpec, "likert min >= max");
  const Matrix phi = detail::phi_or_identity(spec);
  if (phi.rows() != m || phi.cols() != m) throw Error(Errc::InvalidSpec, "phi must be m x m");
  for (std::size_t a = 0; a < m; ++a) {
    if (phi(a, a) != 1.0) throw Error(Errc::InvalidSpec, "phi needs a unit diagonal");
    for (std::size_t b = a + 1; b < m; ++b)
      if (phi(a, b) != phi(b, a)) throw Error(Errc::InvalidSpec, "phi is not symmetric");
  }
  (void)cholesky(phi);

  const auto h2 = detail::implied_communalities(spec);
  for (std::size_t j = 0; j < p; ++j)
    if (h2[j] > 1.0 + 1e-12) {
      throw Error(Errc::UniquenessNegative, "item '" + detail::spec_item(spec, j) +
                                                "' has communality " + std::to_string(h2[j]));
    }

  const std::size_t cuts = static_cast<std::size_t>(spec.likert_max - spec.likert_min);
  std::vector<std::vector<double>> per_item;
  if (spec.thresholds.empty()) {
    per_item.assign(p, equal_probability_thresholds(spec.likert_min, spec.likert_max));
  } else if (spec.thresholds.size() == 1) {
    per_item.assign(p, spec.thresholds.front());
  } else if (spec.thresholds.size() == p) {
    per_item = spec.thresholds;
  } else {
    throw Error(Errc::InvalidSpec, "thresholds need 1 or p rows");
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (per_item[j].size() != cuts) {
      throw Error(Errc::InvalidSpec, "item '" + detail::spec_item(spec, j) + "' needs " +
                                         std::to_string(cuts) + " thresholds");
    }
    for (std::size_t t = 1; t < cuts; ++t)
      if (!(per_item[j][t] > per_item[j][t - 1])) {
        throw Error(Errc::InvalidSpec, "thresholds must be strictly increasing");
      }
  }
  return per_item;
}

/// Latent correlation matrix Lambda Phi Lambda' + diag(1 - h2).
[[nodiscard]] inline SymMatrix population_correlation(const FactorModelSpec& spec) {
  (void)validate_spec(spec);
  SymMatrix R = SymMatrix::symmetrize(spec.loadings * detail::phi_or_identity(spec) *
                                      spec.loadings.transpose());
  for (std::size_t j = 0; j < R.dim(); ++j) R.set(j, j, 1.0);
  return R;
}

/// Draws n respondents: correlated factor scores via chol(phi), unique normal
/// noise scaled by sqrt(1 - h2), then fixed-threshold discretization.
[[nodiscard]] inline SurveyDataset generate(const FactorModelSpec& spec) {
  const auto cuts = validate_spec(spec);
  if (spec.n < 1) throw Error(Errc::InvalidSpec, "n must be at least 1");
  const std::size_t p = spec.loadings.rows();
  const std::size_t m = spec.loadings.cols();
  const Matrix chol = cholesky(detail::phi_or_identity(spec));
  const auto h2 = detail::implied_communalities(spec);
  std::vector<double> noise_sd(p);
  for (std::size_t j = 0; j < p; ++j) noise_sd[j] = std::sqrt(std::max(0.0, 1.0 - h2[j]));

  ShiftRegisterRng rng(spec.seed);
  std::vector<double> z(m), f(m);
  std::vector<Response> cells;
  cells.reserve(spec.n * p);
  std::vector<std::string> respondents;
  respondents.reserve(spec.n);
  for (std::size_t r = 0; r < spec.n; ++r) {
    respondents.push_back("R" + std::to_string(r + 1));
    for (std::size_t k = 0; k < m; ++k) z[k] = rng.normal();
    for (std::size_t k = 0; k < m; ++k) {
      f[k] = 0.0;
      for (std::size_t l = 0; l <= k; ++l) f[k] += chol(k, l) * z[l];
    }
    for (std::size_t j = 0; j < p; ++j) {
      double x = noise_sd[j] * rng.normal();
      for (std::size_t k = 0; k < m; ++k) x += spec.loadings(j, k) * f[k];
      int category = spec.likert_min;
      for (double t : cuts[j])
        if (x > t) ++category;
      cells.emplace_back(category);
    }
  }
  std::vector<std::string> items;
  for (std::size_t j = 0; j < p; ++j) items.push_back(detail::spec_item(spec, j));
  return {std::move(items), std::move(respondents), std::move(cells), spec.likert_min,
          spec.likert_max};
}

namespace detail {

inline std::vector<double> parse_number_row(std::string_view line, std::size_t line_no) {
  std::string text(line);
  for (char& c : text)
    if (c == ',') c = ' ';
  std::istringstream in(text);
  std::vector<double> row;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) {
      throw Error(Errc::ParseError, "model spec line " + std::to_string(line_no) + ": '" + tok +
                                        "' is not a number");
    }
    row.push_back(v);
  }
  return row;
}

}  // namespace detail

/// Model spec file: `key: value` lines (items, likert, n, seed) and the blocks
/// `loadings:`, `phi:`, `thresholds:` whose rows follow on their own lines.
/// '#' starts a comment.
[[nodiscard]] inline FactorModelSpec parse_model_spec(std::istream& in) {
  FactorModelSpec spec;
  std::vector<std::vector<double>> loadings, phi;
  std::vector<std::vector<double>>* block = nullptr;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view t = detail::trim(line);
    if (t.empty() || t == "\r") continue;
    const auto colon = t.find(':');
    const bool numeric_start = std::isdigit(static_cast<unsigned char>(t.front())) ||
                               t.front() == '-' || t.front() == '+' || t.front() == '.';
    if (colon == std::string_view::npos || numeric_start) {
      if (!block) {
        throw Error(Errc::ParseError, "model spec line " + std::to_string(line_no) +
                                          " is not inside a block");
      }
      block->push_back(detail::parse_number_row(t, line_no));
      continue;
    }
    const std::string key(detail::trim(t.substr(0, colon)));
    const std::string value(detail::trim(t.substr(colon + 1)));
    block = nullptr;
    try {
      if (key == "loadings") {
        block = &loadings;
      } else if (key == "phi") {
        block = &phi;
      } else if (key == "thresholds") {
        block = &spec.thresholds;
      } else if (key == "items") {
        spec.items.clear();
        std::string_view rest = value;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          const auto id = detail::trim(rest.substr(0, comma));
          if (!id.empty()) spec.items.emplace_back(id);
          if (comma == std::string_view::npos) break;
          rest = rest.substr(comma + 1);
        }
      } else if (key == "likert") {
        const auto sep = value.find(':');
        if (sep == std::string::npos) throw Error(Errc::ParseError, "likert needs min:max");
        spec.likert_min = std::stoi(value.substr(0, sep));
        spec.likert_max = std::stoi(value.substr(sep + 1));
      } else if (key == "n") {
        spec.n = std::stoul(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else {
        throw Error(Errc::ParseError, "unknown model spec key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw Error(Errc::ParseError, "model spec line " + std::to_string(line_no) +
                                        ": bad value '" + value + "'");
    }
    if (block && !value.empty()) block->push_back(detail::parse_number_row(value, line_no));
  }
  if (loadings.empty()) throw Error(Errc::InvalidSpec, "model spec has no loadings block");
  spec.loadings = Matrix::from_rows(loadings);
  if (!phi.empty()) spec.phi = Matrix::from_rows(phi);
  return spec;
}

[[nodiscard]] inline FactorModelSpec load_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_model_spec(in);
}

}  // namespace psychoval
