#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psychoval/core_stats.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

enum class Extraction { Pca, Paf };
enum class Rotation { None, Varimax, Oblimin };

[[nodiscard]] inline std::string_view to_string(Extraction e) noexcept {
  return e == Extraction::Pca ? "pca" : "paf";
}

[[nodiscard]] inline std::string_view to_string(Rotation r) noexcept {
  switch (r) {
    case Rotation::None: return "none";
    case Rotation::Varimax: return "varimax";
    case Rotation::Oblimin: return "oblimin";
  }
  return "none";
}

[[nodiscard]] inline Extraction parse_extraction(std::string_view s) {
  if (s == "pca") return Extraction::Pca;
  if (s == "paf") return Extraction::Paf;
  throw Error(Errc::InvalidConfig, "unknown extraction '" + std::string(s) + "'");
}

[[nodiscard]] inline Rotation parse_rotation(std::string_view s) {
  if (s == "none") return Rotation::None;
  if (s == "varimax") return Rotation::Varimax;
  if (s == "oblimin") return Rotation::Oblimin;
  throw Error(Errc::InvalidConfig, "unknown rotation '" + std::string(s) + "'");
}

struct ConvergenceInfo {
  int iterations = 0;
  double achieved = 0.0;  // last |delta h2| (PAF), relative gain (varimax), gradient norm (oblimin)
  bool converged = true;
  std::vector<double> criterion_history;  // rotation criterion per sweep / iteration

  bool operator==(const ConvergenceInfo&) const = default;
};

/// Factor model X_j = sum_k a_jk F_k + e_j for p items and m factors.
struct FactorSolution {
  std::vector<std::string> items;
  Extraction extraction = Extraction::Pca;
  Rotation rotation = Rotation::None;
  double gamma = 0.0;

  Matrix loadings;         // p x m pattern
  Matrix structure;        // p x m, loadings * phi
  Matrix phi;              // m x m factor correlations
  Matrix rotation_matrix;  // m x m; identity when unrotated
  std::vector<double> eigenvalues;  // full spectrum of the correlation matrix
  std::vector<double> communalities;
  std::vector<double> uniquenesses;
  std::vector<double> variance_explained;
  std::vector<double> cumulative_variance;

  ConvergenceInfo extraction_info;
  ConvergenceInfo rotation_info;
  bool heywood = false;

  [[nodiscard]] std::size_t p() const noexcept { return loadings.rows(); }
  [[nodiscard]] std::size_t m() const noexcept { return loadings.cols(); }

  bool operator==(const FactorSolution&) const = default;
};

namespace detail {

inline std::vector<std::string> default_labels(std::vector<std::string> items, std::size_t p) {
  if (items.empty()) {
    for (std::size_t j = 0; j < p; ++j) items.push_back("X" + std::to_string(j + 1));
  }
  if (items.size() != p) throw Error(Errc::LengthMismatch, "item label count differs from p");
  return items;
}

// Recomputes structure, communalities, uniquenesses and variance shares from
// loadings and phi.
inline void finalize(FactorSolution& s) {
  const std::size_t p = s.p();
  const std::size_t m = s.m();
  s.structure = s.loadings * s.phi;
  s.communalities.assign(p, 0.0);
  s.uniquenesses.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double h2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) h2 += s.structure(j, k) * s.loadings(j, k);
    h2 = std::clamp(h2, 0.0, 1.0);
    s.communalities[j] = h2;
    s.uniquenesses[j] = 1.0 - h2;
  }
  s.variance_explained.assign(m, 0.0);
  s.cumulative_variance.assign(m, 0.0);
  double cum = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double ss = 0.0;
    for (std::size_t j = 0; j < p; ++j) ss += s.loadings(j, k) * s.loadings(j, k);
    s.variance_explained[k] = ss / static_cast<double>(p);
    cum += s.variance_explained[k];
    s.cumulative_variance[k] = cum;
  }
}

inline void check_factor_count(const SymMatrix& R, std::size_t m) {
  if (m < 1 || m > R.dim()) {
    throw Error(Errc::BadFactorCount, "requested " + std::to_string(m) + " factors for " +
                                          std::to_string(R.dim()) + " items");
  }
}

// Gauss-Jordan inverse with partial pivoting for small general matrices.
inline Matrix general_inverse(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix w = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(w(r, c)) > std::abs(w(piv, c))) piv = r;
    if (std::abs(w(piv, c)) < 1e-14) throw Error(Errc::SingularMatrix, "rotation matrix");
    if (piv != c)
      for (std::size_t k = 0; k < n; ++k) {
        std::swap(w(c, k), w(piv, k));
        std::swap(inv(c, k), inv(piv, k));
      }
    const double d = w(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      w(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = w(r, c);
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        w(r, k) -= f * w(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

inline FactorSolution unrotated(std::vector<std::string> items, Extraction how, Matrix loadings,
                                std::vector<double> eigenvalues) {
  FactorSolution s;
  s.items = std::move(items);
  s.extraction = how;
  const std::size_t m = loadings.cols();
  s.loadings = std::move(loadings);
  s.phi = Matrix::identity(m);
  s.rotation_matrix = Matrix::identity(m);
  s.eigenvalues = std::move(eigenvalues);
  return s;
}

}  // namespace detail

/// Principal components: column k is sqrt(lambda_k) * v_k.
[[nodiscard]] inline FactorSolution extract_pca(const SymMatrix& R, std::size_t m,
                                                std::vector<std::string> items = {}) {
  detail::check_factor_count(R, m);
  const std::size_t p = R.dim();
  const auto eig = sym_eigen(R);
  Matrix L(p, m);
  for (std::size_t k = 0; k < m; ++k) {
    const double root = std::sqrt(std::max(eig.eigenvalues[k], 0.0));
    for (std::size_t j = 0; j < p; ++j) L(j, k) = root * eig.eigenvectors(j, k);
  }
  auto s = detail::unrotated(detail::default_labels(std::move(items), p), Extraction::Pca,
                             std::move(L), eig.eigenvalues);
  s.extraction_info.iterations = eig.sweeps;
  detail::finalize(s);
  return s;
}

struct PafOptions {
  int max_iter = 1000;
  double tolerance = 1e-4;
};

/// Principal axis factoring. Starts from squared multiple correlations and
/// iterates the reduced-matrix eigenproblem until communalities settle.
/// Heywood cases (communality above 1) are clamped, their loading rows
/// rescaled to unit length, and flagged.
[[nodiscard]] inline FactorSolution extract_paf(const SymMatrix& R, std::size_t m,
                                                std::vector<std::string> items = {},
                                                PafOptions opt = {}) {
  detail::check_factor_count(R, m);
  const std::size_t p = R.dim();
  const auto full = sym_eigen(R);
  const SymMatrix Rinv = inverse(R);

  std::vector<double> h2(p);
  for (std::size_t j = 0; j < p; ++j) h2[j] = std::clamp(1.0 - 1.0 / Rinv(j, j), 0.0, 1.0);

  Matrix L(p, m);
  bool heywood = false;
  double delta = 0.0;
  int iter = 0;
  bool converged = false;
  while (iter < opt.max_iter) {
    ++iter;
    SymMatrix reduced = R;
    for (std::size_t j = 0; j < p; ++j) reduced.set(j, j, h2[j]);
    const auto eig = sym_eigen(reduced);
    for (std::size_t k = 0; k < m; ++k) {
      const double root = std::sqrt(std::max(eig.eigenvalues[k], 0.0));
      for (std::size_t j = 0; j < p; ++j) L(j, k) = root * eig.eigenvectors(j, k);
    }
    delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double ss = 0.0;
      for (std::size_t k = 0; k < m; ++k) ss += L(j, k) * L(j, k);
      if (ss > 1.0) {
        heywood = true;
        const double shrink = 1.0 / std::sqrt(ss);
        for (std::size_t k = 0; k < m; ++k) L(j, k) *= shrink;
        ss = 1.0;
      }
      delta = std::max(delta, std::abs(ss - h2[j]));
      h2[j] = ss;
    }
    if (delta < opt.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(Errc::NoConvergence, "PAF communalities still moving by " +
                                         std::to_string(delta) + " after " +
                                         std::to_string(iter) + " iterations")
        .with_value(delta);
  }
  auto s = detail::unrotated(detail::default_labels(std::move(items), p), Extraction::Paf,
                             std::move(L), full.eigenvalues);
  s.extraction_info = {iter, delta, true, {}};
  s.heywood = heywood;
  detail::finalize(s);
  return s;
}

struct Retention {
  std::size_t m = 1;
  bool forced = false;  // no eigenvalue exceeded 1; one factor kept anyway
};

/// Kaiser rule: number of eigenvalues strictly above 1, at least one.
[[nodiscard]] inline Retention retain_kaiser(std::span<const double> eigenvalues) {
  const auto count = static_cast<std::size_t>(
      std::count_if(eigenvalues.begin(), eigenvalues.end(), [](double l) { return l > 1.0; }));
  if (count == 0) return {1, true};
  return {count, false};
}

/// Column order by descending sum of squared loadings; each column signed so
/// its largest |loading| is positive. Phi and the rotation matrix follow.
[[nodiscard]] inline FactorSolution sort_and_sign(const FactorSolution& in) {
  const std::size_t p = in.p();
  const std::size_t m = in.m();
  std::vector<double> ss(m, 0.0);
  std::vector<double> sign(m, 1.0);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t lead = 0;
    for (std::size_t j = 0; j < p; ++j) {
      ss[k] += in.loadings(j, k) * in.loadings(j, k);
      if (std::abs(in.loadings(j, k)) > std::abs(in.loadings(lead, k))) lead = j;
    }
    if (p > 0 && in.loadings(lead, k) < 0.0) sign[k] = -1.0;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ss[a] > ss[b]; });

  FactorSolution out = in;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t src = order[k];
    for (std::size_t j = 0; j < p; ++j) out.loadings(j, k) = sign[src] * in.loadings(j, src);
    for (std::size_t r = 0; r < in.rotation_matrix.rows(); ++r) {
      out.rotation_matrix(r, k) = sign[src] * in.rotation_matrix(r, src);
    }
    for (std::size_t l = 0; l < m; ++l) {
      out.phi(k, l) = sign[src] * sign[order[l]] * in.phi(src, order[l]);
    }
  }
  detail::finalize(out);
  return out;
}

/// Kaiser's varimax criterion on row-normalized loadings.
[[nodiscard]] inline double varimax_criterion(const Matrix& b) {
  const double p = static_cast<double>(b.rows());
  double v = 0.0;
  for (std::size_t k = 0; k < b.cols(); ++k) {
    double s2 = 0.0, s4 = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double sq = b(j, k) * b(j, k);
      s2 += sq;
      s4 += sq * sq;
    }
    v += s4 / p - (s2 / p) * (s2 / p);
  }
  return v;
}

struct VarimaxOptions {
  bool kaiser_normalize = true;
  int max_sweeps = 100;
  double tolerance = 1e-8;
};

namespace detail {

// Varimax rotation matrix T for loadings `a` (rotated loadings are a * T).
inline Matrix varimax_rotation(const Matrix& a, const VarimaxOptions& opt, ConvergenceInfo& info) {
  const std::size_t p = a.rows();
  const std::size_t m = a.cols();
  Matrix b = a;
  if (opt.kaiser_normalize) {
    for (std::size_t j = 0; j < p; ++j) {
      double ss = 0.0;
      for (std::size_t k = 0; k < m; ++k) ss += b(j, k) * b(j, k);
      const double norm = ss > 0.0 ? std::sqrt(ss) : 1.0;
      for (std::size_t k = 0; k < m; ++k) b(j, k) /= norm;
    }
  }
  Matrix T = Matrix::identity(m);
  info = {};
  info.converged = false;
  double crit = varimax_criterion(b);
  info.criterion_history.push_back(crit);
  const double np = static_cast<double>(p);

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (std::size_t k = 0; k + 1 < m; ++k)
      for (std::size_t l = k + 1; l < m; ++l) {
        double A = 0.0, B = 0.0, C = 0.0, D = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double x = b(j, k), y = b(j, l);
          const double u = x * x - y * y;
          const double v = 2.0 * x * y;
          A += u;
          B += v;
          C += u * u - v * v;
          D += 2.0 * u * v;
        }
        const double angle = 0.25 * std::atan2(D - 2.0 * A * B / np, C - (A * A - B * B) / np);
        if (angle == 0.0) continue;
        const double c = std::cos(angle), s = std::sin(angle);
        for (std::size_t j = 0; j < p; ++j) {
          const double x = b(j, k), y = b(j, l);
          b(j, k) = c * x + s * y;
          b(j, l) = -s * x + c * y;
        }
        for (std::size_t r = 0; r < m; ++r) {
          const double x = T(r, k), y = T(r, l);
          T(r, k) = c * x + s * y;
          T(r, l) = -s * x + c * y;
        }
      }
    const double next = varimax_criterion(b);
    info.criterion_history.push_back(next);
    const double gain = (next - crit) / std::max(std::abs(crit), 1e-300);
    info.iterations = sweep;
    info.achieved = gain;
    crit = next;
    if (gain < opt.tolerance) {
      info.converged = true;
      break;
    }
  }
  return T;
}

}  // namespace detail

/// Orthogonal varimax by pairwise planar rotations; each planar angle is the
/// exact maximizer for its factor pair.
[[nodiscard]] inline FactorSolution rotate_varimax(const FactorSolution& in,
                                                   VarimaxOptions opt = {}) {
  if (in.m() < 2) {
    FactorSolution out = in;
    out.rotation = Rotation::None;
    return out;
  }
  ConvergenceInfo info;
  const Matrix T = detail::varimax_rotation(in.loadings, opt, info);
  if (!info.converged) {
    throw Error(Errc::NoConvergence, "varimax still improving after " +
                                         std::to_string(opt.max_sweeps) + " sweeps")
        .with_value(info.achieved);
  }

  FactorSolution out = in;
  out.rotation = Rotation::Varimax;
  out.gamma = 0.0;
  out.loadings = in.loadings * T;
  out.rotation_matrix = in.rotation_matrix * T;
  out.phi = Matrix::identity(in.m());
  out.rotation_info = std::move(info);
  detail::finalize(out);
  return sort_and_sign(out);
}

struct ObliminOptions {
  double gamma = 0.0;
  int max_iter = 1000;
  double tolerance = 1e-6;
};

/// Oblimin criterion value and its gradient with respect to the loadings.
struct CriterionGradient {
  double value = 0.0;
  Matrix gradient;
};

[[nodiscard]] inline CriterionGradient oblimin_criterion(const Matrix& L, double gamma) {
  const std::size_t p = L.rows();
  const std::size_t m = L.cols();
  // X = (I - gamma/p 11') L^2 N, N = 11' - I.
  Matrix X(p, m);
  for (std::size_t j = 0; j < p; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) row += L(j, k) * L(j, k);
    for (std::size_t k = 0; k < m; ++k) X(j, k) = row - L(j, k) * L(j, k);
  }
  if (gamma != 0.0) {
    for (std::size_t k = 0; k < m; ++k) {
      double col = 0.0;
      for (std::size_t j = 0; j < p; ++j) col += X(j, k);
      const double shift = gamma * col / static_cast<double>(p);
      for (std::size_t j = 0; j < p; ++j) X(j, k) -= shift;
    }
  }
  CriterionGradient out;
  out.gradient = Matrix(p, m);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < m; ++k) {
      out.value += L(j, k) * L(j, k) * X(j, k);
      out.gradient(j, k) = L(j, k) * X(j, k);
    }
  out.value /= 4.0;
  return out;
}

/// Direct oblimin by oblique gradient projection. The rotation matrix T has
/// unit-length columns; pattern = A (T^-1)', phi = T'T. Iteration starts from
/// the varimax orientation: in balanced designs the unrotated solution can be
/// an exact stationary point of the criterion.
[[nodiscard]] inline FactorSolution rotate_oblimin(const FactorSolution& in,
                                                   ObliminOptions opt = {}) {
  if (in.m() < 2) {
    FactorSolution out = in;
    out.rotation = Rotation::None;
    return out;
  }
  const std::size_t m = in.m();
  const Matrix& A = in.loadings;

  auto pattern = [&](const Matrix& T) { return A * detail::general_inverse(T).transpose(); };
  auto gradient_t = [&](const Matrix& L, const Matrix& Gq, const Matrix& T) {
    return -1.0 * (L.transpose() * Gq * detail::general_inverse(T)).transpose();
  };

  ConvergenceInfo start_info;
  Matrix T = detail::varimax_rotation(A, {}, start_info);
  if (!start_info.converged) T = Matrix::identity(m);
  Matrix L = pattern(T);
  auto q = oblimin_criterion(L, opt.gamma);
  double f = q.value;
  Matrix G = gradient_t(L, q.gradient, T);

  ConvergenceInfo info;
  info.converged = false;
  info.criterion_history.push_back(f);
  double step = 1.0;
  double s = 0.0;
  int iter = 0;
  for (; iter <= opt.max_iter; ++iter) {
    Matrix Gp = G;
    for (std::size_t k = 0; k < m; ++k) {
      double tg = 0.0;
      for (std::size_t r = 0; r < m; ++r) tg += T(r, k) * G(r, k);
      for (std::size_t r = 0; r < m; ++r) Gp(r, k) -= T(r, k) * tg;
    }
    s = 0.0;
    for (double g : Gp.data()) s += g * g;
    s = std::sqrt(s);
    if (s < opt.tolerance) {
      info.converged = true;
      break;
    }
    if (iter == opt.max_iter) break;

    step *= 2.0;
    Matrix Tt, Lt;
    CriterionGradient qt;
    for (int halving = 0; halving <= 10; ++halving) {
      Tt = T - step * Gp;
      for (std::size_t k = 0; k < m; ++k) {
        double len = 0.0;
        for (std::size_t r = 0; r < m; ++r) len += Tt(r, k) * Tt(r, k);
        len = std::sqrt(len);
        for (std::size_t r = 0; r < m; ++r) Tt(r, k) /= len;
      }
      Lt = pattern(Tt);
      qt = oblimin_criterion(Lt, opt.gamma);
      if (f - qt.value > 0.5 * s * s * step) break;
      step *= 0.5;
    }
    T = std::move(Tt);
    L = std::move(Lt);
    f = qt.value;
    G = gradient_t(L, qt.gradient, T);
    info.criterion_history.push_back(f);
  }
  info.iterations = iter;
  info.achieved = s;
  if (!info.converged) {
    throw Error(Errc::NoConvergence, "oblimin gradient norm " + std::to_string(s) + " after " +
                                         std::to_string(opt.max_iter) + " iterations")
        .with_value(s);
  }

  FactorSolution out = in;
  out.rotation = Rotation::Oblimin;
  out.gamma = opt.gamma;
  out.loadings = std::move(L);
  out.phi = T.transpose() * T;
  for (std::size_t k = 0; k < m; ++k) out.phi(k, k) = 1.0;
  out.phi = SymMatrix::symmetrize(out.phi).matrix();
  out.rotation_matrix = std::move(T);
  out.rotation_info = std::move(info);
  detail::finalize(out);
  return sort_and_sign(out);
}

/// Model-implied correlation matrix Lambda Phi Lambda' + diag(uniqueness).
[[nodiscard]] inline SymMatrix reproduced_correlation(const FactorSolution& s) {
  const Matrix common = s.loadings * s.phi * s.loadings.transpose();
  Matrix out = common;
  for (std::size_t j = 0; j < s.p(); ++j) out(j, j) += s.uniquenesses[j];
  return SymMatrix::symmetrize(out);
}

enum class AssignmentStatus { Assigned, CrossLoaded, Unassigned };

[[nodiscard]] inline std::string_view to_string(AssignmentStatus a) noexcept {
  switch (a) {
    case AssignmentStatus::Assigned: return "assigned";
    case AssignmentStatus::CrossLoaded: return "cross_loaded";
    case AssignmentStatus::Unassigned: return "unassigned";
  }
  return "unassigned";
}

struct ItemAssignment {
  std::string item;
  AssignmentStatus status = AssignmentStatus::Unassigned;
  std::size_t factor = 0;  // factor with the largest |pattern loading|
  double loading = 0.0;    // that loading, signed
  std::optional<std::size_t> second_factor;  // set for cross-loaded items

  bool operator==(const ItemAssignment&) const = default;
};

[[nodiscard]] inline std::vector<ItemAssignment> assign_items(const FactorSolution& s,
                                                              double cutoff = 0.4) {
  std::vector<ItemAssignment> out;
  for (std::size_t j = 0; j < s.p(); ++j) {
    ItemAssignment a;
    a.item = j < s.items.size() ? s.items[j] : "X" + std::to_string(j + 1);
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.m(); ++k)
      if (std::abs(s.loadings(j, k)) > std::abs(s.loadings(j, best))) best = k;
    a.factor = best;
    a.loading = s.m() ? s.loadings(j, best) : 0.0;
    if (std::abs(a.loading) >= cutoff) {
      a.status = AssignmentStatus::Assigned;
      for (std::size_t k = 0; k < s.m(); ++k) {
        if (k != best && std::abs(s.loadings(j, k)) >= cutoff) {
          a.status = AssignmentStatus::CrossLoaded;
          a.second_factor = k;
          break;
        }
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace psychoval
