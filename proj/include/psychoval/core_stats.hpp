#pragma once

// Scalar statistics and the dense symmetric-matrix kernel shared by every
// other module. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "psychoval/errors.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

inline constexpr double kSingularityRatio = 1e-10;

[[nodiscard]] inline double mean(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::EmptyDataset, "mean of an empty sequence");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Sample variance, denominator n-1.
[[nodiscard]] inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw Error(Errc::InsufficientRows, "variance needs at least 2 values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

/// Sample Pearson correlation. Exactly symmetric in its arguments and clamped
/// to [-1, 1].
[[nodiscard]] inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::LengthMismatch, "vectors of length " + std::to_string(x.size()) + " and " +
                                          std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw Error(Errc::LengthMismatch, "pearson needs n >= 3, got " + std::to_string(x.size()));
  }
  // Deviations scaled by n (n*x_i - sum x): exact for integer responses, so
  // identical or reflected score vectors give exactly +1 or -1.
  const double n = static_cast<double>(x.size());
  double sum_x = 0.0, sum_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum_x += x[i];
    sum_y += y[i];
  }
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = n * x[i] - sum_x;
    const double dy = n * y[i] - sum_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw Error(Errc::ZeroVariance, "first argument is constant");
  if (syy == 0.0) throw Error(Errc::ZeroVariance, "second argument is constant");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

namespace detail {

inline std::string item_label(std::span<const std::string> labels, std::size_t j) {
  return j < labels.size() ? labels[j] : "item " + std::to_string(j + 1);
}

}  // namespace detail

/// Number of rows where both columns are observed (non-NaN).
[[nodiscard]] inline std::vector<std::vector<std::size_t>> pairwise_counts(const Matrix& data) {
  const std::size_t p = data.cols();
  std::vector<std::vector<std::size_t>> n(p, std::vector<std::size_t>(p, 0));
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t i = 0; i < p; ++i) {
      if (std::isnan(data(r, i))) continue;
      for (std::size_t j = i; j < p; ++j)
        if (!std::isnan(data(r, j))) ++n[i][j];
    }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < i; ++j) n[i][j] = n[j][i];
  return n;
}

/// Correlation matrix of the columns of `data` (respondents x items). NaN
/// cells are missing; each pair uses the rows where both items are observed.
[[nodiscard]] inline SymMatrix correlation_matrix(const Matrix& data,
                                                  std::span<const std::string> labels = {}) {
  const std::size_t p = data.cols();
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> col;
    for (std::size_t r = 0; r < data.rows(); ++r)
      if (!std::isnan(data(r, j))) col.push_back(data(r, j));
    if (col.size() >= 2 && sample_variance(col) == 0.0) {
      throw Error(Errc::ZeroVariance, "item '" + detail::item_label(labels, j) + "' is constant");
    }
  }
  SymMatrix R = SymMatrix::identity(p);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      x.clear();
      y.clear();
      for (std::size_t r = 0; r < data.rows(); ++r) {
        if (std::isnan(data(r, i)) || std::isnan(data(r, j))) continue;
        x.push_back(data(r, i));
        y.push_back(data(r, j));
      }
      if (x.size() < 3) {
        throw Error(Errc::InsufficientRows, "pair ('" + detail::item_label(labels, i) + "', '" +
                                                detail::item_label(labels, j) + "') has " +
                                                std::to_string(x.size()) + " complete rows");
      }
      try {
        R.set(i, j, pearson(x, y));
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroVariance) throw;
        const bool first = e.detail().starts_with("first");
        throw Error(Errc::ZeroVariance,
                    "item '" + detail::item_label(labels, first ? i : j) +
                        "' is constant over the rows shared with '" +
                        detail::item_label(labels, first ? j : i) + "'");
      }
    }
  return R;
}

/// Sample covariance (n-1) of complete data.
[[nodiscard]] inline SymMatrix covariance_matrix(const Matrix& data) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  if (n < 2) throw Error(Errc::InsufficientRows, "covariance needs at least 2 rows");
  std::vector<double> mu(p, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < p; ++j) mu[j] += data(r, j);
  for (double& m : mu) m /= static_cast<double>(n);
  SymMatrix C(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += (data(r, i) - mu[i]) * (data(r, j) - mu[j]);
      C.set(i, j, s / static_cast<double>(n - 1));
    }
  return C;
}

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
  int sweeps = 0;
};

struct JacobiOptions {
  double tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Cyclic Jacobi eigendecomposition. Convergence is declared when the largest
/// off-diagonal magnitude drops below tolerance * max(1, max |a_ij|).
/// Eigenvalues come out descending (stable on ties); each eigenvector is
/// signed so its largest-magnitude entry (lowest index on ties) is positive.
[[nodiscard]] inline EigenDecomposition sym_eigen(const SymMatrix& A, JacobiOptions opt = {}) {
  const std::size_t n = A.dim();
  Matrix a = A.matrix();
  Matrix v = Matrix::identity(n);

  double scale = 1.0;
  for (double x : a.data()) {
    if (!std::isfinite(x)) throw Error(Errc::DomainError, "matrix has non-finite entries");
    scale = std::max(scale, std::abs(x));
  }
  const double threshold = opt.tolerance * scale;

  auto max_off = [&] {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
  };

  int sweep = 0;
  double off = max_off();
  while (off >= threshold) {
    if (sweep == opt.max_sweeps) {
      throw Error(Errc::NoConvergence, "Jacobi off-diagonal " + std::to_string(off) + " after " +
                                           std::to_string(sweep) + " sweeps")
          .with_value(off);
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p);
            const double arq = a(r, q);
            a(r, p) = c * arp - s * arq;
            a(p, r) = a(r, p);
            a(r, q) = s * arp + c * arq;
            a(q, r) = a(r, q);
          }
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    ++sweep;
    off = max_off();
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    std::size_t lead = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, src)) > std::abs(v(lead, src))) lead = r;
    const double sign = v(lead, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = sign * v(r, src);
  }
  return out;
}

/// Rebuilds V diag(f(lambda)) V^T.
template <typename F>
[[nodiscard]] SymMatrix spectral_map(const EigenDecomposition& e, F&& f) {
  const std::size_t n = e.eigenvalues.size();
  std::vector<double> d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = f(e.eigenvalues[k]);
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += e.eigenvectors(i, k) * d[k] * e.eigenvectors(j, k);
      out.set(i, j, s);
    }
  return out;
}

/// Inverse through the eigendecomposition. Singular when the smallest
/// |eigenvalue| is below 1e-10 times the largest.
[[nodiscard]] inline SymMatrix inverse(const SymMatrix& A) {
  if (A.dim() == 0) return A;
  const auto e = sym_eigen(A);
  double big = 0.0, small = std::numeric_limits<double>::infinity();
  double smallest_signed = 0.0;
  for (double l : e.eigenvalues) {
    big = std::max(big, std::abs(l));
    if (std::abs(l) < small) {
      small = std::abs(l);
      smallest_signed = l;
    }
  }
  if (big == 0.0 || small < kSingularityRatio * big) {
    throw Error(Errc::SingularMatrix,
                "smallest eigenvalue " + std::to_string(smallest_signed) + " vs largest " +
                    std::to_string(big))
        .with_value(smallest_signed);
  }
  return spectral_map(e, [](double l) { return 1.0 / l; });
}

[[nodiscard]] inline double log_determinant(const SymMatrix& A) {
  const auto e = sym_eigen(A);
  if (e.eigenvalues.empty()) return 0.0;
  const double big = e.eigenvalues.front();
  const double small = e.eigenvalues.back();
  if (big <= 0.0 || small <= kSingularityRatio * big) {
    throw Error(Errc::NotPositiveDefinite, "smallest eigenvalue " + std::to_string(small))
        .with_value(small);
  }
  double s = 0.0;
  for (double l : e.eigenvalues) s += std::log(l);
  return s;
}

namespace detail {

// Relative stopping rule; the regularized values are <= 1, so the absolute
// error stays far below 1e-12.
inline constexpr double kGammaTolerance = 1e-15;
inline constexpr int kGammaMaxIter = 10000;

inline double gamma_prefactor(double a, double x) {
  return std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Series for P(a, x); valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaTolerance) {
      return sum * gamma_prefactor(a, x);
    }
  }
  throw Error(Errc::NoConvergence, "incomplete gamma series");
}

// Modified Lentz continued fraction for Q(a, x); valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaTolerance) return h * gamma_prefactor(a, x);
  }
  throw Error(Errc::NoConvergence, "incomplete gamma continued fraction");
}

}  // namespace detail

/// Lower regularized incomplete gamma P(a, x).
[[nodiscard]] inline double regularized_gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw Error(Errc::DomainError, "gamma_p needs a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_fraction(a, x);
}

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
[[nodiscard]] inline double regularized_gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw Error(Errc::DomainError, "gamma_q needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - detail::gamma_p_series(a, x) : detail::gamma_q_fraction(a, x);
}

/// P(chi2_df > x).
[[nodiscard]] inline double chi_square_sf(double x, int df) {
  if (!(x >= 0.0)) throw Error(Errc::DomainError, "chi-square statistic must be >= 0");
  if (df < 1) throw Error(Errc::DomainError, "degrees of freedom must be >= 1");
  return std::clamp(regularized_gamma_q(0.5 * df, 0.5 * x), 0.0, 1.0);
}

[[nodiscard]] inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Standard normal quantile: rational initial guess refined by Newton steps
/// on normal_cdf.
[[nodiscard]] inline double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw Error(Errc::DomainError, "quantile needs 0 < p < 1");
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (prob < lo) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - lo) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 3; ++i) {
    const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    x -= (normal_cdf(x) - prob) / density;
  }
  return x;
}

}  // namespace psychoval
