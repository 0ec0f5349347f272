#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "graphgp/errors.hpp"
#include "graphgp/matrix.hpp"

namespace graphgp {

// Lower-triangular Cholesky factor of A + jitter_used * I.
struct CholFactor {
  Matrix lower;
  double jitter_used = 0.0;

  std::size_t size() const { return lower.rows(); }
};

struct EigDecomp {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values[i]
};

// Escalates x100 per step starting at 1e-12.
inline const std::vector<double>& default_jitter_schedule() {
  static const std::vector<double> schedule = {0.0,  1e-12, 1e-10, 1e-8,
                                               1e-6, 1e-4,  1e-2};
  return schedule;
}

namespace detail {

// In-place attempt; returns false on a non-positive pivot.
inline bool try_cholesky(const Matrix& a, double jitter, Matrix& lower) {
  const std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      if (i == j) s += jitter;
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower(i, i) = std::sqrt(s);
      } else {
        lower(i, j) = s / lower(j, j);
      }
    }
  }
  return true;
}

}  // namespace detail

inline CholFactor cholesky(const Matrix& a, std::span<const double> jitter_schedule) {
  require_symmetric(a, "cholesky");
  Matrix lower;
  for (double jitter : jitter_schedule) {
    if (detail::try_cholesky(a, jitter, lower)) return {std::move(lower), jitter};
  }
  throw NotPositiveDefinite("cholesky: matrix not positive definite at any scheduled jitter");
}

inline CholFactor cholesky(const Matrix& a) {
  return cholesky(a, default_jitter_schedule());
}

inline Vector solve_chol(const CholFactor& f, const Vector& b) {
  const std::size_t n = f.size();
  if (b.size() != n) throw DimensionMismatch("solve_chol: rhs length disagrees with factor");
  const Matrix& l = f.lower;
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * y[j];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

inline Matrix solve_chol(const CholFactor& f, const Matrix& b) {
  const std::size_t n = f.size();
  if (b.rows() != n) throw DimensionMismatch("solve_chol: rhs rows disagree with factor");
  const Matrix& l = f.lower;
  Matrix x(n, b.cols());
  Vector col(n);
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(i, c);
      for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * col[j];
      col[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = col[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * col[j];
      col[ii] = s / l(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) x(i, c) = col[i];
  }
  return x;
}

inline double logdet(const CholFactor& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::log(f.lower(i, i));
  return 2.0 * s;
}

// Cyclic Jacobi eigensolver. Adequate for the dense symmetric problems this
// library meets (graph Laplacians with M up to a few hundred).
inline EigDecomp sym_eig(const Matrix& a_in) {
  require_symmetric(a_in, "sym_eig");
  const std::size_t n = a_in.rows();
  Matrix a = symmetrized(a_in);
  Matrix v = Matrix::identity(n);
  if (n <= 1) return {Vector(n, n ? a(0, 0) : 0.0), std::move(v)};

  const double scale = std::max(1.0, max_abs(a));
  const double tol = 1e-14 * scale;
  const std::size_t max_sweeps = 100 * n;

  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol) {
      // sort ascending, carrying eigenvector columns along
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(),
                [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
      EigDecomp out;
      out.values.resize(n);
      out.vectors = Matrix(n, n);
      for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
      }
      return out;
    }
    for (std::size_t p = 0; p < n - 1; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * 1e-2) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  throw ConvergenceFailure("sym_eig: Jacobi sweeps exceeded iteration cap");
}

// Scalar spectral maps supported by matrix_function.
struct SpectralFn {
  enum class Kind { Exp, Cos, Pow, Pinv };

  Kind kind = Kind::Exp;
  double exponent = 1.0;  // Pow only

  static SpectralFn exp() { return {Kind::Exp, 0.0}; }
  static SpectralFn cos() { return {Kind::Cos, 0.0}; }
  static SpectralFn pow(double t) { return {Kind::Pow, t}; }
  static SpectralFn pinv() { return {Kind::Pinv, 0.0}; }
};

// V f(diag) V^T from a precomputed eigendecomposition.
inline Matrix spectral_apply(const EigDecomp& eig, std::span<const double> mapped) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += eig.vectors(i, k) * mapped[k] * eig.vectors(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

inline Matrix matrix_function(const EigDecomp& eig, SpectralFn f) {
  const std::size_t n = eig.values.size();
  Vector mapped(n);
  switch (f.kind) {
    case SpectralFn::Kind::Exp:
      for (std::size_t i = 0; i < n; ++i) mapped[i] = std::exp(eig.values[i]);
      break;
    case SpectralFn::Kind::Cos:
      for (std::size_t i = 0; i < n; ++i) mapped[i] = std::cos(eig.values[i]);
      break;
    case SpectralFn::Kind::Pow: {
      if (f.exponent < 0.0) {
        for (double lam : eig.values)
          if (lam <= 1e-10)
            throw SingularForNegativePower(
                "matrix_function: eigenvalue too small for negative power");
      }
      for (std::size_t i = 0; i < n; ++i) mapped[i] = std::pow(eig.values[i], f.exponent);
      break;
    }
    case SpectralFn::Kind::Pinv: {
      double lmax = 0.0;
      for (double lam : eig.values) lmax = std::max(lmax, std::abs(lam));
      const double cutoff = 1e-10 * lmax;
      for (std::size_t i = 0; i < n; ++i)
        mapped[i] = std::abs(eig.values[i]) <= cutoff ? 0.0 : 1.0 / eig.values[i];
      break;
    }
  }
  return spectral_apply(eig, mapped);
}

inline Matrix matrix_function(const Matrix& a, SpectralFn f) {
  return matrix_function(sym_eig(a), f);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  require_symmetric(a, "kron");
  require_symmetric(b, "kron");
  const std::size_t na = a.rows();
  const std::size_t nb = b.rows();
  Matrix out(na * nb, na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      const double aij = a(i, j);
      for (std::size_t p = 0; p < nb; ++p)
        for (std::size_t q = 0; q < nb; ++q) out(i * nb + p, j * nb + q) = aij * b(p, q);
    }
  return out;
}

}  // namespace graphgp
