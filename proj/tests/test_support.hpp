#pragma once

#include <cmath>
#include <random>

#include "graphgp/matrix.hpp"
#include "graphgp/numerics.hpp"

namespace gpt {

using graphgp::Matrix;
using graphgp::Vector;

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Matrix random_symmetric(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = gauss(rng);
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

// G G^T + I, comfortably positive definite.
inline Matrix random_spd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = gauss(rng);
  Matrix a = g * g.transposed();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  return graphgp::symmetrized(std::move(a));
}

inline Matrix reconstruct(const graphgp::EigDecomp& eig) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += eig.vectors(i, k) * eig.values[k] * eig.vectors(j, k);
      out(i, j) = s;
    }
  return out;
}

}  // namespace gpt
