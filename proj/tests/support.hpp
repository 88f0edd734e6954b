#pragma once

#include "twm/run.hpp"

#include <random>
#include <string>

namespace twm::test {

inline std::string source_path(const std::string& rel) { return std::string(TWM_SOURCE_DIR) + "/" + rel; }

inline double levi_civita(int a, int b, int c) { return 0.5 * (a - b) * (b - c) * (c - a); }

inline Matrix random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() + n * Matrix::Identity(n, n);
}

inline Matrix random_antisymmetric(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      p(i, j) = z(rng);
      p(j, i) = -p(i, j);
    }
  return p;
}

inline Vector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

inline Matrix random_field(int n, int N, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix m(n, N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < N; ++j) m(i, j) = z(rng);
  return m;
}

/// Q^a_bc written out as a plain quadruple loop.
inline double torsion_entry(const Matrix& g, const Matrix& p, const StructureConstants& C, int a, int b, int c) {
  const int n = static_cast<int>(g.rows());
  const Matrix gi = g.inverse();
  double s = 0.0;
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e) s += gi(a, d) * (p(e, d) * C(b, c, e) + p(e, b) * C(c, d, e) + p(e, c) * C(d, b, e));
  return -0.5 * s;
}

}  // namespace twm::test
