#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace twm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

/// Dense n x n x n array of doubles stored row-major in (i, j, k).
class Tensor3 {
public:
  struct Entry {
    int i, j, k;
    double value;
  };

  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }

  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  double at(int i, int j, int k) const { return data_[index(i, j, k)]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Nonzero entries, for contractions inside the stepping loops.
  std::vector<Entry> nonzeros() const {
    std::vector<Entry> out;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k)
          if (double v = at(i, j, k); v != 0.0) out.push_back({i, j, k, v});
    return out;
  }

  friend Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
    Tensor3 r(a.n_);
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] = a.data_[i] - b.data_[i];
    return r;
  }
  friend Tensor3 operator+(const Tensor3& a, const Tensor3& b) {
    Tensor3 r(a.n_);
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] = a.data_[i] + b.data_[i];
    return r;
  }

private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
  }

  int n_ = 0;
  std::vector<double> data_;
};

/// Structure constants C_bc^a, addressed as (b, c, a): two lower indices, then the upper one.
class StructureConstants : public Tensor3 {
public:
  using Tensor3::Tensor3;
  double& operator()(int b, int c, int a) { return at(b, c, a); }
  double operator()(int b, int c, int a) const { return at(b, c, a); }
};

/// A tensor T^a_bc with the upper index first, addressed as (a, b, c).
/// Used for the torsion Q^a_bc and the raised structure constants C^a_bc.
class MixedTensor : public Tensor3 {
public:
  using Tensor3::Tensor3;
  explicit MixedTensor(Tensor3 t) : Tensor3(std::move(t)) {}
  double& operator()(int a, int b, int c) { return at(a, b, c); }
  double operator()(int a, int b, int c) const { return at(a, b, c); }
};

/// Largest |entry| of A + sign * A^T.
inline double symmetry_defect(const Matrix& a, double sign) {
  return (a + sign * a.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace twm
