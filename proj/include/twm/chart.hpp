#pragma once

// Chart-based targets for the direct (second-order) invariant wave-map solver.

#include "twm/errors.hpp"
#include "twm/lie_algebra.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace twm {

/// Target described in one coordinate chart. `connection` returns
/// Gamma~^A_BC = Gamma^A_BC + Q^A_BC as a MixedTensor (A, B, C).
struct TargetChart {
  std::string name;
  int dim = 0;
  std::function<Matrix(const Vector&)> metric;
  std::function<MixedTensor(const Vector&)> connection;
  /// Torsion potential p_AB(psi); optional.
  std::function<Matrix(const Vector&)> potential;
  /// Left-invariant coframe e^a_A(psi) for Lie group charts; optional.
  std::function<Matrix(const Vector&)> coframe;
  std::function<bool(const Vector&)> valid = [](const Vector&) { return true; };
  std::string validity_note = "everywhere";
};

struct WaveMapState {
  double t = 0.0;
  Matrix phi;    // chart coordinates psi^A per point (n x N)
  Matrix theta;  // d phi / dt

  int dim() const { return static_cast<int>(phi.rows()); }
  int points() const { return static_cast<int>(phi.cols()); }
};

struct WaveMapRates {
  Matrix dphi;
  Matrix dtheta;
};

inline WaveMapState advanced(const WaveMapState& s, const WaveMapRates& r, double a) {
  return {s.t + a, s.phi + a * r.dphi, s.theta + a * r.dtheta};
}

/// Q^A_BC = (1/2) g^AD (d_D p_BC + d_B p_CD + d_C p_DB) by centered differencing of the potential.
inline MixedTensor torsion_from_potential(const TargetChart& chart, const Vector& psi, double step = 1e-5) {
  if (!chart.potential) throw CapabilityError("chart '" + chart.name + "' has no torsion potential");
  const int n = chart.dim;
  std::vector<Matrix> dp(n);
  for (int d = 0; d < n; ++d) {
    Vector hp = psi, hm = psi;
    hp(d) += step;
    hm(d) -= step;
    dp[d] = (chart.potential(hp) - chart.potential(hm)) / (2.0 * step);
  }
  const Matrix g_inv = checked_inverse(chart.metric(psi));
  MixedTensor q(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += g_inv(a, d) * (dp[d](b, c) + dp[b](c, d) + dp[c](d, b));
        q(a, b, c) = 0.5 * s;
      }
  return q;
}

/// Antisymmetric part Gamma~^A_[BC] of a connection.
inline MixedTensor antisymmetric_part(const MixedTensor& gt) {
  MixedTensor q(gt.dim());
  for (int a = 0; a < gt.dim(); ++a)
    for (int b = 0; b < gt.dim(); ++b)
      for (int c = 0; c < gt.dim(); ++c) q(a, b, c) = 0.5 * (gt(a, b, c) - gt(a, c, b));
  return q;
}

/// Levi-Civita symbols from a metric and its coordinate derivatives dg[D](B, C) = d_D g_BC.
inline MixedTensor christoffel(const Matrix& g, const std::vector<Matrix>& dg) {
  const int n = static_cast<int>(g.rows());
  const Matrix g_inv = checked_inverse(g);
  MixedTensor out(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += g_inv(a, d) * (dg[b](d, c) + dg[c](d, b) - dg[d](b, c));
        out(a, b, c) = 0.5 * s;
      }
  return out;
}

namespace detail {

using Ad3 = Eigen::AutoDiffScalar<Eigen::Vector3d>;

/// (1 - cos r) / r^2 and (r - sin r) / r^3 as entire functions of s = r^2.
template <class T>
T one_minus_cos_over_s(const T& s) {
  using std::cos, std::sqrt;
  if (s < T(1e-2)) return 0.5 - s * (1.0 / 24 - s * (1.0 / 720 - s * (1.0 / 40320 - s * (1.0 / 3628800 - s / 479001600.0))));
  return (1.0 - cos(sqrt(s))) / s;
}

template <class T>
T r_minus_sin_over_r3(const T& s) {
  using std::sin, std::sqrt;
  if (s < T(1e-2))
    return 1.0 / 6 - s * (1.0 / 120 - s * (1.0 / 5040 - s * (1.0 / 362880 - s * (1.0 / 39916800 - s / 6227020800.0))));
  const T r = sqrt(s);
  return (r - sin(r)) / (s * r);
}

/// e(psi) = I - a(s) A + b(s) A^2 with A = ad_psi (cross-product matrix), U^-1 dU = e dpsi.
template <class T>
Eigen::Matrix<T, 3, 3> su2_coframe(const Eigen::Matrix<T, 3, 1>& psi) {
  Eigen::Matrix<T, 3, 3> A;
  A << T(0), -psi(2), psi(1), psi(2), T(0), -psi(0), -psi(1), psi(0), T(0);
  const T s = psi.squaredNorm();
  Eigen::Matrix<T, 3, 3> I = Eigen::Matrix<T, 3, 3>::Identity();
  return I - one_minus_cos_over_s(s) * A + r_minus_sin_over_r3(s) * (A * A);
}

}  // namespace detail

/// Built-in charts: "flat_torsion_r3" and "su2_exponential".
inline TargetChart builtin_chart(const std::string& name) {
  TargetChart chart;
  chart.name = name;
  if (name == "flat_torsion_r3") {
    // g = identity, p_23 = psi^1, so Gamma = 0 and Q^A_BC = eps_ABC / 2.
    chart.dim = 3;
    chart.metric = [](const Vector&) -> Matrix { return Matrix::Identity(3, 3); };
    chart.potential = [](const Vector& psi) -> Matrix {
      Matrix p = Matrix::Zero(3, 3);
      p(1, 2) = psi(0);
      p(2, 1) = -psi(0);
      return p;
    };
    chart.connection = [](const Vector&) {
      MixedTensor q(3);
      const auto eps = detail::epsilon_constants(3, 0);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          for (int c = 0; c < 3; ++c) q(a, b, c) = 0.5 * eps(a, b, c);
      return q;
    };
  } else if (name == "su2_exponential") {
    // U = exp(psi^a L_a); bi-invariant Cartan-Killing metric 2*identity pulled back by the coframe.
    chart.dim = 3;
    const Matrix g_alg = cartan_killing(builtin_algebra("su2"));
    chart.coframe = [](const Vector& psi) -> Matrix {
      return detail::su2_coframe<double>(Eigen::Vector3d(psi(0), psi(1), psi(2)));
    };
    chart.metric = [g_alg](const Vector& psi) -> Matrix {
      const Matrix e = detail::su2_coframe<double>(Eigen::Vector3d(psi(0), psi(1), psi(2)));
      return e.transpose() * g_alg * e;
    };
    chart.potential = [](const Vector&) -> Matrix { return Matrix::Zero(3, 3); };
    chart.connection = [g_alg](const Vector& psi) {
      using detail::Ad3;
      Eigen::Matrix<Ad3, 3, 1> x;
      for (int k = 0; k < 3; ++k) x(k) = Ad3(psi(k), 3, k);
      const Eigen::Matrix<Ad3, 3, 3> e = detail::su2_coframe<Ad3>(x);
      const Eigen::Matrix<Ad3, 3, 3> gad = e.transpose() * g_alg.cast<Ad3>() * e;
      Matrix g(3, 3);
      std::vector<Matrix> dg(3, Matrix(3, 3));
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          g(b, c) = gad(b, c).value();
          for (int d = 0; d < 3; ++d) dg[d](b, c) = gad(b, c).derivatives()(d);
        }
      return christoffel(g, dg);
    };
    chart.valid = [](const Vector& psi) { return psi.norm() < 0.9 * std::numbers::pi; };
    chart.validity_note = "|psi| < 0.9 pi";
  } else {
    throw ConfigError("unknown chart '" + name + "' (expected flat_torsion_r3 or su2_exponential)");
  }
  return chart;
}

}  // namespace twm
