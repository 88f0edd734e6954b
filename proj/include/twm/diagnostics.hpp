#pragma once

// Stress-energy, energies, sup norms and conservation residuals for frame fields,
// plus the k-th order energies of the direct wave-map formulation.
//
// Notation: X.Y = X^a Y^b g_ab, X^2 = X.X, p(X, Y) = X^a Y^b p_ab.

#include "twm/chart.hpp"
#include "twm/frame_system.hpp"

#include <array>
#include <limits>
#include <span>
#include <utility>

namespace twm {

namespace detail {

/// Columnwise X^a Y^b M_ab.
inline Eigen::RowVectorXd pair_form(const Matrix& m, const Matrix& x, const Matrix& y) {
  return (x.array() * (m * y).array()).colwise().sum();
}

}  // namespace detail

/// Columnwise metric inner product X.Y
inline Eigen::RowVectorXd dot(const TargetGeometry& geom, const Matrix& x, const Matrix& y) {
  return detail::pair_form(geom.g, x, y);
}

inline Eigen::RowVectorXd p_form(const TargetGeometry& geom, const Matrix& x, const Matrix& y) {
  return detail::pair_form(geom.p, x, y);
}

/// Energy density T_tt = (E^2 + H^2 + B^2)/2 + lambda v_t p(H, E).
inline Eigen::RowVectorXd energy_density(const FrameState& s, const TargetGeometry& geom, const Coupling& c) {
  Eigen::RowVectorXd d = 0.5 * (dot(geom, s.E, s.E) + dot(geom, s.H, s.H) + dot(geom, s.B, s.B));
  if (c.lambda != 0.0 && c.v_t != 0.0) d += c.lambda * c.v_t * p_form(geom, s.H, s.E);
  return d;
}

inline double energy(const FrameState& s, const TargetGeometry& geom, const Coupling& c, const Grid& grid) {
  return integrate(grid, energy_density(s, geom, c));
}

/// |p|^2 = |p_ab p_cd g^ac g^bd|
inline double p_norm(const TargetGeometry& geom) {
  return std::sqrt(std::abs((geom.p * geom.g_inv * geom.p.transpose() * geom.g_inv).trace()));
}

/// 1 / sqrt(|v_t| |p|), or +infinity when p = 0 or v_t = 0.
inline double lambda_max(const TargetGeometry& geom, double v_t) {
  const double pn = p_norm(geom);
  if (pn == 0.0 || v_t == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(std::abs(v_t) * pn);
}

/// Operator norm of p with respect to g (largest |p(X, Y)| over g-unit X, Y).
/// |lambda v_t| * p_operator_norm <= 1 is what pointwise positivity of T_tt actually needs.
inline double p_operator_norm(const TargetGeometry& geom) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(geom.g);
  const Matrix half_inv = eig.operatorInverseSqrt();
  const Matrix m = half_inv * geom.p * half_inv;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

/// Cartesian stress components, one entry per grid point.
struct StressComponents {
  Eigen::RowVectorXd xx, yy, tx, xt, ty, yt, xy, yx, tt;
};

inline StressComponents stress_components(const FrameState& s, const TargetGeometry& geom, const Coupling& c) {
  const auto EE = dot(geom, s.E, s.E), HH = dot(geom, s.H, s.H), BB = dot(geom, s.B, s.B);
  const auto EB = dot(geom, s.E, s.B), HB = dot(geom, s.H, s.B), EH = dot(geom, s.E, s.H);
  const double l = c.lambda;
  const auto pHB = p_form(geom, s.H, s.B), pBE = p_form(geom, s.B, s.E), pHE = p_form(geom, s.H, s.E);
  StressComponents t;
  t.xx = 0.5 * (EE - HH + BB) + l * c.v_x * pHB;
  t.yy = 0.5 * (-EE + HH + BB) + l * c.v_y * pBE;
  t.tx = EB + l * c.v_x * pHE;
  t.xt = EB + l * c.v_t * pHB;
  t.ty = HB + l * c.v_y * pHE;
  t.yt = HB + l * c.v_t * pBE;
  t.xy = EH + l * c.v_y * pHB;
  t.yx = EH + l * c.v_x * pBE;
  t.tt = 0.5 * (EE + HH + BB) + l * c.v_t * pHE;
  return t;
}

/// Null components for l = t + x, n = -t + x (eta_ln = 1/2).
struct NullComponents {
  Eigen::RowVectorXd ll, nn, ln, nl;
};

inline NullComponents null_components(const FrameState& s, const TargetGeometry& geom, const Coupling& c) {
  const Matrix P = s.B + s.E, M = s.E - s.B;
  const auto HH = dot(geom, s.H, s.H);
  const double l4 = 0.25 * c.lambda;
  const auto pHP = p_form(geom, s.H, P), pHM = p_form(geom, s.H, M);
  NullComponents t;
  t.ll = 0.25 * dot(geom, P, P) + l4 * (c.v_t + c.v_x) * pHP;
  t.nn = 0.25 * dot(geom, M, M) - l4 * (-c.v_t + c.v_x) * pHM;
  t.ln = -0.25 * HH + l4 * (-c.v_t + c.v_x) * pHP;
  t.nl = -0.25 * HH - l4 * (c.v_t + c.v_x) * pHM;
  return t;
}

struct NullResidual {
  Eigen::RowVectorXd ll;  // d_n T_ll + d_l T_nl
  Eigen::RowVectorXd nn;  // d_l T_nn + d_n T_ln
};

/// Residuals of the null conservation laws at the centre of a window of 3 or 5 equally
/// spaced snapshots (time differencing of order 2 or 4). d_l = (d_t + d_x)/2, d_n = (-d_t + d_x)/2.
inline NullResidual null_conservation_residual(std::span<const FrameState> window, const TargetGeometry& geom,
                                               const Coupling& c, const Grid& grid,
                                               FdOrder order = FdOrder::fourth) {
  if (window.size() != 3 && window.size() != 5)
    throw DataError("null conservation residual needs 3 or 5 consecutive snapshots, got " +
                    std::to_string(window.size()));
  const double dt = window[1].t - window[0].t;
  if (!(dt > 0.0)) throw DataError("snapshots must be strictly increasing in time");
  for (std::size_t k = 2; k < window.size(); ++k)
    if (std::abs(window[k].t - window[k - 1].t - dt) > 1e-9 * std::max(1.0, dt))
      throw DataError("snapshots must be equally spaced in time");
  std::vector<Matrix> comps(window.size());  // rows: ll, nn, ln, nl
  for (std::size_t k = 0; k < window.size(); ++k) {
    const auto t = null_components(window[k], geom, c);
    comps[k].resize(4, grid.N);
    comps[k] << t.ll, t.nn, t.ln, t.nl;
  }
  std::vector<const Matrix*> ptrs;
  for (const auto& m : comps) ptrs.push_back(&m);
  const Matrix dt_c = central_time_derivative(ptrs, dt);
  const Matrix dx_c = ddx(grid, comps[window.size() / 2], order);
  const auto dl = [&](int r) -> Eigen::RowVectorXd { return 0.5 * (dt_c.row(r) + dx_c.row(r)); };
  const auto dn = [&](int r) -> Eigen::RowVectorXd { return 0.5 * (-dt_c.row(r) + dx_c.row(r)); };
  return {dn(0) + dl(3), dl(1) + dn(2)};
}

/// Pointwise sup of sqrt(X.X).
inline double sup_norm(const TargetGeometry& geom, const Matrix& x) {
  if (x.cols() == 0) return 0.0;
  return std::sqrt(std::max(0.0, dot(geom, x, x).maxCoeff()));
}

/// min over the grid of T_tt
inline double energy_positivity_scan(const FrameState& s, const TargetGeometry& geom, const Coupling& c) {
  return energy_density(s, geom, c).minCoeff();
}

/// Frame analogues of the k-th order energies: E_0 = (1/2) int (E^2 + B^2),
/// E_1 = (1/2) int ((d_x E)^2 + (d_x B)^2).
inline std::array<double, 2> frame_energy_k(const FrameState& s, const TargetGeometry& geom, const Grid& grid,
                                            FdOrder order = FdOrder::fourth) {
  const double e0 = 0.5 * integrate(grid, dot(geom, s.E, s.E) + dot(geom, s.B, s.B));
  const Matrix dE = ddx(grid, s.E, order), dB = ddx(grid, s.B, order);
  const double e1 = 0.5 * integrate(grid, dot(geom, dE, dE) + dot(geom, dB, dB));
  return {e0, e1};
}

/// E_k = (1/2) int (|d_t d_x^k phi|^2 + |d_x^(k+1) phi|^2) dx, norms taken with g(phi(x)).
inline double energy_k(const WaveMapState& s, const TargetChart& chart, const Grid& grid, int k,
                       FdOrder order = FdOrder::fourth) {
  if (k != 0 && k != 1) throw ConfigError("energy_k supports k = 0 and k = 1");
  Matrix a = s.theta, b = ddx(grid, s.phi, order);
  if (k == 1) {
    a = ddx(grid, s.theta, order);
    b = d2dx2(grid, s.phi, order);
  }
  Eigen::RowVectorXd dens(grid.N);
  for (int i = 0; i < grid.N; ++i) {
    const Matrix g = chart.metric(s.phi.col(i));
    dens(i) = 0.5 * (a.col(i).dot(g * a.col(i)) + b.col(i).dot(g * b.col(i)));
  }
  return integrate(grid, dens);
}

struct DiagnosticsRecord {
  double t = 0.0;
  double energy = 0.0;
  std::array<double, 2> energy_k{0.0, 0.0};
  double sup_E = 0.0;
  double sup_H = 0.0;
  double sup_B = 0.0;
  double max_constraint = 0.0;
  double null_residual_ll = 0.0;
  double null_residual_nn = 0.0;
  double min_energy_density = 0.0;

  double null_conservation_residual() const { return std::max(null_residual_ll, null_residual_nn); }
  bool finite() const {
    for (double v : {t, energy, energy_k[0], energy_k[1], sup_E, sup_H, sup_B, max_constraint, null_residual_ll,
                     null_residual_nn, min_energy_density})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Everything except the null residuals, which need neighbouring snapshots.
inline DiagnosticsRecord instantaneous_diagnostics(const FrameSystem& sys, const FrameState& s) {
  const auto& geom = sys.geometry();
  const auto& grid = sys.grid();
  DiagnosticsRecord r;
  r.t = s.t;
  const auto dens = energy_density(s, geom, sys.coupling());
  r.energy = integrate(grid, dens);
  r.min_energy_density = dens.minCoeff();
  r.energy_k = frame_energy_k(s, geom, grid, sys.fd_order());
  r.sup_E = sup_norm(geom, s.E);
  r.sup_H = sup_norm(geom, s.H);
  r.sup_B = sup_norm(geom, s.B);
  r.max_constraint = sys.constraint_residual(s).cwiseAbs().maxCoeff();
  return r;
}

}  // namespace twm
