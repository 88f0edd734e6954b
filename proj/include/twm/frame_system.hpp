#pragma once

// The 1+1 reduced frame-field system for translation-invariant (R = 0) and
// translation-equivariant (R != 0) frame fields E = K_x, H = K_y, B = K_t:
//
//   constraint  dH/dx = -[E, H - R]
//   dE/dt = dB/dx - [B, E]
//   dH/dt = -[B, H - R]
//   dB/dt = dE/dx + [H, R] - C^a_bc (B^b B^c - E^b E^c - H^b H^c)
//           + 2 lambda Q^a_bc (v_y B^b E^c - v_x B^b H^c + v_t E^b H^c)
//
// with [X, Y]^a = C_bc^a X^b Y^c. Signature diag(-1, +1, +1), eps^{txy} = +1.
// The torsion coefficient and the sign of [H, R] are the ones obtained by
// substituting the reduction ansatz into the 2+1 frame equations; with them
// the energy density T_tt of diagnostics.hpp is conserved.

#include "twm/grid.hpp"
#include "twm/lie_algebra.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace twm {

struct Coupling {
  double lambda = 0.0;
  double v_t = 0.0;
  double v_x = 0.0;
  double v_y = 0.0;
  TranslationData R;
};

/// Lie-algebra components per grid point (n x N each).
struct FrameState {
  double t = 0.0;
  Matrix E;
  Matrix H;
  Matrix B;

  static FrameState zero(int n, int N, double t = 0.0) {
    return {t, Matrix::Zero(n, N), Matrix::Zero(n, N), Matrix::Zero(n, N)};
  }
  int dim() const { return static_cast<int>(E.rows()); }
  int points() const { return static_cast<int>(E.cols()); }
};

struct FrameRates {
  Matrix dE;
  Matrix dH;
  Matrix dB;
};

/// state + a * rates, time advanced by a.
inline FrameState advanced(const FrameState& s, const FrameRates& r, double a) {
  return {s.t + a, s.E + a * r.dE, s.H + a * r.dH, s.B + a * r.dB};
}

/// Coefficients of the two terms whose normalization the literature states inconsistently.
/// The defaults are the derived ones; `literal_reading()` reproduces the printed 1+1
/// equations and exists only to compare the two.
struct ReducedForm {
  double torsion_coefficient = 2.0;
  double r_term_sign = 1.0;

  static ReducedForm literal_reading() { return {-1.0, -1.0}; }
};

/// The discretized right-hand side with all contraction tables precomputed.
class FrameSystem {
public:
  FrameSystem(const LieAlgebraSpec& alg, const TargetGeometry& geom, const Coupling& c, const Grid& grid,
              FdOrder order = FdOrder::fourth, ReducedForm form = {})
      : alg_(alg), geom_(geom), c_(c), grid_(grid), order_(order), form_(form) {
    n_ = alg.dim;
    if (c_.R.R.size() == 0) c_.R = TranslationData::zero(n_);
    if (c_.R.R.size() != n_) throw ConfigError("coupling.R must have one entry per algebra dimension");
    structure_ = alg.C.nonzeros();
    raised_ = geom.C_raised.nonzeros();
    torsion_ = geom.Q.nonzeros();
  }

  const LieAlgebraSpec& algebra() const { return alg_; }
  const TargetGeometry& geometry() const { return geom_; }
  const Coupling& coupling() const { return c_; }
  const Grid& grid() const { return grid_; }
  FdOrder fd_order() const { return order_; }

  FrameRates rhs(const FrameState& s) const {
    check_finite(s);
    const int N = grid_.N;
    FrameRates r{ddx(grid_, s.B, order_), Matrix::Zero(n_, N), ddx(grid_, s.E, order_)};
    const Vector& R = c_.R.R;
    const double tq = form_.torsion_coefficient * c_.lambda;
    std::vector<double> hr(n_);
    for (int i = 0; i < N; ++i) {
      const double* e = s.E.col(i).data();
      const double* h = s.H.col(i).data();
      const double* b = s.B.col(i).data();
      double* de = r.dE.col(i).data();
      double* dh = r.dH.col(i).data();
      double* db = r.dB.col(i).data();
      for (int a = 0; a < n_; ++a) hr[a] = h[a] - R(a);
      for (const auto& [bb, cc, a, v] : structure_) {
        de[a] -= v * b[bb] * e[cc];
        dh[a] -= v * b[bb] * hr[cc];
        db[a] += form_.r_term_sign * v * h[bb] * R(cc);
      }
      for (const auto& [a, bb, cc, v] : raised_) db[a] -= v * (b[bb] * b[cc] - e[bb] * e[cc] - h[bb] * h[cc]);
      if (tq != 0.0)
        for (const auto& [a, bb, cc, v] : torsion_)
          db[a] += tq * v * (c_.v_y * b[bb] * e[cc] - c_.v_x * b[bb] * h[cc] + c_.v_t * e[bb] * h[cc]);
    }
    return r;
  }

  /// dH/dx + [E, H - R] pointwise.
  Matrix constraint_residual(const FrameState& s) const {
    Matrix res = ddx(grid_, s.H, order_);
    const Vector& R = c_.R.R;
    for (int i = 0; i < grid_.N; ++i)
      for (const auto& [bb, cc, a, v] : structure_) res(a, i) += v * s.E(bb, i) * (s.H(cc, i) - R(cc));
    return res;
  }

  void check_finite(const FrameState& s) const {
    const std::array<const Matrix*, 3> fields{&s.E, &s.H, &s.B};
    const char* names[3] = {"E", "H", "B"};
    for (int f = 0; f < 3; ++f) {
      if (fields[f]->rows() != n_ || fields[f]->cols() != grid_.N)
        throw ConfigError(std::string("frame field ") + names[f] + " has the wrong shape");
      for (int i = 0; i < grid_.N; ++i)
        for (int a = 0; a < n_; ++a)
          if (!std::isfinite((*fields[f])(a, i))) {
            std::ostringstream msg;
            msg << "non-finite " << names[f] << "^" << a + 1 << " at x=" << grid_.x(i) << " (t=" << s.t << ")";
            throw NumericalError(msg.str());
          }
    }
  }

private:
  LieAlgebraSpec alg_;
  TargetGeometry geom_;
  Coupling c_;
  Grid grid_;
  FdOrder order_;
  ReducedForm form_;
  int n_ = 0;
  std::vector<Tensor3::Entry> structure_;  // (b, c, a) of C_bc^a
  std::vector<Tensor3::Entry> raised_;     // (a, b, c) of C^a_bc
  std::vector<Tensor3::Entry> torsion_;    // (a, b, c) of Q^a_bc
};

inline FrameRates rhs(const FrameState& state, const TargetGeometry& geom, const LieAlgebraSpec& alg,
                      const Coupling& c, const Grid& grid, FdOrder order = FdOrder::fourth) {
  return FrameSystem(alg, geom, c, grid, order).rhs(state);
}

inline Matrix constraint_residual(const FrameState& state, const LieAlgebraSpec& alg, const Coupling& c,
                                  const Grid& grid, FdOrder order = FdOrder::fourth) {
  TargetGeometry flat;  // only C enters the constraint
  flat.g = Matrix::Identity(alg.dim, alg.dim);
  flat.g_inv = flat.g;
  flat.p = Matrix::Zero(alg.dim, alg.dim);
  flat.Q = MixedTensor(alg.dim);
  flat.C_raised = MixedTensor(alg.dim);
  return FrameSystem(alg, flat, c, grid, order).constraint_residual(state);
}

}  // namespace twm
