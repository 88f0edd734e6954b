#pragma once

// Direct solver for the y-invariant torsion wave map equation in a chart,
//
//   phi_tt = phi_xx - Gamma^A_BC (phi_t^B phi_t^C - phi_x^B phi_x^C) + 2 lambda v_y Q^A_BC phi_t^B phi_x^C,
//
// reduced to first order in time with theta = phi_t. Gamma is the symmetric and Q the
// antisymmetric part of the chart connection.

#include "twm/frame_solver.hpp"

#include <sstream>

namespace twm {

class WaveMapSystem {
public:
  WaveMapSystem(TargetChart chart, const Coupling& c, const Grid& grid, FdOrder order = FdOrder::fourth)
      : chart_(std::move(chart)), c_(c), grid_(grid), order_(order) {}

  const TargetChart& chart() const { return chart_; }
  const Coupling& coupling() const { return c_; }
  const Grid& grid() const { return grid_; }
  FdOrder fd_order() const { return order_; }

  WaveMapRates rhs(const WaveMapState& s) const {
    check(s);
    const int n = chart_.dim;
    const Matrix px = ddx(grid_, s.phi, order_);
    WaveMapRates r{s.theta, d2dx2(grid_, s.phi, order_)};
    const double tq = 2.0 * c_.lambda * c_.v_y;
    for (int i = 0; i < grid_.N; ++i) {
      const MixedTensor gt = chart_.connection(s.phi.col(i));
      const double* th = s.theta.col(i).data();
      const double* dx = px.col(i).data();
      for (int a = 0; a < n; ++a) {
        double acc = 0.0;
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) {
            const double sym = 0.5 * (gt(a, b, c) + gt(a, c, b));
            const double asym = 0.5 * (gt(a, b, c) - gt(a, c, b));
            acc -= sym * (th[b] * th[c] - dx[b] * dx[c]);
            acc += tq * asym * th[b] * dx[c];
          }
        r.dtheta(a, i) += acc;
      }
    }
    return r;
  }

  void check(const WaveMapState& s) const {
    if (s.phi.rows() != chart_.dim || s.phi.cols() != grid_.N || s.theta.rows() != chart_.dim ||
        s.theta.cols() != grid_.N)
      throw ConfigError("wave map state has the wrong shape");
    for (int i = 0; i < grid_.N; ++i) {
      if (!s.phi.col(i).allFinite() || !s.theta.col(i).allFinite()) {
        std::ostringstream msg;
        msg << "non-finite wave map state at x=" << grid_.x(i) << " (t=" << s.t << ")";
        throw NumericalError(msg.str());
      }
      if (!chart_.valid(s.phi.col(i))) {
        std::ostringstream msg;
        msg << "map left the chart domain (" << chart_.validity_note << ") at x=" << grid_.x(i) << " (t=" << s.t
            << ")";
        throw NumericalError(msg.str());
      }
    }
  }

private:
  TargetChart chart_;
  Coupling c_;
  Grid grid_;
  FdOrder order_;
};

/// E_0 = energy; sup_E = sup |phi_x|, sup_B = sup |phi_t| in the chart metric.
inline DiagnosticsRecord wavemap_diagnostics(const WaveMapSystem& sys, const WaveMapState& s) {
  const auto& grid = sys.grid();
  const auto& chart = sys.chart();
  DiagnosticsRecord r;
  r.t = s.t;
  r.energy_k = {energy_k(s, chart, grid, 0, sys.fd_order()), energy_k(s, chart, grid, 1, sys.fd_order())};
  r.energy = r.energy_k[0];
  const Matrix px = ddx(grid, s.phi, sys.fd_order());
  double se = 0.0, sb = 0.0, dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.N; ++i) {
    const Matrix g = chart.metric(s.phi.col(i));
    const double e2 = px.col(i).dot(g * px.col(i)), b2 = s.theta.col(i).dot(g * s.theta.col(i));
    se = std::max(se, e2);
    sb = std::max(sb, b2);
    dmin = std::min(dmin, 0.5 * (e2 + b2));
  }
  r.sup_E = std::sqrt(se);
  r.sup_B = std::sqrt(sb);
  r.min_energy_density = dmin;
  return r;
}

struct WaveMapRun : RunResult<WaveMapState> {
  std::vector<DiagnosticsRecord> diagnostics;
};

inline double wavemap_sup(const WaveMapState& s) {
  return std::max(s.phi.cwiseAbs().maxCoeff(), s.theta.cwiseAbs().maxCoeff());
}

/// Same contract as evolve() for frame fields. The blow-up ceiling applies to max(|phi|, |theta|).
inline WaveMapRun evolve_wavemap(const WaveMapSystem& sys, const WaveMapState& initial, const RunSettings& settings,
                                 const std::function<void(const WaveMapState&, int)>& observer = {},
                                 const std::function<void(const DiagnosticsRecord&)>& on_record = {}) {
  const Grid& grid = sys.grid();
  WaveMapRun run;
  run.steps = step_count(settings.T, grid.dx(), settings.cfl);
  run.dt = run.steps ? settings.T / run.steps : 0.0;
  sys.check(initial);
  const double sup0 = wavemap_sup(initial);
  const double ceiling =
      settings.ceiling ? *settings.ceiling : settings.ceiling_factor * std::max(sup0, 1.0);
  const int every = std::max(1, settings.diag_every);

  WaveMapState s = initial;
  const double t0 = initial.t;
  run.last_good_time = t0;
  auto accept = [&](int n, bool last) {
    if (observer) observer(s, n);
    if (settings.snapshot_every > 0 && n % settings.snapshot_every == 0 && !last) run.snapshots.push_back(s);
    if (n % every == 0 || last) {
      run.diagnostics.push_back(wavemap_diagnostics(sys, s));
      if (on_record) on_record(run.diagnostics.back());
    }
  };
  accept(0, run.steps == 0);
  for (int n = 1; n <= run.steps; ++n) {
    try {
      WaveMapState next = rk4_step(sys, s, run.dt);
      next.t = t0 + n * run.dt;
      sys.check(next);
      s = std::move(next);
    } catch (const NumericalError& e) {
      run.status = RunStatus::error;
      run.message = e.what();
      run.steps = n - 1;
      break;
    }
    run.last_good_time = s.t;
    const double sup = wavemap_sup(s);
    const bool blowup = sup > ceiling;
    accept(n, blowup || n == run.steps);
    if (blowup) {
      run.status = RunStatus::blowup_suspected;
      run.message = "sup norm " + std::to_string(sup) + " exceeded ceiling " + std::to_string(ceiling);
      run.steps = n;
      break;
    }
  }
  run.final_state = s;
  run.snapshots.push_back(s);
  return run;
}

/// K^a_mu = e^a_A(phi) d_mu phi^A: E from phi_x, B from theta, H = 0.
inline FrameState frame_projection(const WaveMapState& s, const TargetChart& chart, const Grid& grid,
                                   FdOrder order = FdOrder::fourth) {
  if (!chart.coframe) throw CapabilityError("chart '" + chart.name + "' has no closed-form coframe");
  const Matrix px = ddx(grid, s.phi, order);
  FrameState k = FrameState::zero(chart.dim, grid.N, s.t);
  for (int i = 0; i < grid.N; ++i) {
    if (!chart.valid(s.phi.col(i))) throw NumericalError("frame projection outside the chart domain");
    const Matrix e = chart.coframe(s.phi.col(i));
    k.E.col(i) = e * px.col(i);
    k.B.col(i) = e * s.theta.col(i);
  }
  return k;
}

/// Residuals d_t X - rhs_X of the frame equations at the centre of 3 or 5 equally spaced states:
/// the E row is the curl (flatness) identity, the B row the divergence equation, the H row the
/// y-curl identity.
inline FrameRates frame_equation_residuals(std::span<const FrameState> window, const FrameSystem& sys) {
  if (window.size() != 3 && window.size() != 5)
    throw DataError("frame residuals need 3 or 5 consecutive states, got " + std::to_string(window.size()));
  const double dt = window[1].t - window[0].t;
  if (!(dt > 0.0)) throw DataError("states must be strictly increasing in time");
  std::vector<const Matrix*> e, h, b;
  for (const auto& s : window) {
    e.push_back(&s.E);
    h.push_back(&s.H);
    b.push_back(&s.B);
  }
  const FrameRates r = sys.rhs(window[window.size() / 2]);
  return {central_time_derivative(e, dt) - r.dE, central_time_derivative(h, dt) - r.dH,
          central_time_derivative(b, dt) - r.dB};
}

}  // namespace twm
