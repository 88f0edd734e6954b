#pragma once

// Constrained initial data, the 4-stage explicit stepper and the fixed-step
// evolution driver shared by the frame and wave-map formulations.

#include "twm/diagnostics.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace twm {

/// exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside.
inline double bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

/// d/ds of bump(s). Has zero mean, which keeps circle data periodic.
inline double dbump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double q = 1.0 - s * s;
  return -2.0 * s / (q * q) * bump(s);
}

enum class BumpShape { bump, dbump };

struct Bump {
  int component = 0;  // 0-based Lie algebra index
  double center = 0.0;
  double width = 1.0;
  double amplitude = 0.0;
  BumpShape shape = BumpShape::bump;
};

struct FrameProfile {
  std::vector<Bump> E;
  std::vector<Bump> B;
  Vector H0;
  /// Absolute floor for the circle periodicity check of H.
  double periodicity_tol = 1e-10;
};

/// Superposition of bumps at x. On the circle the distance to each centre is wrapped.
inline Vector evaluate_profile(const std::vector<Bump>& bumps, int n, double x, const Grid& grid) {
  Vector v = Vector::Zero(n);
  for (const auto& b : bumps) {
    double d = x - b.center;
    if (grid.periodic()) d -= grid.L * std::round(d / grid.L);
    const double s = d / b.width;
    v(b.component) += b.amplitude * (b.shape == BumpShape::bump ? bump(s) : dbump(s));
  }
  return v;
}

namespace detail {

inline void validate_bumps(const std::vector<Bump>& bumps, int n, const Grid& grid, const char* field) {
  for (const auto& b : bumps) {
    if (b.component < 0 || b.component >= n)
      throw ConfigError(std::string("initial_data.") + field + ": component out of range");
    if (!(b.width > 0.0)) throw ConfigError(std::string("initial_data.") + field + ": width must be positive");
    if (grid.periodic() && 2.0 * b.width >= grid.L)
      throw ConfigError(std::string("initial_data.") + field + ": bump wider than the circle");
  }
}

/// H at every grid point (and at x0 + L on the circle) from the constraint ODE
/// dH/dx = -[E, H - R], classic RK4 with `sub` substeps per cell and exact E at the stages.
inline Matrix integrate_constraint(const FrameProfile& prof, const LieAlgebraSpec& alg, const Vector& R,
                                   const Grid& grid, int sub) {
  const int n = alg.dim;
  const int cells = grid.periodic() ? grid.N : grid.N - 1;
  Matrix H(n, cells + 1);
  Vector h = prof.H0;
  H.col(0) = h;
  const double dx = grid.dx() / sub;
  auto f = [&](double x, const Vector& hh) -> Vector {
    return -commutator(alg, evaluate_profile(prof.E, n, x, grid), hh - R);
  };
  for (int i = 0; i < cells; ++i) {
    for (int k = 0; k < sub; ++k) {
      const double x = grid.x(i) + k * dx;
      const Vector k1 = f(x, h);
      const Vector k2 = f(x + 0.5 * dx, h + 0.5 * dx * k1);
      const Vector k3 = f(x + 0.5 * dx, h + 0.5 * dx * k2);
      const Vector k4 = f(x + dx, h + dx * k3);
      h += dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    H.col(i + 1) = h;
  }
  return H;
}

}  // namespace detail

/// Grid data satisfying the constraint: E, B from the profile, H from the constraint ODE.
/// On the circle the integrated H must return to H0 after one turn.
inline FrameState make_initial_data(const FrameProfile& prof, const LieAlgebraSpec& alg, const Coupling& c,
                                    const Grid& grid) {
  const int n = alg.dim;
  if (prof.H0.size() != n) throw ConfigError("initial_data.H0 must have one entry per algebra dimension");
  detail::validate_bumps(prof.E, n, grid, "E");
  detail::validate_bumps(prof.B, n, grid, "B");
  const Vector R = c.R.R.size() ? c.R.R : Vector::Zero(n);
  FrameState s = FrameState::zero(n, grid.N, 0.0);
  for (int i = 0; i < grid.N; ++i) {
    s.E.col(i) = evaluate_profile(prof.E, n, grid.x(i), grid);
    s.B.col(i) = evaluate_profile(prof.B, n, grid.x(i), grid);
  }
  const Matrix H = detail::integrate_constraint(prof, alg, R, grid, 1);
  s.H = H.leftCols(grid.N);
  if (grid.periodic()) {
    const Matrix fine = detail::integrate_constraint(prof, alg, R, grid, 2);
    const double err_est = (H.col(grid.N) - fine.col(grid.N)).cwiseAbs().maxCoeff();
    const double mismatch = (H.col(grid.N) - prof.H0).cwiseAbs().maxCoeff();
    const double tol = std::max(prof.periodicity_tol * std::max(1.0, prof.H0.cwiseAbs().maxCoeff()), 10.0 * err_est);
    if (mismatch > tol)
      throw DataError("constraint monodromy: H(x0 + L) differs from H0 by " + std::to_string(mismatch) +
                      "; on the circle use E along a single Lie algebra direction with zero-mean profile "
                      "(shape dbump), or a line_compact grid");
  }
  return s;
}

enum class RunStatus { ok, blowup_suspected, error };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::blowup_suspected: return "blowup_suspected";
    default: return "error";
  }
}

inline constexpr double kMaxCfl = 0.9;

inline void check_cfl(double dt, double dx, double cfl) {
  if (!(cfl > 0.0) || cfl > kMaxCfl) throw ConfigError("run.cfl must lie in (0, 0.9]");
  if (std::abs(dt) > cfl * dx * (1.0 + 1e-12))
    throw ConfigError("time step " + std::to_string(dt) + " violates CFL limit " + std::to_string(cfl * dx));
}

/// One classic RK4 step for any system exposing rhs(state) and a matching advanced(state, rates, a).
template <class System, class State>
State rk4_step(const System& sys, const State& s, double dt) {
  const auto k1 = sys.rhs(s);
  const auto k2 = sys.rhs(advanced(s, k1, 0.5 * dt));
  const auto k3 = sys.rhs(advanced(s, k2, 0.5 * dt));
  const auto k4 = sys.rhs(advanced(s, k3, dt));
  State out = advanced(s, k1, dt / 6.0);
  out = advanced(out, k2, dt / 3.0);
  out = advanced(out, k3, dt / 3.0);
  out = advanced(out, k4, dt / 6.0);
  out.t = s.t + dt;
  return out;
}

inline FrameState step(const FrameSystem& sys, const FrameState& s, double dt, double cfl = 0.5) {
  check_cfl(dt, sys.grid().dx(), cfl);
  return rk4_step(sys, s, dt);
}

struct RunSettings {
  double T = 0.0;
  double cfl = 0.5;
  /// Diagnostics record every this many steps (the final step is always recorded).
  int diag_every = 1;
  /// Stored snapshot every this many steps; 0 keeps only the final state.
  int snapshot_every = 0;
  /// Sup-norm ceiling as a multiple of the initial sup norm.
  double ceiling_factor = 1e6;
  /// Absolute ceiling; overrides the factor when set.
  std::optional<double> ceiling;
  /// Order of the time differences in the streamed null residuals (2 or 4).
  int null_time_order = 4;
};

inline int step_count(double T, double dx, double cfl) {
  if (!(T >= 0.0)) throw ConfigError("run.T must be non-negative");
  if (!(cfl > 0.0) || cfl > kMaxCfl) throw ConfigError("run.cfl must lie in (0, 0.9]");
  if (T == 0.0) return 0;
  return static_cast<int>(std::ceil(T / (cfl * dx) - 1e-9));
}

template <class State>
struct RunResult {
  RunStatus status = RunStatus::ok;
  std::string message;
  double last_good_time = 0.0;
  double dt = 0.0;
  int steps = 0;
  State final_state;
  std::vector<State> snapshots;
};

struct FrameRun : RunResult<FrameState> {
  std::vector<DiagnosticsRecord> diagnostics;
};

/// Derivative of equally spaced samples at position `k` of `f` (size m >= 2), using the widest
/// centred stencil allowed by `order` and the available neighbours, one-sided at the ends.
inline Matrix sample_time_derivative(const std::vector<const Matrix*>& f, int k, double dt, int order) {
  const int m = static_cast<int>(f.size());
  if (m < 2) return Matrix::Zero(f[0]->rows(), f[0]->cols());
  if (m == 2) return (*f[1] - *f[0]) / dt;
  if (order >= 4 && k >= 2 && k + 2 < m)
    return (-*f[k + 2] + 8.0 * *f[k + 1] - 8.0 * *f[k - 1] + *f[k - 2]) / (12.0 * dt);
  if (k >= 1 && k + 1 < m) return (*f[k + 1] - *f[k - 1]) / (2.0 * dt);
  if (k == 0) return (-3.0 * *f[0] + 4.0 * *f[1] - *f[2]) / (2.0 * dt);
  return (3.0 * *f[m - 1] - 4.0 * *f[m - 2] + *f[m - 3]) / (2.0 * dt);
}

/// Streams diagnostics records; the null residuals of step n are completed once the
/// neighbouring steps have arrived (or at finish()).
class DiagnosticsStream {
public:
  using Sink = std::function<void(const DiagnosticsRecord&)>;

  DiagnosticsStream(const FrameSystem& sys, double dt, int every, int time_order, Sink sink)
      : sys_(sys), dt_(dt), every_(std::max(1, every)), order_(time_order), sink_(std::move(sink)) {}

  void push(const FrameState& s, int step, bool final_step) {
    Entry e;
    e.step = step;
    const auto nc = null_components(s, sys_.geometry(), sys_.coupling());
    e.comps.resize(4, s.points());
    e.comps << nc.ll, nc.nn, nc.ln, nc.nl;
    if (step % every_ == 0 || final_step) e.record = instantaneous_diagnostics(sys_, s);
    buf_.push_back(std::move(e));
    const int reach = order_ >= 4 ? 2 : 1;
    // the entry `reach` steps back now has all of its neighbours
    const int ready = static_cast<int>(buf_.size()) - 1 - reach;
    if (ready >= 0) emit(ready);
    while (static_cast<int>(buf_.size()) > 2 * reach + 1) buf_.pop_front();
  }

  /// Emits the pending tail with one-sided stencils.
  void finish() {
    const int reach = order_ >= 4 ? 2 : 1;
    const int n = static_cast<int>(buf_.size());
    for (int k = std::max(0, n - reach); k < n; ++k) emit(k);
    // runs shorter than the stencil: early entries were never completed
    buf_.clear();
  }

private:
  struct Entry {
    int step = 0;
    Matrix comps;
    std::optional<DiagnosticsRecord> record;
    bool emitted = false;
  };

  void emit(int k) {
    Entry& e = buf_[k];
    if (e.emitted) return;
    e.emitted = true;
    if (!e.record) return;
    std::vector<const Matrix*> f;
    for (const auto& b : buf_) f.push_back(&b.comps);
    DiagnosticsRecord r = *e.record;
    if (f.size() >= 2) {
      const Matrix dt_c = sample_time_derivative(f, k, dt_, order_);
      const Matrix dx_c = ddx(sys_.grid(), e.comps, sys_.fd_order());
      const Eigen::RowVectorXd ll =
          0.5 * (-dt_c.row(0) + dx_c.row(0)) + 0.5 * (dt_c.row(3) + dx_c.row(3));
      const Eigen::RowVectorXd nn = 0.5 * (dt_c.row(1) + dx_c.row(1)) + 0.5 * (-dt_c.row(2) + dx_c.row(2));
      r.null_residual_ll = ll.cwiseAbs().maxCoeff();
      r.null_residual_nn = nn.cwiseAbs().maxCoeff();
    }
    sink_(r);
  }

  const FrameSystem& sys_;
  double dt_;
  int every_;
  int order_;
  Sink sink_;
  std::deque<Entry> buf_;
};

/// Largest pointwise g-norm over E, H, B.
inline double frame_sup(const FrameSystem& sys, const FrameState& s) {
  const auto& g = sys.geometry();
  return std::max({sup_norm(g, s.E), sup_norm(g, s.H), sup_norm(g, s.B)});
}

/// Fixed-step evolution to settings.T. Never throws for numerical trouble: non-finite values
/// end the run with status error, a sup norm above the ceiling with blowup_suspected.
/// `observer` sees every accepted state (including the initial one) with its step index.
inline FrameRun evolve(const FrameSystem& sys, const FrameState& initial, const RunSettings& settings,
                       const std::function<void(const FrameState&, int)>& observer = {},
                       const DiagnosticsStream::Sink& on_record = {}) {
  const Grid& grid = sys.grid();
  FrameRun run;
  run.steps = step_count(settings.T, grid.dx(), settings.cfl);
  run.dt = run.steps ? settings.T / run.steps : 0.0;
  if (run.steps) check_cfl(run.dt, grid.dx(), settings.cfl);
  sys.check_finite(initial);

  DiagnosticsStream diag(sys, run.dt, settings.diag_every, settings.null_time_order, [&](const DiagnosticsRecord& r) {
    run.diagnostics.push_back(r);
    if (on_record) on_record(r);
  });
  const double sup0 = frame_sup(sys, initial);
  const double ceiling = settings.ceiling ? *settings.ceiling : settings.ceiling_factor * std::max(sup0, 1e-300);

  FrameState s = initial;
  const double t0 = initial.t;
  run.last_good_time = t0;
  auto accept = [&](int n, bool last) {
    if (observer) observer(s, n);
    if (settings.snapshot_every > 0 && n % settings.snapshot_every == 0 && !last) run.snapshots.push_back(s);
    diag.push(s, n, last);
  };
  accept(0, run.steps == 0);
  for (int n = 1; n <= run.steps; ++n) {
    try {
      FrameState next = rk4_step(sys, s, run.dt);
      next.t = t0 + n * run.dt;
      sys.check_finite(next);
      s = std::move(next);
    } catch (const NumericalError& e) {
      run.status = RunStatus::error;
      run.message = e.what();
      run.steps = n - 1;
      break;
    }
    run.last_good_time = s.t;
    const double sup = frame_sup(sys, s);
    const bool blowup = sup > ceiling;
    accept(n, blowup || n == run.steps);
    if (blowup) {
      run.status = RunStatus::blowup_suspected;
      run.message = "sup norm " + std::to_string(sup) + " exceeded ceiling " + std::to_string(ceiling) +
                    " at t=" + std::to_string(s.t);
      run.steps = n;
      break;
    }
  }
  diag.finish();
  run.final_state = s;
  run.snapshots.push_back(s);
  return run;
}

}  // namespace twm
