#pragma once

// Run orchestration: single simulations with their run directory, convergence studies
// over successively refined grids, and concurrent parameter sweeps.

#include "twm/io.hpp"
#include "twm/wavemap_solver.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace twm {

struct SimulationSummary {
  RunStatus status = RunStatus::ok;
  std::string message;
  double last_good_time = 0.0;
  int steps = 0;
  double dt = 0.0;
  /// max_t |E(t) - E(0)| / max(|E(0)|, 1e-300)
  double energy_drift = 0.0;
  double final_sup_E = 0.0, final_sup_H = 0.0, final_sup_B = 0.0;
  /// Largest of sup_E, sup_H, sup_B over records with t <= early_time, and after it.
  double sup_max_early = 0.0, sup_max_late = 0.0;
  double max_constraint = 0.0;
  double max_null_residual = 0.0;
  std::vector<DiagnosticsRecord> records;
  FrameState final_frame;
  WaveMapState final_wavemap;
};

inline WaveMapState make_wavemap_data(const WaveMapProfile& prof, const Grid& grid, int n) {
  WaveMapState s{0.0, Matrix::Zero(n, grid.N), Matrix::Zero(n, grid.N)};
  for (int i = 0; i < grid.N; ++i) {
    s.phi.col(i) = prof.phi0 + evaluate_profile(prof.phi, n, grid.x(i), grid);
    s.theta.col(i) = evaluate_profile(prof.theta, n, grid.x(i), grid);
  }
  return s;
}

inline FrameSystem make_frame_system(const RunConfig& cfg) {
  return FrameSystem(cfg.alg, cfg.geom, cfg.coupling, cfg.grid, cfg.order);
}

inline WaveMapSystem make_wavemap_system(const RunConfig& cfg) {
  return WaveMapSystem(builtin_chart(cfg.chart), cfg.coupling, cfg.grid, cfg.order);
}

namespace detail {

inline void summarize(SimulationSummary& s, double early_time) {
  if (s.records.empty()) return;
  const double e0 = s.records.front().energy;
  for (const auto& r : s.records) {
    s.energy_drift = std::max(s.energy_drift, std::abs(r.energy - e0) / std::max(std::abs(e0), 1e-300));
    const double sup = std::max({r.sup_E, r.sup_H, r.sup_B});
    (r.t <= early_time ? s.sup_max_early : s.sup_max_late) =
        std::max(r.t <= early_time ? s.sup_max_early : s.sup_max_late, sup);
    s.max_constraint = std::max(s.max_constraint, r.max_constraint);
    s.max_null_residual = std::max(s.max_null_residual, r.null_conservation_residual());
  }
  const auto& last = s.records.back();
  s.final_sup_E = last.sup_E;
  s.final_sup_H = last.sup_H;
  s.final_sup_B = last.sup_B;
}

}  // namespace detail

/// Runs one configuration. With `out`, writes config.json, diagnostics.ndjson, snapshots and
/// manifest.json there (the manifest last, atomically). Configuration problems throw ConfigError;
/// numerical trouble is reported through the summary status.
inline SimulationSummary simulate(const RunConfig& cfg, const std::optional<fs::path>& out = std::nullopt,
                                  double early_time = 10.0) {
  check_gates(cfg);
  RunManifest manifest;
  manifest.config_hash = cfg.hash();
  manifest.start_time = utc_now();
  std::ofstream diag_out;
  if (out) {
    fs::create_directories(*out);
    write_atomically(*out / "config.json", cfg.raw.dump(2) + "\n");
    diag_out.open(*out / "diagnostics.ndjson");
    if (!diag_out) throw ConfigError("cannot write to output directory '" + out->string() + "'");
    manifest.outputs = {"config.json", "diagnostics.ndjson"};
  }
  auto on_record = [&](const DiagnosticsRecord& r) {
    if (out) diag_out << to_json(r).dump() << '\n';
  };
  auto snapshot_name = [&](double t) { return "snapshot_" + time_tag(t) + ".csv"; };

  SimulationSummary sum;
  if (cfg.formulation == "frame") {
    const FrameSystem sys = make_frame_system(cfg);
    const FrameState s0 = make_initial_data(cfg.profile, cfg.alg, cfg.coupling, cfg.grid);
    RunSettings rs = cfg.run;
    const int stride = rs.snapshot_every;
    rs.snapshot_every = 0;  // written from the observer instead of being held in memory
    auto observer = [&](const FrameState& s, int n) {
      if (out && stride > 0 && n % stride == 0) {
        write_frame_snapshot(*out / snapshot_name(s.t), s, cfg.grid);
        manifest.outputs.push_back(snapshot_name(s.t));
      }
    };
    FrameRun run = evolve(sys, s0, rs, observer, on_record);
    if (out && (stride == 0 || run.steps % stride != 0)) {
      write_frame_snapshot(*out / snapshot_name(run.final_state.t), run.final_state, cfg.grid);
      manifest.outputs.push_back(snapshot_name(run.final_state.t));
    }
    sum.status = run.status;
    sum.message = run.message;
    sum.last_good_time = run.last_good_time;
    sum.steps = run.steps;
    sum.dt = run.dt;
    sum.records = std::move(run.diagnostics);
    sum.final_frame = std::move(run.final_state);
  } else {
    const WaveMapSystem sys = make_wavemap_system(cfg);
    const WaveMapState s0 = make_wavemap_data(cfg.wave_profile, cfg.grid, sys.chart().dim);
    RunSettings rs = cfg.run;
    const int stride = rs.snapshot_every;
    rs.snapshot_every = 0;
    auto observer = [&](const WaveMapState& s, int n) {
      if (out && stride > 0 && n % stride == 0) {
        write_wavemap_snapshot(*out / snapshot_name(s.t), s, cfg.grid);
        manifest.outputs.push_back(snapshot_name(s.t));
      }
    };
    WaveMapRun run = evolve_wavemap(sys, s0, rs, observer, on_record);
    if (out && (stride == 0 || run.steps % stride != 0)) {
      write_wavemap_snapshot(*out / snapshot_name(run.final_state.t), run.final_state, cfg.grid);
      manifest.outputs.push_back(snapshot_name(run.final_state.t));
    }
    sum.status = run.status;
    sum.message = run.message;
    sum.last_good_time = run.last_good_time;
    sum.steps = run.steps;
    sum.dt = run.dt;
    sum.records = std::move(run.diagnostics);
    sum.final_wavemap = std::move(run.final_state);
  }
  detail::summarize(sum, early_time);
  if (out) {
    diag_out.close();
    manifest.end_time = utc_now();
    manifest.status = sum.status;
    manifest.message = sum.message;
    manifest.last_good_time = sum.last_good_time;
    manifest.steps = sum.steps;
    manifest.dt = sum.dt;
    manifest.outputs.push_back("manifest.json");
    write_atomically(*out / "manifest.json", manifest.to_json().dump(2) + "\n");
  }
  return sum;
}

/// Same configuration on a refined grid (h -> h / 2^k).
inline RunConfig refined_config(const RunConfig& base, int k) {
  json j = base.raw;
  int N = base.grid.N;
  for (int q = 0; q < k; ++q) N = base.grid.periodic() ? 2 * N : 2 * N - 1;
  j["grid"]["N"] = N;
  if (!j["grid"].contains("kind")) j["grid"]["kind"] = to_string(base.grid.kind);
  RunConfig cfg = parse_config(j, base.seed);
  return cfg;
}

/// d'Alembert solution of the abelian, lambda = 0 system for the configured profile.
inline FrameState exact_abelian_solution(const RunConfig& cfg, double t) {
  const int n = cfg.alg.dim;
  FrameState s = FrameState::zero(n, cfg.grid.N, t);
  for (int i = 0; i < cfg.grid.N; ++i) {
    const double x = cfg.grid.x(i);
    const Vector ep = evaluate_profile(cfg.profile.E, n, x + t, cfg.grid), bp = evaluate_profile(cfg.profile.B, n, x + t, cfg.grid);
    const Vector em = evaluate_profile(cfg.profile.E, n, x - t, cfg.grid), bm = evaluate_profile(cfg.profile.B, n, x - t, cfg.grid);
    s.E.col(i) = 0.5 * ((ep + bp) + (em - bm));
    s.B.col(i) = 0.5 * ((ep + bp) - (em - bm));
    s.H.col(i) = cfg.profile.H0;
  }
  return s;
}

struct ConvergenceQuantity {
  std::string name;
  std::vector<double> values;  // one per level (or per level pair for differences)
  std::vector<double> orders;
};

struct ConvergenceReport {
  std::vector<int> N;
  std::vector<ConvergenceQuantity> quantities;
  bool exact = false;

  const ConvergenceQuantity* find(const std::string& name) const {
    for (const auto& q : quantities)
      if (q.name == name) return &q;
    return nullptr;
  }
};

inline std::vector<double> observed_orders(const std::vector<double>& v) {
  std::vector<double> o;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) o.push_back(std::log2(v[k] / v[k + 1]));
  return o;
}

namespace detail {

/// Coarse-grid restriction: every 2^k-th point.
inline Matrix restrict_cols(const Matrix& m, int k) {
  const int stride = 1 << k;
  const int n = static_cast<int>((m.cols() - 1) / stride) + 1;
  Matrix out(m.rows(), n);
  for (int i = 0; i < n; ++i) out.col(i) = m.col(i * stride);
  return out;
}

inline Matrix stack(std::initializer_list<const Matrix*> ms, int k) {
  int rows = 0;
  for (auto* m : ms) rows += static_cast<int>(m->rows());
  Matrix first = restrict_cols(**ms.begin(), k);
  Matrix out(rows, first.cols());
  int r = 0;
  for (auto* m : ms) {
    const Matrix c = restrict_cols(*m, k);
    out.block(r, 0, c.rows(), c.cols()) = c;
    r += static_cast<int>(c.rows());
  }
  return out;
}

}  // namespace detail

/// Runs `levels` (>= 3) successively refined copies of `base` and reports observed orders of the
/// solution error (against the exact solution for abelian lambda = 0 frame runs, otherwise between
/// neighbouring levels), the constraint residual and the streamed null residuals. Residual maxima
/// skip the first and last 5% of the run, where the streamed time differences are one-sided.
inline ConvergenceReport run_convergence(const RunConfig& base, int levels) {
  if (levels < 3) throw ConfigError("convergence needs at least 3 levels");
  ConvergenceReport rep;
  std::vector<Matrix> finals;
  ConvergenceQuantity constraint{"max_constraint", {}, {}}, null_res{"null_conservation_residual", {}, {}};
  const bool frame = base.formulation == "frame";
  rep.exact = frame && base.alg.C.max_abs() == 0.0 && base.coupling.lambda == 0.0;
  ConvergenceQuantity err{rep.exact ? "solution_error_vs_exact" : "solution_self_difference", {}, {}};
  const double T = base.run.T;
  for (int k = 0; k < levels; ++k) {
    const RunConfig cfg = refined_config(base, k);
    rep.N.push_back(cfg.grid.N);
    const SimulationSummary s = simulate(cfg);
    if (s.status != RunStatus::ok)
      throw NumericalError("convergence level N=" + std::to_string(cfg.grid.N) + " ended with status " +
                           to_string(s.status) + ": " + s.message);
    const int down = k;
    if (frame) {
      if (rep.exact) {
        const FrameState ex = exact_abelian_solution(cfg, s.final_frame.t);
        const Matrix d = detail::stack({&s.final_frame.E, &s.final_frame.H, &s.final_frame.B}, 0) -
                         detail::stack({&ex.E, &ex.H, &ex.B}, 0);
        err.values.push_back(d.cwiseAbs().maxCoeff());
      } else {
        finals.push_back(detail::stack({&s.final_frame.E, &s.final_frame.H, &s.final_frame.B}, down));
      }
      double c = 0.0, nr = 0.0;
      for (const auto& r : s.records) {
        c = std::max(c, r.max_constraint);
        if (r.t > 0.05 * T && r.t < 0.95 * T) nr = std::max(nr, r.null_conservation_residual());
      }
      constraint.values.push_back(c);
      null_res.values.push_back(nr);
    } else {
      finals.push_back(detail::stack({&s.final_wavemap.phi, &s.final_wavemap.theta}, down));
    }
  }
  if (!rep.exact)
    for (std::size_t k = 0; k + 1 < finals.size(); ++k) err.values.push_back((finals[k] - finals[k + 1]).cwiseAbs().maxCoeff());
  err.orders = observed_orders(err.values);
  rep.quantities.push_back(err);
  if (frame) {
    constraint.orders = observed_orders(constraint.values);
    null_res.orders = observed_orders(null_res.values);
    rep.quantities.push_back(constraint);
    rep.quantities.push_back(null_res);
  }
  return rep;
}

/// Unbounded multi-producer queue; the aggregator pops until every producer has finished.
template <class T>
class Channel {
public:
  void send(T value) {
    {
      std::lock_guard lock(m_);
      q_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  T receive() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

struct SweepRow {
  int index = 0;
  std::vector<json> axis_values;
  SimulationSummary summary;
  std::string error;  // configuration or I/O failure of this row
};

/// Cross product of the axes in row-major order (last axis fastest).
inline std::vector<std::vector<json>> sweep_points(const std::vector<SweepAxis>& axes) {
  std::vector<std::vector<json>> pts{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<json>> next;
    for (const auto& p : pts)
      for (const auto& v : ax.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

/// Runs every point of the sweep on `threads` workers. Rows come back through a channel and are
/// returned sorted by index, so the table does not depend on the number of workers.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, int threads, const std::optional<fs::path>& out,
                                       double early_time = 10.0) {
  const auto pts = sweep_points(base.axes);
  if (static_cast<int>(pts.size()) > base.max_runs)
    throw ConfigError("sweep has " + std::to_string(pts.size()) + " runs, above sweep.max_runs = " +
                      std::to_string(base.max_runs));
  json stripped = base.raw;
  stripped.erase("sweep");
  Channel<SweepRow> results;
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < static_cast<int>(pts.size()); i = next++) {
      SweepRow row;
      row.index = i;
      row.axis_values = pts[i];
      try {
        json j = stripped;
        for (std::size_t a = 0; a < base.axes.size(); ++a) set_by_path(j, base.axes[a].key, pts[i][a]);
        const RunConfig cfg = parse_config(j, base.seed);
        std::optional<fs::path> dir;
        if (out) {
          char name[32];
          std::snprintf(name, sizeof name, "run_%04d", i);
          dir = *out / name;
        }
        row.summary = simulate(cfg, dir, early_time);
      } catch (const Error& e) {
        row.error = e.what();
        row.summary.status = RunStatus::error;
        row.summary.message = e.what();
      }
      results.send(std::move(row));
    }
  };
  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(pts.size())));
  std::vector<SweepRow> rows(pts.size());
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      SweepRow r = results.receive();
      const int idx = r.index;
      rows[idx] = std::move(r);
    }
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const RunConfig& base, const std::vector<SweepRow>& rows) {
  out << std::setprecision(17) << "index";
  for (const auto& ax : base.axes) out << ',' << ax.key;
  out << ",status,steps,final_sup_E,final_sup_H,final_sup_B,sup_max_early,sup_max_late,energy_drift,"
         "last_good_time,message\n";
  for (const auto& r : rows) {
    out << r.index;
    for (const auto& v : r.axis_values) out << ',' << v.dump();
    const auto& s = r.summary;
    std::string msg = s.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out << ',' << to_string(s.status) << ',' << s.steps << ',' << s.final_sup_E << ',' << s.final_sup_H << ','
        << s.final_sup_B << ',' << s.sup_max_early << ',' << s.sup_max_late << ',' << s.energy_drift << ','
        << s.last_good_time << ',' << msg << '\n';
  }
}

}  // namespace twm
