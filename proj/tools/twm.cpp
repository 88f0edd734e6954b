// twm: command line front end.
//
// Exit codes: 0 ok, 1 configuration error, 2 numerical error, 3 blow-up suspected.

#include "twm/run.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace twm;

namespace {

struct Globals {
  std::string out;
  std::optional<std::uint64_t> seed;
  bool allow_large_lambda = false;
  int threads = 0;
};

int exit_code(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return 0;
    case RunStatus::blowup_suspected: return 3;
    default: return 2;
  }
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

void apply_global_env(Globals& g) {
  if (g.out.empty()) g.out = env_or("TWM_OUT", "");
  if (!g.seed) {
    const std::string s = env_or("TWM_SEED", "");
    if (!s.empty()) {
      try {
        g.seed = std::stoull(s);
      } catch (const std::exception&) {
        throw ConfigError("TWM_SEED must be a non-negative integer");
      }
    }
  }
  if (!g.allow_large_lambda) {
    const std::string s = detail::lower(env_or("TWM_ALLOW_LARGE_LAMBDA", ""));
    g.allow_large_lambda = s == "1" || s == "true" || s == "yes";
  }
  if (g.threads == 0) {
    const std::string s = env_or("TWM_THREADS", "");
    g.threads = s.empty() ? 0 : std::stoi(s);
  }
}

RunConfig load_config(const std::string& path, const Globals& g, const std::string& formulation = "") {
  json j = load_json(path);
  apply_env_overrides(j, process_env());
  if (!formulation.empty()) j["run"]["formulation"] = formulation;
  if (g.allow_large_lambda) j["run"]["allow_large_lambda"] = true;
  return parse_config(j, g.seed);
}

fs::path require_out(const std::string& out, const char* what) {
  if (out.empty()) throw ConfigError(std::string(what) + " needs --out (or TWM_OUT)");
  return out;
}

void print_status(const SimulationSummary& s) {
  std::cout << "status: " << to_string(s.status) << "\n"
            << "steps: " << s.steps << " dt: " << s.dt << "\n"
            << "relative energy drift: " << s.energy_drift << "\n"
            << "max constraint residual: " << s.max_constraint << "\n";
  if (!s.message.empty()) std::cout << "message: " << s.message << "\n";
  if (s.status == RunStatus::error) std::cout << "last good time: " << s.last_good_time << "\n";
}

int cmd_algebra(const std::string& config, const Globals& g) {
  const RunConfig cfg = load_config(config, g);
  if (cfg.formulation != "frame") throw ConfigError("algebra check needs an algebra target (run.formulation = frame)");
  std::optional<std::pair<Vector, Vector>> pair;
  const json jp = cfg.raw.value("geometry", json::object()).value("p", json::object());
  if (jp.value("kind", "") == "commuting_pair")
    pair = std::make_pair(detail::get_vector(jp, "geometry.p", "pvec", cfg.alg.dim),
                          detail::get_vector(jp, "geometry.p", "qvec", cfg.alg.dim));
  const auto lines = algebra_report(cfg.alg, cfg.geom, cfg.coupling.R.R, pair);
  std::cout << std::setprecision(6) << "check,value,limit,relation,ok\n";
  bool ok = true;
  for (const auto& l : lines) {
    std::cout << l.name << ',' << l.value << ',' << l.limit << ',' << (l.upper_bound ? "<=" : ">") << ','
              << (l.ok() ? "yes" : "no") << '\n';
    ok = ok && l.ok();
  }
  std::cout << "lambda_max(v_t=" << cfg.coupling.v_t << ")," << lambda_max(cfg.geom, cfg.coupling.v_t) << ",,,\n";
  return ok ? 0 : 2;
}

int cmd_simulate(const std::string& config, const std::string& formulation, const Globals& g) {
  const RunConfig cfg = load_config(config, g, formulation);
  const fs::path out = require_out(g.out, "simulate");
  const SimulationSummary s = simulate(cfg, out);
  print_status(s);
  std::cout << "output: " << out.string() << "\n";
  return exit_code(s.status);
}

/// Recomputes diagnostics from stored snapshots and compares them with the streamed records.
int cmd_analyze(const std::string& run_dir, const Globals& g) {
  const fs::path dir = run_dir;
  json raw = read_json_file(dir / "config.json");
  const RunConfig cfg = parse_config(raw, g.seed);
  const json manifest = read_json_file(dir / "manifest.json");
  const double dt = manifest.value("dt", 0.0);
  const auto streamed = read_diagnostics(dir / "diagnostics.ndjson");
  const auto snaps = list_snapshots(dir);
  if (snaps.empty()) throw DataError("no snapshots in " + dir.string());

  auto match = [&](double t) -> const DiagnosticsRecord* {
    for (const auto& r : streamed)
      if (std::abs(r.t - t) <= 1e-8 * std::max(1.0, std::abs(t))) return &r;
    return nullptr;
  };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); };

  std::ofstream out(dir / "analysis.ndjson");
  double worst = 0.0;
  int compared = 0, null_compared = 0;
  if (cfg.formulation == "frame") {
    const FrameSystem sys = make_frame_system(cfg);
    std::vector<FrameState> states;
    for (const auto& [t, path] : snaps) states.push_back(read_frame_snapshot(path, t));
    // restore exact times from the streamed records where possible
    for (auto& s : states)
      if (const auto* r = match(s.t)) s.t = r->t;
    for (std::size_t k = 0; k < states.size(); ++k) {
      DiagnosticsRecord rec = instantaneous_diagnostics(sys, states[k]);
      // null residuals where five consecutive solver steps are stored
      bool have_null = false;
      if (k >= 2 && k + 2 < states.size() && dt > 0.0) {
        bool consecutive = true;
        for (std::size_t q = k - 2; q < k + 2; ++q)
          consecutive = consecutive && std::abs(states[q + 1].t - states[q].t - dt) < 1e-7 * std::max(1.0, dt);
        if (consecutive) {
          std::vector<FrameState> w(states.begin() + (k - 2), states.begin() + (k + 3));
          for (std::size_t q = 0; q < w.size(); ++q) w[q].t = states[k].t + (static_cast<double>(q) - 2.0) * dt;
          const auto nr = null_conservation_residual(std::span<const FrameState>(w), cfg.geom, cfg.coupling, cfg.grid,
                                                     cfg.order);
          rec.null_residual_ll = nr.ll.cwiseAbs().maxCoeff();
          rec.null_residual_nn = nr.nn.cwiseAbs().maxCoeff();
          have_null = true;
        }
      }
      json line = to_json(rec);
      if (const auto* r = match(states[k].t)) {
        double m = std::max({rel(rec.energy, r->energy), rel(rec.energy_k[0], r->energy_k[0]),
                             rel(rec.energy_k[1], r->energy_k[1]), rel(rec.sup_E, r->sup_E), rel(rec.sup_H, r->sup_H),
                             rel(rec.sup_B, r->sup_B), rel(rec.min_energy_density, r->min_energy_density)});
        const double cscale = std::max(1e-12, std::abs(r->max_constraint));
        m = std::max(m, std::abs(rec.max_constraint - r->max_constraint) / std::max(cscale, 1e-10));
        if (have_null && cfg.run.null_time_order == 4 && std::isfinite(r->null_residual_ll)) {
          const double ns = std::max({std::abs(r->null_residual_ll), std::abs(r->null_residual_nn), 1e-10});
          m = std::max(m, std::max(std::abs(rec.null_residual_ll - r->null_residual_ll),
                                   std::abs(rec.null_residual_nn - r->null_residual_nn)) / ns);
          ++null_compared;
        }
        line["streamed_max_relative_mismatch"] = m;
        worst = std::max(worst, m);
        ++compared;
      }
      out << line.dump() << '\n';
    }
  } else {
    const WaveMapSystem sys = make_wavemap_system(cfg);
    for (const auto& [t, path] : snaps) {
      WaveMapState s = read_wavemap_snapshot(path, t);
      if (const auto* r = match(t)) s.t = r->t;
      DiagnosticsRecord rec = wavemap_diagnostics(sys, s);
      json line = to_json(rec);
      if (const auto* r = match(t)) {
        const double m = std::max({rel(rec.energy, r->energy), rel(rec.energy_k[1], r->energy_k[1]),
                                   rel(rec.sup_E, r->sup_E), rel(rec.sup_B, r->sup_B)});
        line["streamed_max_relative_mismatch"] = m;
        worst = std::max(worst, m);
        ++compared;
      }
      out << line.dump() << '\n';
    }
  }
  std::cout << "snapshots analyzed: " << snaps.size() << "\n"
            << "matched streamed records: " << compared << " (null residuals compared: " << null_compared << ")\n"
            << "max relative mismatch: " << worst << "\n"
            << "consistent: " << (worst <= 1e-8 ? "yes" : "no") << "\n"
            << "output: " << (dir / "analysis.ndjson").string() << "\n";
  return worst <= 1e-8 ? 0 : 2;
}

int cmd_reconstruct(const std::string& run_dir, const Globals& g) {
  const fs::path dir = run_dir;
  const fs::path out = require_out(g.out, "reconstruct");
  fs::create_directories(out);
  const RunConfig cfg = parse_config(read_json_file(dir / "config.json"), g.seed);
  if (cfg.formulation != "frame") throw ConfigError("reconstruct works on frame runs");
  const auto snaps = list_snapshots(dir);
  if (snaps.empty()) throw DataError("no snapshots in " + dir.string());
  const int d = static_cast<int>(cfg.alg.rep.empty() ? 0 : cfg.alg.rep[0].rows());
  std::vector<double> times;
  Reconstructor rec(cfg.alg, cfg.coupling, cfg.grid, CMatrix::Identity(d, d), cfg.reconstruct_sample_every,
                    [&](const GroupField& f) {
                      write_group_field(out / ("group_field_" + time_tag(times[f.index]) + ".csv"), f, cfg.grid);
                    });
  // the reconstruction marches in time with the snapshot spacing; snapshots off that spacing
  // (typically the final state) are left out
  const double dt = read_json_file(dir / "manifest.json").value("dt", 0.0);
  const double spacing = cfg.run.snapshot_every > 0 && dt > 0.0 ? cfg.run.snapshot_every * dt
                         : snaps.size() > 1                      ? snaps[1].first - snaps[0].first
                                                                 : 0.0;
  int skipped = 0;
  for (const auto& [t, path] : snaps) {
    if (spacing > 0.0 && !times.empty() &&
        std::abs(t - times.back() - spacing) > 1e-6 * std::max(1.0, spacing)) {
      ++skipped;
      continue;
    }
    // filenames carry rounded times; rebuild them from the step spacing
    const double exact = times.empty() ? t : snaps.front().first + static_cast<double>(times.size()) * spacing;
    FrameState s = read_frame_snapshot(path, exact);
    times.push_back(exact);
    rec.push(s);
  }
  const ReconstructionReport rep = rec.finish();
  json j{{"slices", rep.slices},
         {"unitarity_drift", rep.unitarity_drift},
         {"flatness", rep.flatness},
         {"path_commutativity", rep.path_commutativity},
         {"adU_constancy", rep.adU_constancy},
         {"adU_applies_to", cfg.coupling.R.is_zero() ? "U H U^-1" : "U (H - R) U^-1"},
         {"skipped_snapshots", skipped},
         {"status", rep.warning ? "warning" : "ok"}};
  if (rep.monodromy_initial) j["monodromy_initial"] = *rep.monodromy_initial;
  if (rep.monodromy_final) j["monodromy_final"] = *rep.monodromy_final;
  std::ofstream(out / "reconstruction_report.ndjson") << j.dump() << '\n';
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_convergence(const std::string& config, int levels, const Globals& g) {
  const RunConfig cfg = load_config(config, g);
  if (levels == 0) levels = cfg.levels;
  if (levels < 3) throw ConfigError("convergence needs --levels >= 3");
  check_gates(cfg);
  const ConvergenceReport rep = run_convergence(cfg, levels);
  std::ostringstream csv;
  csv << std::setprecision(10) << "quantity,level,N,value,observed_order\n";
  for (const auto& q : rep.quantities)
    for (std::size_t k = 0; k < q.values.size(); ++k) {
      csv << q.name << ',' << k << ',' << rep.N[k] << ',' << q.values[k] << ',';
      if (k < q.orders.size()) csv << q.orders[k];
      csv << '\n';
    }
  std::cout << csv.str();
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    std::ofstream(fs::path(g.out) / "convergence.csv") << csv.str();
  }
  return 0;
}

int cmd_sweep(const std::string& config, const Globals& g) {
  const RunConfig cfg = load_config(config, g);
  const int threads = g.threads > 0 ? g.threads : cfg.threads;
  std::optional<fs::path> out;
  if (!g.out.empty()) out = fs::path(g.out);
  const auto rows = run_sweep(cfg, threads, out);
  std::ostringstream csv;
  write_sweep_csv(csv, cfg, rows);
  std::cout << csv.str();
  if (out) {
    fs::create_directories(*out);
    std::ofstream(*out / "sweep.csv") << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced wave maps with torsion: evolution, diagnostics and reconstruction"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for random data profiles");
  app.add_flag("--allow-large-lambda", g.allow_large_lambda, "Run even when |lambda| exceeds lambda_max");
  app.add_option("--threads", g.threads, "Worker threads for sweeps");

  std::string config, run_dir, formulation;
  int levels = 0;
  auto* algebra = app.add_subcommand("algebra", "Check the algebra and target geometry");
  algebra->add_option("mode", "Only 'check' is supported")->check(CLI::IsMember({"check"}));
  algebra->add_option("--config", config, "Config file")->required();
  auto* simulate_cmd = app.add_subcommand("simulate", "Evolve one configuration");
  simulate_cmd->add_option("--config", config, "Config file")->required();
  simulate_cmd->add_option("--formulation", formulation, "frame or wavemap")->check(CLI::IsMember({"frame", "wavemap"}));
  auto* analyze = app.add_subcommand("analyze", "Recompute diagnostics from a stored run");
  analyze->add_option("--run", run_dir, "Run directory")->required();
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct the group-valued map of a stored run");
  reconstruct->add_option("--run", run_dir, "Run directory")->required();
  auto* convergence = app.add_subcommand("convergence", "Observed orders over refined grids");
  convergence->add_option("--config", config, "Config file")->required();
  convergence->add_option("--levels", levels, "Number of levels (>= 3)");
  auto* sweep = app.add_subcommand("sweep", "Run the cross product of the configured sweep axes");
  sweep->add_option("--config", config, "Config file")->required();
  for (auto* sub : {algebra, simulate_cmd, analyze, reconstruct, convergence, sweep}) {
    sub->add_option("--out", g.out, "Output directory");
    sub->add_option("--seed", seed, "Seed for random data profiles");
    sub->add_flag("--allow-large-lambda", g.allow_large_lambda, "Run even when |lambda| exceeds lambda_max");
    sub->add_option("--threads", g.threads, "Worker threads for sweeps");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    bool seed_given = seed_opt->count() > 0;
    for (auto* sub : app.get_subcommands()) seed_given = seed_given || sub->get_option("--seed")->count() > 0;
    if (seed_given) g.seed = seed;
    apply_global_env(g);
    if (algebra->parsed()) return cmd_algebra(config, g);
    if (simulate_cmd->parsed()) return cmd_simulate(config, formulation, g);
    if (analyze->parsed()) return cmd_analyze(run_dir, g);
    if (reconstruct->parsed()) return cmd_reconstruct(run_dir, g);
    if (convergence->parsed()) return cmd_convergence(config, levels, g);
    if (sweep->parsed()) return cmd_sweep(config, g);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
