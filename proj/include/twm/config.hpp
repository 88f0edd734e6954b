#pragma once

// JSON run configuration shared by every CLI subcommand.
//
//   grid          kind, N, x0, length
//   algebra       name
//   geometry      metric {kind, entries}, p {kind, entries, R, pvec, qvec}  (p.kind random uses the seed)
//   coupling      lambda, v_t, v_x, v_y, R
//   initial_data  E, B, H0, periodicity_tol, random, scale   (frame)
//                 phi, theta, phi0                     (wavemap)
//   target        chart
//   run           formulation, T, cfl, fd_order, diag_every, snapshot_every, ceiling_factor,
//                 ceiling, null_time_order, seed, allow_large_lambda, allow_noninvariant
//   reconstruct   sample_every
//   sweep         axes [{key, values}], threads, max_runs
//   convergence   levels
//
// Unknown keys are errors. Environment variables TWM_<SECTION>__<KEY>[__<KEY>...] override
// entries (values parsed as JSON, falling back to strings).

#include "twm/chart.hpp"
#include "twm/frame_solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>

extern char** environ;

namespace twm {

using json = nlohmann::json;

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
}

inline void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + join_path(path, k) + "'");
  }
}

template <class T>
T get(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + join_path(path, key) + "' has the wrong type");
  }
}

template <class T>
T require(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing key '" + join_path(path, key) + "'");
  return get<T>(j, path, key, T{});
}

inline Vector get_vector(const json& j, const std::string& path, const std::string& key, int n) {
  const auto v = require<std::vector<double>>(j, path, key);
  if (static_cast<int>(v.size()) != n)
    throw ConfigError("'" + join_path(path, key) + "' must have " + std::to_string(n) + " entries");
  return Eigen::Map<const Vector>(v.data(), n);
}

inline Matrix get_matrix(const json& j, const std::string& path, const std::string& key, int n) {
  const auto rows = require<std::vector<std::vector<double>>>(j, path, key);
  if (static_cast<int>(rows.size()) != n) throw ConfigError("'" + join_path(path, key) + "' must be " + std::to_string(n) + "x" + std::to_string(n));
  Matrix m(n, n);
  for (int a = 0; a < n; ++a) {
    if (static_cast<int>(rows[a].size()) != n)
      throw ConfigError("'" + join_path(path, key) + "' must be " + std::to_string(n) + "x" + std::to_string(n));
    for (int b = 0; b < n; ++b) m(a, b) = rows[a][b];
  }
  return m;
}

inline std::vector<Bump> get_bumps(const json& j, const std::string& path, const std::string& key) {
  std::vector<Bump> out;
  if (!j.contains(key)) return out;
  const json& arr = j.at(key);
  const std::string p = join_path(path, key);
  if (!arr.is_array()) throw ConfigError("'" + p + "' must be an array of bumps");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string bp = p + "[" + std::to_string(i) + "]";
    expect_keys(arr[i], bp, {"component", "center", "width", "amplitude", "shape"});
    Bump b;
    b.component = require<int>(arr[i], bp, "component");
    b.center = require<double>(arr[i], bp, "center");
    b.width = require<double>(arr[i], bp, "width");
    b.amplitude = require<double>(arr[i], bp, "amplitude");
    const auto shape = get<std::string>(arr[i], bp, "shape", "bump");
    if (shape == "bump") b.shape = BumpShape::bump;
    else if (shape == "dbump") b.shape = BumpShape::dbump;
    else throw ConfigError("'" + bp + ".shape' must be bump or dbump");
    out.push_back(b);
  }
  return out;
}

inline json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

/// Finds `key` in `obj` ignoring case; returns the stored spelling or the lowercase key.
inline std::string match_key(const json& obj, const std::string& key) {
  if (obj.is_object())
    for (const auto& [k, v] : obj.items())
      if (lower(k) == lower(key)) return k;
  return lower(key);
}

/// FNV-1a, used for the config hash in run manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Applies TWM_<SECTION>__<KEY> overrides from `env` (name -> value) to `j`.
inline void apply_env_overrides(json& j, const std::vector<std::pair<std::string, std::string>>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind("TWM_", 0) != 0 || name.find("__") == std::string::npos) continue;
    std::vector<std::string> parts;
    std::string rest = name.substr(4);
    std::size_t pos;
    while ((pos = rest.find("__")) != std::string::npos) {
      parts.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + 2);
    }
    parts.push_back(rest);
    json* node = &j;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
      const std::string key = detail::match_key(*node, parts[k]);
      if (!node->contains(key)) (*node)[key] = json::object();
      node = &(*node)[key];
      if (!node->is_object()) throw ConfigError("environment override " + name + " descends into a non-object");
    }
    (*node)[detail::match_key(*node, parts.back())] = detail::parse_scalar(value);
  }
}

inline std::vector<std::pair<std::string, std::string>> process_env() {
  std::vector<std::pair<std::string, std::string>> out;
  for (char** e = environ; e && *e; ++e) {
    std::string s(*e);
    const auto eq = s.find('=');
    if (eq != std::string::npos) out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

/// Sets `value` at a dotted key path such as "coupling.lambda" or "initial_data.B.0.amplitude".
inline void set_by_path(json& j, const std::string& path, const json& value) {
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty sweep key");
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const bool last = k + 1 == parts.size();
    if (node->is_array()) {
      const std::size_t idx = std::stoul(parts[k]);
      if (idx >= node->size()) throw ConfigError("sweep key '" + path + "' indexes past the end of an array");
      node = &(*node)[idx];
    } else {
      if (!last && !node->contains(parts[k])) (*node)[parts[k]] = json::object();
      node = &(*node)[parts[k]];
    }
    if (last) *node = value;
  }
}

struct WaveMapProfile {
  std::vector<Bump> phi;
  std::vector<Bump> theta;
  Vector phi0;
};

struct SweepAxis {
  std::string key;
  std::vector<json> values;
};

struct RunConfig {
  json raw;
  std::string formulation = "frame";
  Grid grid;
  LieAlgebraSpec alg;
  TargetGeometry geom;
  Coupling coupling;
  FrameProfile profile;
  std::string chart = "flat_torsion_r3";
  WaveMapProfile wave_profile;
  RunSettings run;
  FdOrder order = FdOrder::fourth;
  std::uint64_t seed = 0;
  bool allow_large_lambda = false;
  bool allow_noninvariant = false;
  int reconstruct_sample_every = 1;
  std::vector<SweepAxis> axes;
  int threads = 1;
  int max_runs = 1000;
  int levels = 3;

  std::string hash() const {
    std::ostringstream s;
    s << std::hex << detail::fnv1a(raw.dump());
    return s.str();
  }
};

/// Deterministic random bumps from the seed: E along a single direction with the zero-mean
/// shape (valid on the circle), B in random components.
inline void add_random_bumps(FrameProfile& prof, const json& spec, const std::string& path, int n, const Grid& grid,
                             std::uint64_t seed) {
  detail::expect_keys(spec, path, {"E_count", "B_count", "amplitude", "min_width", "max_width"});
  const int ne = detail::get<int>(spec, path, "E_count", 1);
  const int nb = detail::get<int>(spec, path, "B_count", 2);
  const double amp = detail::get<double>(spec, path, "amplitude", 0.2);
  const double wmin = detail::get<double>(spec, path, "min_width", 0.1 * grid.L);
  const double wmax = detail::get<double>(spec, path, "max_width", 0.2 * grid.L);
  if (!(wmin > 0.0) || wmax < wmin) throw ConfigError("'" + path + "' needs 0 < min_width <= max_width");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> comp(0, n - 1);
  auto place = [&](double w) {
    return grid.periodic() ? grid.x0 + unit(rng) * grid.L : grid.x0 + w + unit(rng) * (grid.L - 2.0 * w);
  };
  const int dir = comp(rng);
  for (int k = 0; k < ne; ++k) {
    const double w = wmin + unit(rng) * (wmax - wmin);
    prof.E.push_back({dir, place(w), w, amp * (2.0 * unit(rng) - 1.0), BumpShape::dbump});
  }
  for (int k = 0; k < nb; ++k) {
    const double w = wmin + unit(rng) * (wmax - wmin);
    prof.B.push_back({comp(rng), place(w), w, amp * (2.0 * unit(rng) - 1.0), BumpShape::bump});
  }
}

/// Parses and validates a complete configuration. `seed_override` comes from --seed / TWM_SEED.
inline RunConfig parse_config(const json& j, std::optional<std::uint64_t> seed_override = std::nullopt) {
  using namespace detail;
  RunConfig cfg;
  cfg.raw = j;
  expect_keys(j, "", {"grid", "algebra", "geometry", "coupling", "initial_data", "target", "run", "reconstruct", "sweep",
                      "convergence"});

  const json jrun = j.value("run", json::object());
  expect_keys(jrun, "run", {"formulation", "T", "cfl", "fd_order", "diag_every", "snapshot_every", "ceiling_factor",
                            "ceiling", "null_time_order", "seed", "allow_large_lambda", "allow_noninvariant"});
  cfg.formulation = get<std::string>(jrun, "run", "formulation", "frame");
  if (cfg.formulation != "frame" && cfg.formulation != "wavemap")
    throw ConfigError("'run.formulation' must be frame or wavemap");
  cfg.run.T = get<double>(jrun, "run", "T", 1.0);
  cfg.run.cfl = get<double>(jrun, "run", "cfl", 0.5);
  if (!(cfg.run.cfl > 0.0) || cfg.run.cfl > kMaxCfl) throw ConfigError("'run.cfl' must lie in (0, 0.9]");
  if (!(cfg.run.T >= 0.0)) throw ConfigError("'run.T' must be non-negative");
  const int fo = get<int>(jrun, "run", "fd_order", 4);
  if (fo != 2 && fo != 4) throw ConfigError("'run.fd_order' must be 2 or 4");
  cfg.order = fo == 2 ? FdOrder::second : FdOrder::fourth;
  cfg.run.diag_every = get<int>(jrun, "run", "diag_every", 10);
  cfg.run.snapshot_every = get<int>(jrun, "run", "snapshot_every", 0);
  if (cfg.run.diag_every < 1 || cfg.run.snapshot_every < 0)
    throw ConfigError("'run.diag_every' must be >= 1 and 'run.snapshot_every' >= 0");
  cfg.run.ceiling_factor = get<double>(jrun, "run", "ceiling_factor", 1e6);
  if (jrun.contains("ceiling")) cfg.run.ceiling = get<double>(jrun, "run", "ceiling", 0.0);
  cfg.run.null_time_order = get<int>(jrun, "run", "null_time_order", 4);
  if (cfg.run.null_time_order != 2 && cfg.run.null_time_order != 4)
    throw ConfigError("'run.null_time_order' must be 2 or 4");
  cfg.seed = seed_override ? *seed_override : get<std::uint64_t>(jrun, "run", "seed", 0);
  cfg.allow_large_lambda = get<bool>(jrun, "run", "allow_large_lambda", false);
  cfg.allow_noninvariant = get<bool>(jrun, "run", "allow_noninvariant", false);

  const json jgrid = j.value("grid", json::object());
  expect_keys(jgrid, "grid", {"kind", "N", "x0", "length"});
  cfg.grid = Grid::make(grid_kind_from_string(get<std::string>(jgrid, "grid", "kind", "circle")),
                        get<int>(jgrid, "grid", "N", 256), get<double>(jgrid, "grid", "x0", 0.0),
                        get<double>(jgrid, "grid", "length", 2.0 * std::numbers::pi));

  const json jc = j.value("coupling", json::object());
  expect_keys(jc, "coupling", {"lambda", "v_t", "v_x", "v_y", "R"});
  cfg.coupling.lambda = get<double>(jc, "coupling", "lambda", 0.0);
  cfg.coupling.v_t = get<double>(jc, "coupling", "v_t", 0.0);
  cfg.coupling.v_x = get<double>(jc, "coupling", "v_x", 0.0);
  cfg.coupling.v_y = get<double>(jc, "coupling", "v_y", 0.0);

  const json jrec = j.value("reconstruct", json::object());
  expect_keys(jrec, "reconstruct", {"sample_every"});
  cfg.reconstruct_sample_every = get<int>(jrec, "reconstruct", "sample_every", 1);

  const json jconv = j.value("convergence", json::object());
  expect_keys(jconv, "convergence", {"levels"});
  cfg.levels = get<int>(jconv, "convergence", "levels", 3);

  const json jsw = j.value("sweep", json::object());
  expect_keys(jsw, "sweep", {"axes", "threads", "max_runs"});
  cfg.threads = get<int>(jsw, "sweep", "threads", 1);
  cfg.max_runs = get<int>(jsw, "sweep", "max_runs", 1000);
  if (jsw.contains("axes")) {
    if (!jsw["axes"].is_array()) throw ConfigError("'sweep.axes' must be an array");
    for (std::size_t i = 0; i < jsw["axes"].size(); ++i) {
      const std::string p = "sweep.axes[" + std::to_string(i) + "]";
      const json& a = jsw["axes"][i];
      expect_keys(a, p, {"key", "values"});
      SweepAxis ax;
      ax.key = require<std::string>(a, p, "key");
      if (!a.contains("values") || !a["values"].is_array() || a["values"].empty())
        throw ConfigError("'" + p + ".values' must be a non-empty array");
      for (const auto& v : a["values"]) ax.values.push_back(v);
      cfg.axes.push_back(ax);
    }
  }

  if (cfg.formulation == "wavemap") {
    const json jt = j.value("target", json::object());
    expect_keys(jt, "target", {"chart"});
    cfg.chart = get<std::string>(jt, "target", "chart", "flat_torsion_r3");
    const TargetChart chart = builtin_chart(cfg.chart);
    const json ji = j.value("initial_data", json::object());
    expect_keys(ji, "initial_data", {"phi", "theta", "phi0"});
    cfg.wave_profile.phi = get_bumps(ji, "initial_data", "phi");
    cfg.wave_profile.theta = get_bumps(ji, "initial_data", "theta");
    cfg.wave_profile.phi0 = ji.contains("phi0") ? get_vector(ji, "initial_data", "phi0", chart.dim)
                                                : Vector(Vector::Zero(chart.dim));
    for (const auto* bs : {&cfg.wave_profile.phi, &cfg.wave_profile.theta})
      for (const auto& b : *bs)
        if (b.component < 0 || b.component >= chart.dim || !(b.width > 0.0))
          throw ConfigError("initial_data bump has an invalid component or width");
    cfg.coupling.R = TranslationData::zero(chart.dim);
    if (j.contains("algebra") || j.contains("geometry"))
      throw ConfigError("'algebra'/'geometry' do not apply to the wavemap formulation (use 'target')");
    return cfg;
  }

  const json ja = j.value("algebra", json::object());
  expect_keys(ja, "algebra", {"name"});
  cfg.alg = builtin_algebra(get<std::string>(ja, "algebra", "name", "su2"));
  const int n = cfg.alg.dim;
  cfg.coupling.R = jc.contains("R") ? TranslationData{get_vector(jc, "coupling", "R", n)} : TranslationData::zero(n);

  const json jg = j.value("geometry", json::object());
  expect_keys(jg, "geometry", {"metric", "p"});
  const json jm = jg.value("metric", json::object());
  expect_keys(jm, "geometry.metric", {"kind", "entries"});
  const bool abelian = cfg.alg.C.max_abs() == 0.0;
  const std::string mk = get<std::string>(jm, "geometry.metric", "kind", abelian ? "identity" : "cartan_killing");
  Matrix g;
  if (mk == "cartan_killing") {
    if (abelian) throw ConfigError("'geometry.metric.kind' cartan_killing vanishes on an abelian algebra; use identity or explicit");
    g = cartan_killing(cfg.alg);
  } else if (mk == "identity") {
    g = Matrix::Identity(n, n);
  } else if (mk == "explicit") {
    g = get_matrix(jm, "geometry.metric", "entries", n);
  } else {
    throw ConfigError("'geometry.metric.kind' must be cartan_killing, identity or explicit");
  }
  const json jp = jg.value("p", json::object());
  expect_keys(jp, "geometry.p", {"kind", "entries", "R", "pvec", "qvec"});
  const std::string pk = get<std::string>(jp, "geometry.p", "kind", "zero");
  Matrix p;
  if (pk == "zero") {
    p = Matrix::Zero(n, n);
  } else if (pk == "natural") {
    const Vector pr = jp.contains("R") ? get_vector(jp, "geometry.p", "R", n) : cfg.coupling.R.R;
    p = natural_p(cfg.alg, g, pr);
  } else if (pk == "commuting_pair") {
    p = commuting_pair_p(cfg.alg, g, get_vector(jp, "geometry.p", "pvec", n), get_vector(jp, "geometry.p", "qvec", n));
  } else if (pk == "explicit") {
    p = get_matrix(jp, "geometry.p", "entries", n);
  } else if (pk == "random") {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    p = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        p(a, b) = normal(rng);
        p(b, a) = -p(a, b);
      }
  } else {
    throw ConfigError("'geometry.p.kind' must be zero, natural, commuting_pair, explicit or random");
  }
  cfg.geom = make_geometry(cfg.alg, g, p);

  const json ji = j.value("initial_data", json::object());
  expect_keys(ji, "initial_data", {"E", "B", "H0", "periodicity_tol", "random", "scale"});
  cfg.profile.E = get_bumps(ji, "initial_data", "E");
  cfg.profile.B = get_bumps(ji, "initial_data", "B");
  cfg.profile.H0 = ji.contains("H0") ? get_vector(ji, "initial_data", "H0", n) : Vector(Vector::Zero(n));
  cfg.profile.periodicity_tol = get<double>(ji, "initial_data", "periodicity_tol", 1e-10);
  if (ji.contains("random")) add_random_bumps(cfg.profile, ji["random"], "initial_data.random", n, cfg.grid, cfg.seed);
  const double scale = get<double>(ji, "initial_data", "scale", 1.0);
  for (auto* bs : {&cfg.profile.E, &cfg.profile.B})
    for (auto& b : *bs) b.amplitude *= scale;
  if (!cfg.grid.periodic())
    for (const auto* bs : {&cfg.profile.E, &cfg.profile.B})
      for (const auto& b : *bs)
        if (b.center - b.width < cfg.grid.x0 || b.center + b.width > cfg.grid.x0 + cfg.grid.L)
          throw ConfigError("initial_data bump support leaves the line_compact domain");
  return cfg;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

/// Refuses lambda above lambda_max and non-invariant targets for R != 0 unless overridden.
/// The lambda gate applies to the frame formulation, whose energy carries the p term.
inline void check_gates(const RunConfig& cfg) {
  if (cfg.formulation != "frame") return;
  const double lm = lambda_max(cfg.geom, cfg.coupling.v_t);
  if (std::abs(cfg.coupling.lambda) > lm && !cfg.allow_large_lambda) {
    std::ostringstream m;
    m.precision(17);
    m << "|lambda| = " << std::abs(cfg.coupling.lambda) << " exceeds lambda_max = " << lm
      << " (1/sqrt(|v_t| |p|)); pass --allow-large-lambda to run anyway";
    throw ConfigError(m.str());
  }
  if (!cfg.coupling.R.is_zero() && !cfg.allow_noninvariant) {
    const Vector& R = cfg.coupling.R.R;
    const double sg = std::max(1.0, cfg.geom.g.cwiseAbs().maxCoeff() * R.norm());
    const double sp = std::max(1.0, cfg.geom.p.cwiseAbs().maxCoeff() * R.norm());
    const double rg = check_g_invariance(cfg.geom.g, cfg.alg, R);
    const double rp = check_p_invariance(cfg.geom.p, cfg.alg, R);
    if (rg > kRepTol * sg || rp > kRepTol * sp) {
      std::ostringstream m;
      m << "target is not ad_R-invariant (g residual " << rg << ", p residual " << rp
        << "); the equivariant system needs invariant (g, p). Set run.allow_noninvariant to override";
      throw ConfigError(m.str());
    }
  }
}

}  // namespace twm
