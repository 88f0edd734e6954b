#pragma once

// Run directory formats: diagnostics.ndjson, snapshot_<t>.csv, group_field_<t>.csv, manifest.json.

#include "twm/config.hpp"
#include "twm/reconstruct.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>

namespace twm {

namespace fs = std::filesystem;

inline constexpr const char* kCodeVersion = "twm 0.1.0";

inline json to_json(const DiagnosticsRecord& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"t", num(r.t)},
              {"energy", num(r.energy)},
              {"energy_k", {num(r.energy_k[0]), num(r.energy_k[1])}},
              {"E0", num(r.energy_k[0])},
              {"E1", num(r.energy_k[1])},
              {"sup_E", num(r.sup_E)},
              {"sup_H", num(r.sup_H)},
              {"sup_B", num(r.sup_B)},
              {"max_constraint", num(r.max_constraint)},
              {"null_conservation_residual", num(r.null_conservation_residual())},
              {"null_residual_ll", num(r.null_residual_ll)},
              {"null_residual_nn", num(r.null_residual_nn)},
              {"min_energy_density", num(r.min_energy_density)}};
}

inline DiagnosticsRecord record_from_json(const json& j) {
  auto num = [&](const char* k) {
    return j.contains(k) && j[k].is_number() ? j[k].get<double>() : std::numeric_limits<double>::quiet_NaN();
  };
  DiagnosticsRecord r;
  r.t = num("t");
  r.energy = num("energy");
  r.energy_k = {num("E0"), num("E1")};
  r.sup_E = num("sup_E");
  r.sup_H = num("sup_H");
  r.sup_B = num("sup_B");
  r.max_constraint = num("max_constraint");
  r.null_residual_ll = num("null_residual_ll");
  r.null_residual_nn = num("null_residual_nn");
  r.min_energy_density = num("min_energy_density");
  return r;
}

inline std::vector<DiagnosticsRecord> read_diagnostics(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  std::vector<DiagnosticsRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(json::parse(line)));
  return out;
}

inline std::string time_tag(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", t);
  return buf;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline void write_row(std::ostream& out, double x, std::initializer_list<const Matrix*> fields, int i) {
  out << x;
  for (const Matrix* f : fields)
    for (int a = 0; a < f->rows(); ++a) out << ',' << (*f)(a, i);
  out << '\n';
}

inline std::vector<std::vector<double>> read_csv(const fs::path& file, std::vector<std::string>& header) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(file.string() + " is empty");
  header.clear();
  std::stringstream hs(line);
  for (std::string h; std::getline(hs, h, ',');) header.push_back(h);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string v; std::getline(ls, v, ',');) row.push_back(std::stod(v));
    if (row.size() != header.size()) throw DataError(file.string() + ": ragged row");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Columns x, E^1..E^n, H^1..H^n, B^1..B^n with 17 significant digits.
inline void write_frame_snapshot(const fs::path& file, const FrameState& s, const Grid& grid) {
  std::ofstream out(file);
  out << std::setprecision(17) << "x";
  for (const char* f : {"E", "H", "B"})
    for (int a = 1; a <= s.dim(); ++a) out << ',' << f << a;
  out << '\n';
  for (int i = 0; i < grid.N; ++i) detail::write_row(out, grid.x(i), {&s.E, &s.H, &s.B}, i);
  if (!out) throw DataError("failed writing " + file.string());
}

/// Columns x, phi^1..phi^n, theta^1..theta^n.
inline void write_wavemap_snapshot(const fs::path& file, const WaveMapState& s, const Grid& grid) {
  std::ofstream out(file);
  out << std::setprecision(17) << "x";
  for (const char* f : {"phi", "theta"})
    for (int a = 1; a <= s.dim(); ++a) out << ',' << f << a;
  out << '\n';
  for (int i = 0; i < grid.N; ++i) detail::write_row(out, grid.x(i), {&s.phi, &s.theta}, i);
  if (!out) throw DataError("failed writing " + file.string());
}

inline FrameState read_frame_snapshot(const fs::path& file, double t) {
  std::vector<std::string> header;
  const auto rows = detail::read_csv(file, header);
  if ((header.size() - 1) % 3 != 0 || header.size() < 4) throw DataError(file.string() + ": not a frame snapshot");
  const int n = static_cast<int>((header.size() - 1) / 3);
  const int N = static_cast<int>(rows.size());
  FrameState s = FrameState::zero(n, N, t);
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < n; ++a) {
      s.E(a, i) = rows[i][1 + a];
      s.H(a, i) = rows[i][1 + n + a];
      s.B(a, i) = rows[i][1 + 2 * n + a];
    }
  return s;
}

inline WaveMapState read_wavemap_snapshot(const fs::path& file, double t) {
  std::vector<std::string> header;
  const auto rows = detail::read_csv(file, header);
  if ((header.size() - 1) % 2 != 0 || header.size() < 3) throw DataError(file.string() + ": not a wave map snapshot");
  const int n = static_cast<int>((header.size() - 1) / 2);
  const int N = static_cast<int>(rows.size());
  WaveMapState s{t, Matrix(n, N), Matrix(n, N)};
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < n; ++a) {
      s.phi(a, i) = rows[i][1 + a];
      s.theta(a, i) = rows[i][1 + n + a];
    }
  return s;
}

/// Snapshot files of a run directory ordered by time.
inline std::vector<std::pair<double, fs::path>> list_snapshots(const fs::path& dir, const std::string& prefix = "snapshot_") {
  std::vector<std::pair<double, fs::path>> out;
  if (!fs::is_directory(dir)) throw DataError("run directory '" + dir.string() + "' does not exist");
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".csv")
      out.emplace_back(std::stod(name.substr(prefix.size(), name.size() - prefix.size() - 4)), e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Columns x, then U_11 re, U_11 im, U_12 re, ... in row-major order.
inline void write_group_field(const fs::path& file, const GroupField& f, const Grid& grid) {
  std::ofstream out(file);
  out << std::setprecision(17) << "x";
  const int d = f.U.empty() ? 0 : static_cast<int>(f.U[0].rows());
  for (int r = 1; r <= d; ++r)
    for (int c = 1; c <= d; ++c) out << ",U" << r << c << "_re,U" << r << c << "_im";
  out << '\n';
  for (std::size_t i = 0; i < f.U.size(); ++i) {
    out << grid.x(static_cast<int>(i));
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out << ',' << f.U[i](r, c).real() << ',' << f.U[i](r, c).imag();
    out << '\n';
  }
}

/// Write to a temporary name, then rename into place.
inline void write_atomically(const fs::path& file, const std::string& content) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << content;
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, file);
}

struct RunManifest {
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::string start_time;
  std::string end_time;
  RunStatus status = RunStatus::ok;
  std::string message;
  double last_good_time = 0.0;
  int steps = 0;
  double dt = 0.0;
  std::vector<std::string> outputs;

  json to_json() const {
    return json{{"config_hash", config_hash}, {"code_version", code_version}, {"start_time", start_time},
                {"end_time", end_time},       {"status", to_string(status)},   {"message", message},
                {"last_good_time", last_good_time}, {"steps", steps},           {"dt", dt},
                {"outputs", outputs}};
  }
};

inline json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read " + file.string());
  return json::parse(in);
}

}  // namespace twm
