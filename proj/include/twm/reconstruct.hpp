#pragma once

// Reconstruction of the group-valued map U from frame fields,
//   d_x U = U (E^a L_a),   d_t U = U (B^a L_a),
// first along the initial slice, then along every grid column in time. Snapshots are
// consumed as a stream so long dense runs never need to be held in memory.

#include "twm/wavemap_solver.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <deque>
#include <functional>
#include <optional>

namespace twm {

inline constexpr double kUnitarityWarn = 1e-4;

struct GroupField {
  int index = 0;  // snapshot index
  double t = 0.0;
  std::string group;
  std::vector<CMatrix> U;
};

/// u with X = u^a L_a (least squares over the generators).
inline Vector from_rep(const LieAlgebraSpec& alg, const CMatrix& X) {
  if (!alg.has_rep()) throw CapabilityError("algebra '" + alg.name + "' has no matrix representation");
  const int n = alg.dim;
  const int d = static_cast<int>(alg.rep[0].rows());
  Eigen::MatrixXcd A(d * d, n);
  for (int a = 0; a < n; ++a) A.col(a) = Eigen::Map<const Eigen::VectorXcd>(alg.rep[a].data(), d * d);
  const Eigen::VectorXcd rhs = Eigen::Map<const Eigen::VectorXcd>(X.data(), d * d);
  const Eigen::VectorXcd u = A.colPivHouseholderQr().solve(rhs);
  return u.real();
}

inline double op_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

/// max(||U^H U - I||, |det U - 1| when all generators are traceless).
inline double unitarity_defect(const CMatrix& U, bool special) {
  double d = op_norm(U.adjoint() * U - CMatrix::Identity(U.rows(), U.cols()));
  if (special) d = std::max(d, std::abs(U.determinant() - 1.0));
  return d;
}

namespace detail {

/// One RK4 step of U' = U A(s) from values of A at the start, midpoint and end.
inline CMatrix rk4_right(const CMatrix& U, const CMatrix& a0, const CMatrix& am, const CMatrix& a1, double h) {
  const CMatrix k1 = U * a0;
  const CMatrix k2 = (U + 0.5 * h * k1) * am;
  const CMatrix k3 = (U + 0.5 * h * k2) * am;
  const CMatrix k4 = (U + h * k3) * a1;
  return U + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Midpoint value between samples k and k+1 of a sequence of length m by cubic interpolation,
/// `get(j)` returning sample j; periodic sequences wrap.
template <class Get>
auto midpoint(const Get& get, int k, int m, bool periodic) {
  using T = std::decay_t<decltype(get(0))>;
  if (m < 4) return T(0.5 * (get(k) + get(k + 1 < m ? k + 1 : k)));
  int row = 1;
  if (!periodic) {
    if (k == 0) row = 0;
    else if (k + 2 >= m) row = 2;
  }
  const int start = k - row;
  auto idx = [&](int j) { return periodic ? detail::wrap(j, m) : j; };
  T out = kMidpointWeights[row][0] * get(idx(start));
  for (int q = 1; q < 4; ++q) out += kMidpointWeights[row][q] * get(idx(start + q));
  return out;
}

}  // namespace detail

/// Integrates d_x U = U E^a L_a along one time slice from U(x0). Returns the N grid values
/// and, on the circle, U(x0 + L) as an extra last entry.
inline std::vector<CMatrix> integrate_row(const LieAlgebraSpec& alg, const Grid& grid, const Matrix& E,
                                          const CMatrix& U_start) {
  const int N = grid.N;
  const int cells = grid.periodic() ? N : N - 1;
  auto A = [&](int i) -> CMatrix { return to_rep(alg, E.col(detail::wrap(i, N))); };
  auto e_at = [&](int j) -> Vector { return E.col(j); };
  std::vector<CMatrix> U(cells + 1);
  U[0] = U_start;
  const double h = grid.dx();
  for (int i = 0; i < cells; ++i) {
    const Vector em = detail::midpoint(e_at, i, N, grid.periodic());
    U[i + 1] = detail::rk4_right(U[i], A(i), to_rep(alg, em), A(i + 1), h);
  }
  return U;
}

struct ReconstructionReport {
  double unitarity_drift = 0.0;
  /// Largest discrepancy between the x-then-t and t-then-x paths at the sampled slices.
  double path_commutativity = 0.0;
  /// Spread of U (H - R)^a L_a U^-1 over all sampled points (around its mean).
  double adU_constancy = 0.0;
  CMatrix adU_mean;
  double flatness = 0.0;
  /// ||M - I|| of the x-monodromy at the first and last slice (circle only).
  std::optional<double> monodromy_initial;
  std::optional<double> monodromy_final;
  CMatrix monodromy_matrix;
  int slices = 0;
  bool warning = false;
};

/// Streaming reconstruction. push() the frame snapshots in time order (equal spacing);
/// GroupField slices are handed to `sink` as soon as they are known; finish() returns the report.
class Reconstructor {
public:
  using Sink = std::function<void(const GroupField&)>;

  Reconstructor(const LieAlgebraSpec& alg, const Coupling& c, const Grid& grid, CMatrix U0,
                int sample_every = 1, Sink sink = {})
      : alg_(alg), grid_(grid), U0_(std::move(U0)), sample_every_(std::max(1, sample_every)), sink_(std::move(sink)) {
    if (!alg_.has_rep()) throw CapabilityError("reconstruction needs a matrix representation for '" + alg.name + "'");
    R_ = c.R.R.size() ? c.R.R : Vector::Zero(alg.dim);
    special_ = true;
    for (const auto& l : alg_.rep) special_ = special_ && std::abs(l.trace()) < kRepTol;
    TargetGeometry flat;
    flat.g = Matrix::Identity(alg.dim, alg.dim);
    flat.g_inv = flat.g;
    flat.p = Matrix::Zero(alg.dim, alg.dim);
    flat.Q = MixedTensor(alg.dim);
    flat.C_raised = MixedTensor(alg.dim);
    flat_sys_.emplace(alg, flat, c, grid, FdOrder::fourth);
  }

  void push(const FrameState& s) {
    if (!window_.empty()) {
      const double dt = s.t - window_.back().t;
      if (!(dt > 0.0)) throw DataError("snapshots must be strictly increasing in time");
      if (dt_ && std::abs(dt - *dt_) > 1e-9 * std::max(1.0, *dt_)) throw DataError("snapshots must be equally spaced");
      dt_ = dt;
    }
    window_.push_back(s);
    ++count_;
    if (count_ == 1) {
      auto row = integrate_row(alg_, grid_, s.E, U0_);
      if (grid_.periodic()) {
        report_.monodromy_matrix = row[0].inverse() * row.back();
        report_.monodromy_initial = op_norm(report_.monodromy_matrix - CMatrix::Identity(U0_.rows(), U0_.cols()));
        row.pop_back();
      }
      U_ = std::move(row);
      produce(s);
    }
    // the interval (k, k+1) needs samples k-1..k+2, or 0..3 at the start
    while (cur_ + 1 < count_ && (cur_ == 0 ? count_ >= 4 : count_ >= cur_ + 3)) advance();
    if (count_ >= 3 && window_.size() >= 3) flatness_from(window_.size() - 2);
    while (window_.size() > 4) window_.pop_front();
  }

  ReconstructionReport finish() {
    while (cur_ + 1 < count_) advance();
    if (!samples_.empty()) {
      CMatrix mean = CMatrix::Zero(samples_[0].rows(), samples_[0].cols());
      for (const auto& m : samples_) mean += m;
      mean /= static_cast<double>(samples_.size());
      report_.adU_mean = mean;
      for (const auto& m : samples_) report_.adU_constancy = std::max(report_.adU_constancy, op_norm(m - mean));
    }
    report_.warning = report_.unitarity_drift > kUnitarityWarn;
    return report_;
  }

  const std::vector<CMatrix>& current() const { return U_; }

private:
  /// snapshot with absolute index j from the rolling window
  const FrameState& snap(int j) const { return window_[window_.size() - (count_ - j)]; }

  void advance() {
    const int k = cur_;
    const int m = count_;
    const int N = grid_.N;
    const double dt = *dt_;
    auto b_at = [&](int j) -> Matrix { return snap(j).B; };
    const Matrix Bm = detail::midpoint(b_at, k, m, false);
    const Matrix& B0 = snap(k).B;
    const Matrix& B1 = snap(k + 1).B;
    for (int i = 0; i < N; ++i)
      U_[i] = detail::rk4_right(U_[i], to_rep(alg_, B0.col(i)), to_rep(alg_, Bm.col(i)), to_rep(alg_, B1.col(i)), dt);
    ++cur_;
    produce(snap(cur_));
  }

  void produce(const FrameState& s) {
    const int k = cur_;
    for (const auto& u : U_) report_.unitarity_drift = std::max(report_.unitarity_drift, unitarity_defect(u, special_));
    ++report_.slices;
    const bool sampled = k % sample_every_ == 0;
    if (sampled) {
      // t-then-x path: continue the x0 column along the slice
      auto row = integrate_row(alg_, grid_, s.E, U_[0]);
      for (int i = 0; i < grid_.N; ++i)
        report_.path_commutativity = std::max(report_.path_commutativity, op_norm(row[i] - U_[i]));
      if (grid_.periodic()) {
        report_.monodromy_matrix = row[0].inverse() * row.back();
        report_.monodromy_final = op_norm(report_.monodromy_matrix - CMatrix::Identity(U0_.rows(), U0_.cols()));
      }
      for (int i = 0; i < grid_.N; ++i) {
        const CMatrix X = to_rep(alg_, Vector(s.H.col(i) - R_));
        samples_.push_back(U_[i] * X * U_[i].inverse());
      }
    }
    if (sink_) sink_(GroupField{k, s.t, alg_.name, U_});
  }

  void flatness_from(std::size_t centre) {
    if (centre < 1 || centre + 1 >= window_.size()) return;
    std::array<FrameState, 3> w{window_[centre - 1], window_[centre], window_[centre + 1]};
    const auto r = frame_equation_residuals(std::span<const FrameState>(w.data(), 3), *flat_sys_);
    report_.flatness = std::max(report_.flatness, r.dE.cwiseAbs().maxCoeff());
  }

  LieAlgebraSpec alg_;
  Grid grid_;
  CMatrix U0_;
  int sample_every_;
  Sink sink_;
  Vector R_;
  bool special_ = true;
  std::optional<FrameSystem> flat_sys_;
  std::deque<FrameState> window_;
  std::optional<double> dt_;
  int count_ = 0;
  int cur_ = 0;
  std::vector<CMatrix> U_;
  std::vector<CMatrix> samples_;
  ReconstructionReport report_;
};

/// Whole-series convenience wrapper around Reconstructor.
inline std::vector<GroupField> reconstruct_map(const std::vector<FrameState>& snapshots, const LieAlgebraSpec& alg,
                                               const Coupling& c, const Grid& grid, const CMatrix& U0,
                                               ReconstructionReport* report = nullptr) {
  std::vector<GroupField> out;
  Reconstructor rec(alg, c, grid, U0, 1, [&](const GroupField& f) { out.push_back(f); });
  for (const auto& s : snapshots) rec.push(s);
  auto r = rec.finish();
  if (report) *report = r;
  return out;
}

/// Max |d_t E - d_x B + [B, E]| at the interior snapshots (second-order time differences).
inline double flatness_residual(const std::vector<FrameState>& snapshots, const LieAlgebraSpec& alg,
                                const Coupling& c, const Grid& grid) {
  if (snapshots.size() < 3) throw DataError("flatness residual needs at least 3 snapshots");
  TargetGeometry flat;
  flat.g = Matrix::Identity(alg.dim, alg.dim);
  flat.g_inv = flat.g;
  flat.p = Matrix::Zero(alg.dim, alg.dim);
  flat.Q = MixedTensor(alg.dim);
  flat.C_raised = MixedTensor(alg.dim);
  const FrameSystem sys(alg, flat, c, grid);
  double m = 0.0;
  for (std::size_t k = 1; k + 1 < snapshots.size(); ++k) {
    const auto r = frame_equation_residuals(std::span<const FrameState>(&snapshots[k - 1], 3), sys);
    m = std::max(m, r.dE.cwiseAbs().maxCoeff());
  }
  return m;
}

enum class Equivariance { left, right, conjugate };

inline Equivariance equivariance_from_string(const std::string& s) {
  if (s == "left") return Equivariance::left;
  if (s == "right") return Equivariance::right;
  if (s == "conjugate") return Equivariance::conjugate;
  throw ConfigError("equivariance type must be left, right or conjugate, got '" + s + "'");
}

/// y-extension U(x, y, t) = U(x, t) exp(y (H - R)) exp(y R) (generators implied), whose
/// frame has K_y = exp(-yR) H exp(yR).
inline CMatrix extend_in_y(const LieAlgebraSpec& alg, const CMatrix& U, const Vector& H, const Vector& R, double y) {
  const CMatrix X = to_rep(alg, Vector(H - R));
  const CMatrix Rm = to_rep(alg, R);
  return U * CMatrix(y * X).exp() * CMatrix(y * Rm).exp();
}

/// max || U(x, y + delta) - exp(delta L) U(x, y) exp(delta R) || over the sampled points, y and delta.
/// left: R must vanish; right: L must vanish; conjugate: both allowed.
inline double verify_equivariance_relation(const LieAlgebraSpec& alg, const GroupField& field,
                                           const FrameState& frame, Equivariance type, const CMatrix& L,
                                           const Vector& R, const std::vector<double>& ys = {0.0, 0.5, 1.0},
                                           const std::vector<double>& deltas = {0.1, 0.37}) {
  const bool r_zero = R.size() == 0 || R.cwiseAbs().maxCoeff() == 0.0;
  const bool l_zero = L.size() == 0 || L.cwiseAbs().maxCoeff() == 0.0;
  if (type == Equivariance::left && !r_zero) throw ConfigError("left equivariance check on a run with R != 0");
  if (type == Equivariance::right && !l_zero) throw ConfigError("right equivariance check with L != 0");
  const Vector Rv = r_zero ? Vector::Zero(alg.dim) : R;
  const CMatrix Rm = to_rep(alg, Rv);
  const CMatrix Lm = L.size() ? L : CMatrix::Zero(Rm.rows(), Rm.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < field.U.size(); ++i)
    for (double y : ys)
      for (double d : deltas) {
        const CMatrix a = extend_in_y(alg, field.U[i], frame.H.col(i), Rv, y + d);
        const CMatrix b = CMatrix(d * Lm).exp() * extend_in_y(alg, field.U[i], frame.H.col(i), Rv, y) *
                          CMatrix(d * Rm).exp();
        worst = std::max(worst, op_norm(a - b));
      }
  return worst;
}

}  // namespace twm
