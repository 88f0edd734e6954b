#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

using namespace twm;
using namespace twm::test;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

WaveMapState profile_state(const Grid& grid, const Vector& phi0, double a, double b) {
  WaveMapState s{0.0, Matrix::Zero(3, grid.N), Matrix::Zero(3, grid.N)};
  for (int i = 0; i < grid.N; ++i) {
    const double x = grid.x(i);
    s.phi.col(i) = phi0;
    s.phi(0, i) += a * std::sin(x);
    s.theta(2, i) = b * std::cos(2.0 * x);
  }
  return s;
}

}  // namespace

TEST(Chart, FlatTorsionPotentialGivesTheConnection) {
  const TargetChart chart = builtin_chart("flat_torsion_r3");
  const Vector psi = Eigen::Vector3d(0.3, -0.2, 1.1);
  const MixedTensor q = torsion_from_potential(chart, psi);
  const MixedTensor gt = chart.connection(psi);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(q(a, b, c), 0.5 * levi_civita(a, b, c), 1e-9);
        EXPECT_NEAR(gt(a, b, c), q(a, b, c), 1e-9);
      }
}

TEST(Chart, Su2CoframeIsTheMaurerCartanForm) {
  const auto alg = builtin_algebra("su2");
  const TargetChart chart = builtin_chart("su2_exponential");
  auto U = [&](const Vector& psi) -> CMatrix { return to_rep(alg, psi).exp(); };
  for (const Vector& psi : {Vector(Eigen::Vector3d(0.4, -0.3, 0.9)), Vector(Eigen::Vector3d(1e-3, 2e-3, 0.0)),
                            Vector(Eigen::Vector3d(2.0, 0.5, -1.0))}) {
    const Matrix e = chart.coframe(psi);
    const CMatrix Uinv = U(psi).inverse();
    for (int A = 0; A < 3; ++A) {
      const double h = 1e-6;
      Vector p = psi, m = psi;
      p(A) += h;
      m(A) -= h;
      const CMatrix dU = (U(p) - U(m)) / (2.0 * h);
      const Vector col = from_rep(alg, Uinv * dU);
      EXPECT_LE((col - e.col(A)).cwiseAbs().maxCoeff(), 1e-8) << "psi=" << psi.transpose() << " A=" << A;
    }
  }
}

TEST(Chart, Su2ChristoffelsMatchFiniteDifferences) {
  const TargetChart chart = builtin_chart("su2_exponential");
  const Vector psi = Eigen::Vector3d(0.7, -0.4, 0.25);
  const double h = 1e-5;
  std::vector<Matrix> dg(3);
  for (int d = 0; d < 3; ++d) {
    Vector p = psi, m = psi;
    p(d) += h;
    m(d) -= h;
    dg[d] = (chart.metric(p) - chart.metric(m)) / (2.0 * h);
  }
  const Matrix g = chart.metric(psi), gi = g.inverse();
  const MixedTensor gt = chart.connection(psi);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) s += 0.5 * gi(a, d) * (dg[b](d, c) + dg[c](d, b) - dg[d](b, c));
        EXPECT_NEAR(gt(a, b, c), s, 1e-8);
        EXPECT_NEAR(gt(a, b, c), gt(a, c, b), 1e-14);
      }
  EXPECT_LE(torsion_from_potential(chart, psi).max_abs(), 1e-14);
}

TEST(Chart, Su2MetricAtOriginIsCartanKilling) {
  const TargetChart chart = builtin_chart("su2_exponential");
  EXPECT_LE((chart.metric(Vector::Zero(3)) - 2.0 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(chart.valid(Eigen::Vector3d(2.0, 0.0, 0.0)));
  EXPECT_FALSE(chart.valid(Eigen::Vector3d(2.9, 0.0, 0.0)));
  EXPECT_THROW(builtin_chart("hyperbolic"), ConfigError);
}

TEST(WaveMap, FlatTravelingWaveIsExactWithTorsion) {
  // phi = f(x - t) has phi_t = -phi_x, so Q(phi_t, phi_x) = 0 and the wave stays exact
  const Grid grid = Grid::make(GridKind::circle, 256, 0.0, kTwoPi);
  Coupling c;
  c.lambda = 0.1;
  c.v_y = 0.7;
  WaveMapState s{0.0, Matrix::Zero(3, grid.N), Matrix::Zero(3, grid.N)};
  for (int i = 0; i < grid.N; ++i) {
    const double x = grid.x(i);
    s.phi(0, i) = std::sin(x);
    s.phi(1, i) = 0.5 * std::cos(2.0 * x);
    s.theta(0, i) = -std::cos(x);
    s.theta(1, i) = std::sin(2.0 * x);
  }
  RunSettings rs;
  rs.T = 2.0;
  const WaveMapRun run = evolve_wavemap(WaveMapSystem(builtin_chart("flat_torsion_r3"), c, grid), s, rs);
  ASSERT_EQ(run.status, RunStatus::ok);
  const double t = run.final_state.t;
  for (int i = 0; i < grid.N; ++i) {
    EXPECT_NEAR(run.final_state.phi(0, i), std::sin(grid.x(i) - t), 1e-6);
    EXPECT_NEAR(run.final_state.phi(1, i), 0.5 * std::cos(2.0 * (grid.x(i) - t)), 1e-6);
  }
}

TEST(WaveMap, TorsionCouplesCounterPropagatingWaves) {
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  Coupling c;
  c.lambda = 0.5;
  c.v_y = 1.0;
  WaveMapState s{0.0, Matrix::Zero(3, grid.N), Matrix::Zero(3, grid.N)};
  for (int i = 0; i < grid.N; ++i) {
    s.phi(1, i) = std::sin(grid.x(i));
    s.theta(2, i) = 1.0;
  }
  const WaveMapSystem sys(builtin_chart("flat_torsion_r3"), c, grid);
  const WaveMapRates r = sys.rhs(s);
  // 2 lambda v_y Q^0_21 theta^2 phi_x^1 with Q^0_21 = eps_021 / 2 = -1/2
  for (int i = 0; i < grid.N; ++i) EXPECT_NEAR(r.dtheta(0, i), -0.5 * std::cos(grid.x(i)), 1e-5);
}

TEST(WaveMap, Su2EnergyIsConserved) {
  const Grid grid = Grid::make(GridKind::circle, 256, 0.0, kTwoPi);
  const WaveMapState s = profile_state(grid, Eigen::Vector3d(0.1, 0.2, -0.1), 0.5, 0.4);
  RunSettings rs;
  rs.T = 2.0;
  rs.diag_every = 10;
  const WaveMapRun run = evolve_wavemap(WaveMapSystem(builtin_chart("su2_exponential"), Coupling{}, grid), s, rs);
  ASSERT_EQ(run.status, RunStatus::ok);
  const double e0 = run.diagnostics.front().energy;
  for (const auto& r : run.diagnostics) EXPECT_LE(std::abs(r.energy - e0) / e0, 1e-6);
}

TEST(WaveMap, LeavingTheChartIsAnError) {
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  const WaveMapSystem sys(builtin_chart("su2_exponential"), Coupling{}, grid);
  const WaveMapState bad = profile_state(grid, Eigen::Vector3d(2.8, 0.0, 0.0), 0.3, 0.0);
  EXPECT_THROW(sys.rhs(bad), NumericalError);
  // inside the chart at t = 0, pushed out by a large velocity
  const WaveMapState fast = profile_state(grid, Eigen::Vector3d(2.0, 0.0, 0.0), 0.0, 0.0);
  WaveMapState s = fast;
  s.theta.row(0).setConstant(5.0);
  RunSettings rs;
  rs.T = 1.0;
  const WaveMapRun run = evolve_wavemap(sys, s, rs);
  EXPECT_EQ(run.status, RunStatus::error);
  EXPECT_GT(run.last_good_time, 0.0);
  EXPECT_LT(run.last_good_time, 0.2);
}

TEST(WaveMap, ProjectedFrameSatisfiesTheFrameEquations) {
  const auto alg = builtin_algebra("su2");
  const auto geom = make_geometry(alg, cartan_killing(alg), Matrix::Zero(3, 3));
  const TargetChart chart = builtin_chart("su2_exponential");
  auto residual = [&](int N) {
    const Grid grid = Grid::make(GridKind::circle, N, 0.0, kTwoPi);
    const WaveMapSystem sys(chart, Coupling{}, grid);
    WaveMapState s = profile_state(grid, Eigen::Vector3d(0.1, 0.2, -0.1), 0.5, 0.4);
    const double dt = 0.5 * grid.dx();
    std::vector<FrameState> w;
    for (int k = 0; k < 5; ++k) {
      w.push_back(frame_projection(s, chart, grid));
      s = rk4_step(sys, s, dt);
    }
    const FrameRates r = frame_equation_residuals(std::span<const FrameState>(w), FrameSystem(alg, geom, Coupling{}, grid));
    return std::max(r.dE.cwiseAbs().maxCoeff(), r.dB.cwiseAbs().maxCoeff());
  };
  const double r1 = residual(64), r2 = residual(128);
  EXPECT_LT(r1, 1e-3);
  EXPECT_GT(std::log2(r1 / r2), 3.5);
}
