#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace twm;
using namespace twm::test;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Su2Setup {
  LieAlgebraSpec alg = builtin_algebra("su2");
  TargetGeometry geom;
  Coupling c;
  FrameProfile prof;

  Su2Setup() {
    Matrix p = Matrix::Zero(3, 3);
    p(0, 1) = 1.0;
    p(1, 0) = -1.0;
    geom = make_geometry(alg, cartan_killing(alg), p);
    c.lambda = 0.1;
    c.v_t = 1.0;
    c.v_x = 0.3;
    c.v_y = 0.7;
    prof.E = {{2, 2.0, 1.8, 0.4, BumpShape::dbump}};
    prof.B = {{0, 3.0, 1.6, 0.3, BumpShape::bump}, {1, 4.2, 2.0, 0.25, BumpShape::bump}};
    prof.H0 = Vector::Zero(3);
    prof.H0 << 0.2, 0.1, 0.3;
  }
};

}  // namespace

TEST(InitialData, BumpShapes) {
  EXPECT_DOUBLE_EQ(bump(0.0), 1.0);
  EXPECT_EQ(bump(1.0), 0.0);
  EXPECT_EQ(bump(-1.5), 0.0);
  for (double s : {-0.7, -0.2, 0.1, 0.55, 0.9}) {
    const double h = 1e-6;
    EXPECT_NEAR(dbump(s), (bump(s + h) - bump(s - h)) / (2 * h), 1e-6) << s;
  }
  double mean = 0.0;
  const int m = 20000;
  for (int i = 0; i < m; ++i) mean += dbump(-1.0 + (i + 0.5) * 2.0 / m);
  EXPECT_NEAR(mean / m, 0.0, 1e-12);
}

TEST(InitialData, ProfilesWrapOnTheCircle) {
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  const std::vector<Bump> b{{0, 0.1, 0.5, 1.0, BumpShape::bump}};
  EXPECT_NEAR(evaluate_profile(b, 1, kTwoPi - 0.1, grid)(0), bump(-0.4), 1e-14);
}

TEST(InitialData, SatisfiesTheConstraintAtSchemeOrder) {
  Su2Setup su;
  double prev = 0.0;
  for (int N : {256, 512, 1024}) {
    const Grid grid = Grid::make(GridKind::circle, N, 0.0, kTwoPi);
    const FrameState s = make_initial_data(su.prof, su.alg, su.c, grid);
    const double r = constraint_residual(s, su.alg, su.c, grid).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_GT(std::log2(prev / r), 3.5) << N;
    prev = r;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(InitialData, RejectsNonPeriodicConstraintOnTheCircle) {
  Su2Setup su;
  su.prof.E.push_back({0, 4.0, 1.0, 0.8, BumpShape::bump});
  const Grid grid = Grid::make(GridKind::circle, 128, 0.0, kTwoPi);
  EXPECT_THROW(make_initial_data(su.prof, su.alg, su.c, grid), DataError);
  const Grid line = Grid::make(GridKind::line, 129, 0.0, 8.0);
  EXPECT_NO_THROW(make_initial_data(su.prof, su.alg, su.c, line));
}

TEST(InitialData, RejectsBadBumps) {
  Su2Setup su;
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  su.prof.B.push_back({3, 1.0, 1.0, 1.0, BumpShape::bump});
  EXPECT_THROW(make_initial_data(su.prof, su.alg, su.c, grid), ConfigError);
  su.prof.B.back() = {0, 1.0, -1.0, 1.0, BumpShape::bump};
  EXPECT_THROW(make_initial_data(su.prof, su.alg, su.c, grid), ConfigError);
  su.prof.B.back() = {0, 1.0, 4.0, 1.0, BumpShape::bump};
  EXPECT_THROW(make_initial_data(su.prof, su.alg, su.c, grid), ConfigError);
}

TEST(FrameSolver, AbelianEvolutionMatchesDAlembert) {
  const auto alg = builtin_algebra("abelian(1)");
  const auto geom = make_geometry(alg, Matrix::Identity(1, 1), Matrix::Zero(1, 1));
  const Grid grid = Grid::make(GridKind::circle, 256, 0.0, kTwoPi);
  FrameState s = FrameState::zero(1, grid.N);
  for (int i = 0; i < grid.N; ++i) {
    s.E(0, i) = std::sin(grid.x(i));
    s.B(0, i) = 0.5 * std::cos(2.0 * grid.x(i));
  }
  RunSettings rs;
  rs.T = 3.0;
  const FrameRun run = evolve(FrameSystem(alg, geom, Coupling{}, grid), s, rs);
  ASSERT_EQ(run.status, RunStatus::ok);
  const double t = run.final_state.t;
  EXPECT_NEAR(t, 3.0, 1e-12);
  for (int i = 0; i < grid.N; ++i) {
    const double x = grid.x(i);
    // u_t = B, u_x = E with E + B moving left, E - B moving right
    const double plus = std::sin(x + t) + 0.5 * std::cos(2.0 * (x + t));
    const double minus = std::sin(x - t) - 0.5 * std::cos(2.0 * (x - t));
    // 4th-order phase error of cos 2x at N = 256 is a few 1e-7 by t = 3
    EXPECT_NEAR(run.final_state.E(0, i), 0.5 * (plus + minus), 1e-6);
    EXPECT_NEAR(run.final_state.B(0, i), 0.5 * (plus - minus), 1e-6);
  }
}

TEST(FrameSolver, Su2RunConservesEnergyAndConstraint) {
  Su2Setup su;
  const Grid grid = Grid::make(GridKind::circle, 256, 0.0, kTwoPi);
  const FrameState s0 = make_initial_data(su.prof, su.alg, su.c, grid);
  RunSettings rs;
  rs.T = 2.0;
  rs.diag_every = 5;
  const FrameRun run = evolve(FrameSystem(su.alg, su.geom, su.c, grid), s0, rs);
  ASSERT_EQ(run.status, RunStatus::ok);
  ASSERT_GE(run.diagnostics.size(), 3u);
  const double e0 = run.diagnostics.front().energy;
  for (const auto& r : run.diagnostics) {
    EXPECT_LE(std::abs(r.energy - e0) / e0, 1e-5);
    EXPECT_LE(r.max_constraint, 1e-3);
    EXPECT_TRUE(r.finite());
  }
  EXPECT_NEAR(run.diagnostics.back().t, 2.0, 1e-12);
}

TEST(FrameSolver, SnapshotsAndObserver) {
  Su2Setup su;
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  const FrameState s0 = make_initial_data(su.prof, su.alg, su.c, grid);
  RunSettings rs;
  rs.T = 1.0;
  rs.snapshot_every = 4;
  int seen = 0;
  const FrameRun run = evolve(FrameSystem(su.alg, su.geom, su.c, grid), s0, rs, [&](const FrameState&, int) { ++seen; });
  EXPECT_EQ(seen, run.steps + 1);
  EXPECT_EQ(run.snapshots.front().t, 0.0);
  EXPECT_DOUBLE_EQ(run.snapshots.back().t, 1.0);
  EXPECT_NEAR(run.snapshots[1].t, 4 * run.dt, 1e-14);
}

TEST(FrameSolver, CeilingReportsBlowup) {
  Su2Setup su;
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  const FrameState s0 = make_initial_data(su.prof, su.alg, su.c, grid);
  RunSettings rs;
  rs.T = 1.0;
  rs.ceiling = 1e-3;
  const FrameRun run = evolve(FrameSystem(su.alg, su.geom, su.c, grid), s0, rs);
  EXPECT_EQ(run.status, RunStatus::blowup_suspected);
  EXPECT_EQ(run.steps, 1);
  EXPECT_FALSE(run.message.empty());
  EXPECT_FALSE(run.diagnostics.empty());
}

TEST(FrameSolver, NonFiniteDataIsAnError) {
  Su2Setup su;
  const Grid grid = Grid::make(GridKind::circle, 64, 0.0, kTwoPi);
  FrameState s0 = make_initial_data(su.prof, su.alg, su.c, grid);
  s0.E(0, 3) = std::numeric_limits<double>::infinity();
  RunSettings rs;
  rs.T = 1.0;
  EXPECT_THROW(evolve(FrameSystem(su.alg, su.geom, su.c, grid), s0, rs), NumericalError);
}

TEST(FrameSolver, CflLimits) {
  EXPECT_THROW(check_cfl(0.1, 0.1, 0.5), ConfigError);
  EXPECT_NO_THROW(check_cfl(0.05, 0.1, 0.5));
  EXPECT_THROW(step_count(1.0, 0.1, 1.2), ConfigError);
  EXPECT_EQ(step_count(1.0, 0.1, 0.5), 20);
  EXPECT_EQ(step_count(0.0, 0.1, 0.5), 0);
}
