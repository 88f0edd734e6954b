#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace twm;

namespace {

double derivative_error(GridKind kind, int N, FdOrder order, bool second) {
  const double L = kind == GridKind::circle ? 2.0 * std::numbers::pi : 2.0;
  const Grid grid = Grid::make(kind, N, 0.0, L);
  Matrix f(1, N), exact(1, N);
  for (int i = 0; i < N; ++i) {
    const double x = grid.x(i);
    f(0, i) = std::sin(2.0 * x) + std::cos(x);
    exact(0, i) = second ? -4.0 * std::sin(2.0 * x) - std::cos(x) : 2.0 * std::cos(2.0 * x) - std::sin(x);
  }
  const Matrix d = second ? d2dx2(grid, f, order) : ddx(grid, f, order);
  return (d - exact).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Grid, SpacingAndRefinement) {
  const Grid c = Grid::make(GridKind::circle, 64, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(c.dx(), 2.0 / 64);
  EXPECT_EQ(c.refined().N, 128);
  const Grid l = Grid::make(GridKind::line, 65, 0.0, 2.0);
  EXPECT_DOUBLE_EQ(l.dx(), 2.0 / 64);
  EXPECT_EQ(l.refined().N, 129);
  EXPECT_DOUBLE_EQ(l.refined().dx(), l.dx() / 2);
  EXPECT_THROW(Grid::make(GridKind::circle, 8, 0.0, 1.0), ConfigError);
  EXPECT_THROW(Grid::make(GridKind::circle, 64, 0.0, 0.0), ConfigError);
  EXPECT_THROW(grid_kind_from_string("torus"), ConfigError);
}

TEST(Grid, FirstDerivativeOrders) {
  for (auto kind : {GridKind::circle, GridKind::line})
    for (auto [order, expect] : {std::pair{FdOrder::second, 2.0}, std::pair{FdOrder::fourth, 4.0}}) {
      const int N = kind == GridKind::circle ? 64 : 65;
      const double e1 = derivative_error(kind, N, order, false);
      const double e2 = derivative_error(kind, kind == GridKind::circle ? 2 * N : 2 * N - 1, order, false);
      EXPECT_GT(std::log2(e1 / e2), expect - 0.3) << to_string(kind) << " order " << static_cast<int>(order);
    }
}

TEST(Grid, SecondDerivativeOrders) {
  for (auto kind : {GridKind::circle, GridKind::line})
    for (auto [order, expect] : {std::pair{FdOrder::second, 2.0}, std::pair{FdOrder::fourth, 4.0}}) {
      const int N = kind == GridKind::circle ? 64 : 65;
      const double e1 = derivative_error(kind, N, order, true);
      const double e2 = derivative_error(kind, kind == GridKind::circle ? 2 * N : 2 * N - 1, order, true);
      EXPECT_GT(std::log2(e1 / e2), expect - 0.5) << to_string(kind) << " order " << static_cast<int>(order);
    }
}

TEST(Grid, StencilsAreExactOnLowDegreePolynomials) {
  const Grid grid = Grid::make(GridKind::line, 33, -1.0, 2.0);
  Matrix f(1, grid.N);
  for (int i = 0; i < grid.N; ++i) f(0, i) = std::pow(grid.x(i), 3) - grid.x(i);
  const Matrix d = ddx(grid, f, FdOrder::fourth);
  for (int i = 0; i < grid.N; ++i) EXPECT_NEAR(d(0, i), 3.0 * grid.x(i) * grid.x(i) - 1.0, 1e-12);
}

TEST(Grid, Quadrature) {
  const Grid c = Grid::make(GridKind::circle, 32, 0.0, 2.0 * std::numbers::pi);
  Eigen::RowVectorXd s(c.N);
  for (int i = 0; i < c.N; ++i) s(i) = std::sin(c.x(i)) * std::sin(c.x(i));
  EXPECT_NEAR(integrate(c, s), std::numbers::pi, 1e-13);
  const Grid l = Grid::make(GridKind::line, 101, 0.0, 1.0);
  Eigen::RowVectorXd lin(l.N);
  for (int i = 0; i < l.N; ++i) lin(i) = 2.0 * l.x(i) + 1.0;
  EXPECT_NEAR(integrate(l, lin), 2.0, 1e-13);
}

TEST(Grid, CentralTimeDerivative) {
  const double dt = 0.1;
  std::vector<Matrix> q;
  for (int k = -2; k <= 2; ++k) q.push_back(Matrix::Constant(1, 1, std::pow(1.0 + k * dt, 4)));
  const std::vector<const Matrix*> five{&q[0], &q[1], &q[2], &q[3], &q[4]};
  const std::vector<const Matrix*> three{&q[1], &q[2], &q[3]};
  EXPECT_NEAR(central_time_derivative(five, dt)(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(central_time_derivative(three, dt)(0, 0), 4.0 + 4.0 * dt * dt, 1e-12);
  const std::vector<const Matrix*> two{&q[0], &q[1]};
  EXPECT_THROW(central_time_derivative(two, dt), ConfigError);
}

TEST(Grid, MidpointWeightsReproduceCubics) {
  for (int row = 0; row < 3; ++row) {
    const int start = -row;
    double v = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double x = start + q;
      v += kMidpointWeights[row][q] * (x * x * x - 2.0 * x + 1.0);
    }
    EXPECT_NEAR(v, 0.125 - 1.0 + 1.0, 1e-14) << row;
  }
}
