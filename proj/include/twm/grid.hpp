#pragma once

// Uniform 1-D grids, finite-difference derivatives and quadrature.
// Fields are stored as n x N matrices: one column per grid point.

#include "twm/errors.hpp"
#include "twm/tensor.hpp"

#include <cmath>
#include <span>
#include <string>

namespace twm {

enum class GridKind { circle, line };

inline std::string to_string(GridKind k) { return k == GridKind::circle ? "circle" : "line_compact"; }

inline GridKind grid_kind_from_string(const std::string& s) {
  if (s == "circle") return GridKind::circle;
  if (s == "line_compact" || s == "line") return GridKind::line;
  throw ConfigError("grid.kind must be 'circle' or 'line_compact', got '" + s + "'");
}

struct Grid {
  GridKind kind = GridKind::circle;
  int N = 0;
  double x0 = 0.0;
  double L = 0.0;

  /// Circle: x0 + L is identified with x0 and is not a grid point. Line: both endpoints are.
  static Grid make(GridKind kind, int N, double x0, double L) {
    if (N < 16) throw ConfigError("grid.N must be at least 16");
    if (!(L > 0.0)) throw ConfigError("grid.length must be positive");
    return Grid{kind, N, x0, L};
  }

  double dx() const { return kind == GridKind::circle ? L / N : L / (N - 1); }
  double x(int i) const { return x0 + i * dx(); }
  bool periodic() const { return kind == GridKind::circle; }

  /// Same domain with twice the resolution (h -> h/2). Line grids keep both endpoints.
  Grid refined() const { return Grid{kind, periodic() ? 2 * N : 2 * N - 1, x0, L}; }
};

enum class FdOrder { second = 2, fourth = 4 };

namespace detail {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

}  // namespace detail

/// d/dx of each row of f. Central stencils; periodic wrap on the circle,
/// one-sided closures of the same order at the ends of a line.
inline Matrix ddx(const Grid& grid, const Matrix& f, FdOrder order = FdOrder::fourth) {
  const int N = grid.N;
  const double h = grid.dx();
  Matrix out(f.rows(), N);
  auto at = [&](int r, int i) { return f(r, grid.periodic() ? detail::wrap(i, N) : i); };
  for (int r = 0; r < f.rows(); ++r) {
    for (int i = 0; i < N; ++i) {
      double d;
      const bool interior4 = grid.periodic() || (i >= 2 && i <= N - 3);
      const bool interior2 = grid.periodic() || (i >= 1 && i <= N - 2);
      if (order == FdOrder::fourth) {
        if (interior4) {
          d = (-at(r, i + 2) + 8.0 * at(r, i + 1) - 8.0 * at(r, i - 1) + at(r, i - 2)) / (12.0 * h);
        } else if (i == 0) {
          d = (-25.0 * f(r, 0) + 48.0 * f(r, 1) - 36.0 * f(r, 2) + 16.0 * f(r, 3) - 3.0 * f(r, 4)) / (12.0 * h);
        } else if (i == 1) {
          d = (-3.0 * f(r, 0) - 10.0 * f(r, 1) + 18.0 * f(r, 2) - 6.0 * f(r, 3) + f(r, 4)) / (12.0 * h);
        } else if (i == N - 2) {
          d = (3.0 * f(r, N - 1) + 10.0 * f(r, N - 2) - 18.0 * f(r, N - 3) + 6.0 * f(r, N - 4) - f(r, N - 5)) /
              (12.0 * h);
        } else {
          d = (25.0 * f(r, N - 1) - 48.0 * f(r, N - 2) + 36.0 * f(r, N - 3) - 16.0 * f(r, N - 4) +
               3.0 * f(r, N - 5)) /
              (12.0 * h);
        }
      } else {
        if (interior2) {
          d = (at(r, i + 1) - at(r, i - 1)) / (2.0 * h);
        } else if (i == 0) {
          d = (-3.0 * f(r, 0) + 4.0 * f(r, 1) - f(r, 2)) / (2.0 * h);
        } else {
          d = (3.0 * f(r, N - 1) - 4.0 * f(r, N - 2) + f(r, N - 3)) / (2.0 * h);
        }
      }
      out(r, i) = d;
    }
  }
  return out;
}

/// d^2/dx^2 of each row of f, same boundary treatment as ddx.
inline Matrix d2dx2(const Grid& grid, const Matrix& f, FdOrder order = FdOrder::fourth) {
  const int N = grid.N;
  const double h2 = grid.dx() * grid.dx();
  Matrix out(f.rows(), N);
  auto at = [&](int r, int i) { return f(r, grid.periodic() ? detail::wrap(i, N) : i); };
  for (int r = 0; r < f.rows(); ++r) {
    for (int i = 0; i < N; ++i) {
      double d;
      if (order == FdOrder::fourth) {
        if (grid.periodic() || (i >= 2 && i <= N - 3)) {
          d = (-at(r, i + 2) + 16.0 * at(r, i + 1) - 30.0 * at(r, i) + 16.0 * at(r, i - 1) - at(r, i - 2)) /
              (12.0 * h2);
        } else {
          // one-sided 6-point closures, mirrored at the right end
          const bool left = i < 2;
          auto g = [&](int k) { return left ? f(r, k) : f(r, N - 1 - k); };
          const int j = left ? i : N - 1 - i;
          if (j == 0)
            d = (45.0 * g(0) - 154.0 * g(1) + 214.0 * g(2) - 156.0 * g(3) + 61.0 * g(4) - 10.0 * g(5)) /
                (12.0 * h2);
          else
            d = (10.0 * g(0) - 15.0 * g(1) - 4.0 * g(2) + 14.0 * g(3) - 6.0 * g(4) + g(5)) / (12.0 * h2);
        }
      } else {
        if (grid.periodic() || (i >= 1 && i <= N - 2)) {
          d = (at(r, i + 1) - 2.0 * at(r, i) + at(r, i - 1)) / h2;
        } else {
          const bool left = i == 0;
          auto g = [&](int k) { return left ? f(r, k) : f(r, N - 1 - k); };
          d = (2.0 * g(0) - 5.0 * g(1) + 4.0 * g(2) - g(3)) / h2;
        }
      }
      out(r, i) = d;
    }
  }
  return out;
}

/// Rectangle rule on the circle, trapezoid on the line.
inline double integrate(const Grid& grid, const Eigen::Ref<const Eigen::RowVectorXd>& density) {
  double s = density.sum();
  if (!grid.periodic()) s -= 0.5 * (density(0) + density(grid.N - 1));
  return s * grid.dx();
}

/// Time derivative at the centre of a window of equally spaced samples:
/// 3 samples -> second order, 5 samples -> fourth order.
inline Matrix central_time_derivative(std::span<const Matrix* const> window, double dt) {
  if (window.size() == 3) return (*window[2] - *window[0]) / (2.0 * dt);
  if (window.size() == 5)
    return (-*window[4] + 8.0 * *window[3] - 8.0 * *window[1] + *window[0]) / (12.0 * dt);
  throw ConfigError("time derivative needs a window of 3 or 5 samples");
}

/// Midpoint of the interval between samples k and k+1 from four neighbours (cubic interpolation).
/// `position` selects the stencil: 0 -> samples (k, k+1, k+2, k+3), 1 -> (k-1..k+2), 2 -> (k-2..k+1).
inline constexpr double kMidpointWeights[3][4] = {
    {5.0 / 16, 15.0 / 16, -5.0 / 16, 1.0 / 16},
    {-1.0 / 16, 9.0 / 16, 9.0 / 16, -1.0 / 16},
    {1.0 / 16, -5.0 / 16, 15.0 / 16, 5.0 / 16},
};

}  // namespace twm
