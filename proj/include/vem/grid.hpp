#pragma once

#include <Eigen/Dense>
#include <functional>

namespace vem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// d×N, one column per node
using GridSeries = Mat;

enum class Direction { Forward, Backward };

struct Grid {
    int N = 0;
    double t0 = 0.0;
    double tf = 1.0;
    Vec s;

    double span() const { return tf - t0; }
    double h() const { return (tf - t0) / (N - 1); }
    double t(int i) const;
    Vec times() const;
};

Grid make_grid(int N, double t0, double tf);

// composite trapezoid weights, sum = tf - t0
Vec trapz_weights(const Grid& grid);
Vec trapz(const GridSeries& series, const Grid& grid);
GridSeries cumtrapz(const GridSeries& series, const Grid& grid, Direction dir);

// d/dt along the grid: central inside, second-order one-sided at both ends
GridSeries time_derivative(const GridSeries& series, const Grid& grid);

using Rhs = std::function<Vec(const Vec& y, double t)>;
// k is the interval index, theta the position inside it (0 at t_k, 1 at t_{k+1})
using StageRhs = std::function<Vec(const Vec& y, double t, int k, double theta)>;

GridSeries rk4_path(const Rhs& rhs, const Vec& y0, const Grid& grid, Direction dir, int substeps = 1);
GridSeries rk4_path(const StageRhs& rhs, const Vec& y0, const Grid& grid, Direction dir, int substeps = 1);

bool all_finite(const Mat& m);
void require_finite(const Mat& m, const char* what, int node = -1);

}  // namespace vem
