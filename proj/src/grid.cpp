#include "vem/grid.hpp"

#include <cmath>
#include <string>

#include "vem/errors.hpp"

namespace vem {

double Grid::t(int i) const {
    if (i == N - 1) return tf;
    if (i == 0) return t0;
    return t0 + (tf - t0) * i / (N - 1);
}

Vec Grid::times() const {
    Vec out(N);
    for (int i = 0; i < N; ++i) out[i] = t(i);
    return out;
}

Grid make_grid(int N, double t0, double tf) {
    if (N < 3) throw GridTooSmall("grid needs at least 3 nodes, got " + std::to_string(N));
    if (!(tf > t0) || !std::isfinite(t0) || !std::isfinite(tf))
        throw BadHorizon("horizon must satisfy tf > t0");
    Grid g;
    g.N = N;
    g.t0 = t0;
    g.tf = tf;
    g.s.resize(N);
    for (int i = 0; i < N; ++i) g.s[i] = static_cast<double>(i) / (N - 1);
    g.s[N - 1] = 1.0;
    return g;
}

Vec trapz_weights(const Grid& grid) {
    const double h = grid.h();
    Vec w = Vec::Constant(grid.N, h);
    w[0] = w[grid.N - 1] = 0.5 * h;
    return w;
}

static void check_cols(const GridSeries& s, const Grid& g) {
    if (s.cols() != g.N)
        throw ShapeError("series has " + std::to_string(s.cols()) + " columns, grid has " +
                         std::to_string(g.N) + " nodes");
}

Vec trapz(const GridSeries& series, const Grid& grid) {
    check_cols(series, grid);
    const double h = grid.h();
    Vec acc = Vec::Zero(series.rows());
    for (int i = 0; i + 1 < grid.N; ++i) acc += 0.5 * h * (series.col(i) + series.col(i + 1));
    return acc;
}

GridSeries cumtrapz(const GridSeries& series, const Grid& grid, Direction dir) {
    check_cols(series, grid);
    const double h = grid.h();
    GridSeries out = GridSeries::Zero(series.rows(), grid.N);
    if (dir == Direction::Forward) {
        for (int i = 1; i < grid.N; ++i)
            out.col(i) = out.col(i - 1) + 0.5 * h * (series.col(i - 1) + series.col(i));
    } else {
        for (int i = grid.N - 2; i >= 0; --i)
            out.col(i) = out.col(i + 1) + 0.5 * h * (series.col(i) + series.col(i + 1));
    }
    return out;
}

GridSeries time_derivative(const GridSeries& y, const Grid& grid) {
    check_cols(y, grid);
    const int N = grid.N;
    const double h = grid.h();
    GridSeries d(y.rows(), N);
    d.col(0) = (-3.0 * y.col(0) + 4.0 * y.col(1) - y.col(2)) / (2.0 * h);
    for (int i = 1; i + 1 < N; ++i) d.col(i) = (y.col(i + 1) - y.col(i - 1)) / (2.0 * h);
    d.col(N - 1) = (3.0 * y.col(N - 1) - 4.0 * y.col(N - 2) + y.col(N - 3)) / (2.0 * h);
    return d;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

void require_finite(const Mat& m, const char* what, int node) {
    if (!m.allFinite()) throw NonFiniteEvaluation(std::string("non-finite ") + what, node, what);
}

GridSeries rk4_path(const StageRhs& rhs, const Vec& y0, const Grid& grid, Direction dir, int substeps) {
    if (substeps < 1) substeps = 1;
    const int N = grid.N;
    GridSeries out(y0.size(), N);
    const bool fwd = dir == Direction::Forward;
    int node = fwd ? 0 : N - 1;
    out.col(node) = y0;
    require_finite(y0, "initial value", node);
    Vec y = y0;
    for (int step = 0; step + 1 < N; ++step) {
        const int k = fwd ? step : N - 2 - step;  // interval [t_k, t_{k+1}]
        const double tk = grid.t(k);
        const double h = grid.h();
        const double dt = (fwd ? h : -h) / substeps;
        const double dth = (fwd ? 1.0 : -1.0) / substeps;
        for (int j = 0; j < substeps; ++j) {
            const double th = fwd ? static_cast<double>(j) / substeps
                                  : 1.0 - static_cast<double>(j) / substeps;
            const double t = fwd ? tk + h * th : (j == 0 ? grid.t(k + 1) : tk + h * th);
            const Vec k1 = rhs(y, t, k, th);
            const Vec k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt, k, th + 0.5 * dth);
            const Vec k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt, k, th + 0.5 * dth);
            const Vec k4 = rhs(y + dt * k3, t + dt, k, th + dth);
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        node = fwd ? k + 1 : k;
        if (!y.allFinite()) throw NonFiniteEvaluation("rk4_path state", node, "state");
        out.col(node) = y;
    }
    return out;
}

GridSeries rk4_path(const Rhs& rhs, const Vec& y0, const Grid& grid, Direction dir, int substeps) {
    StageRhs staged = [&rhs](const Vec& y, double t, int, double) { return rhs(y, t); };
    return rk4_path(staged, y0, grid, dir, substeps);
}

}  // namespace vem
