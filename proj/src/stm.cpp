#include "vem/stm.hpp"

#include <string>

#include "vem/errors.hpp"
#include "vem/propagate.hpp"

namespace vem {

FundamentalSet fundamental_set(const OcpProblem& p, const Trajectory& tr, const Grid& grid) {
    const int n = p.n, N = grid.N;
    if (tr.x.cols() != N || tr.u.cols() != N) throw ShapeError("trajectory does not match grid");
    const ControlInterpolant ui(tr.u, grid);
    const StateInterpolant xi(p, tr.x, tr.u, grid);
    StageRhs rhs = [&](const Vec& y, double t, int k, double th) {
        const Mat fx = p.fx(xi.eval_in(k, th), ui.eval_in(k, th), t);
        const Eigen::Map<const Mat> M(y.data(), n, n);
        Mat d = fx * M;
        return Vec(Eigen::Map<const Vec>(d.data(), n * n));
    };
    const Mat I = Mat::Identity(n, n);
    const GridSeries path = rk4_path(rhs, Eigen::Map<const Vec>(I.data(), n * n), grid, Direction::Forward);
    FundamentalSet fs;
    fs.M.resize(N);
    fs.Minv.resize(N);
    fs.cond_max = 1.0;
    for (int i = 0; i < N; ++i) {
        fs.M[i] = Eigen::Map<const Mat>(path.col(i).data(), n, n);
        fs.Minv[i] = Eigen::PartialPivLU<Mat>(fs.M[i]).inverse();
        if (!fs.Minv[i].allFinite()) throw IllConditionedTransition("singular fundamental matrix at node " + std::to_string(i));
        const double c = fs.M[i].lpNorm<1>() * fs.Minv[i].lpNorm<1>();
        fs.cond_max = std::max(fs.cond_max, c);
    }
    fs.M[0] = I;
    fs.Minv[0] = I;
    if (fs.cond_max > kMaxTransitionCond)
        throw IllConditionedTransition("fundamental matrix condition " + std::to_string(fs.cond_max) + " exceeds 1e8");
    return fs;
}

Mat phi(const FundamentalSet& fs, int i, int j) {
    if (i < 0 || j < 0 || i >= fs.N() || j >= fs.N())
        throw IndexError("transition index out of range: (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    if (i == j) return Mat::Identity(fs.M[i].rows(), fs.M[i].cols());
    return fs.M[i] * fs.Minv[j];
}

GridSeries control_sensitivity_apply(const FundamentalSet& fs, const OcpProblem& p, const Trajectory& tr,
                                     const Grid& grid, const GridSeries& du) {
    const int N = grid.N;
    if (du.rows() != p.m || du.cols() != N || fs.N() != N) throw ShapeError("perturbation does not match grid");
    GridSeries src(p.n, N);
    for (int j = 0; j < N; ++j)
        src.col(j) = fs.Minv[j] * (p.fu(tr.x.col(j), tr.u.col(j), grid.t(j)) * du.col(j));
    const GridSeries cum = cumtrapz(src, grid, Direction::Forward);
    GridSeries out(p.n, N);
    for (int i = 0; i < N; ++i) out.col(i) = fs.M[i] * cum.col(i);
    return out;
}

}  // namespace vem
