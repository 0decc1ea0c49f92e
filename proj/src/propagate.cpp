#include "vem/propagate.hpp"

#include <algorithm>
#include <cmath>

#include "vem/errors.hpp"
#include "vem/stm.hpp"

namespace vem {

namespace {

// solves the [1 4 1] tridiagonal system column-wise, in place
void solve_141(Mat& rhs) {
    const int n = static_cast<int>(rhs.cols());
    if (n == 0) return;
    std::vector<double> cp(n);
    cp[0] = 1.0 / 4.0;
    rhs.col(0) /= 4.0;
    for (int i = 1; i < n; ++i) {
        const double den = 4.0 - cp[i - 1];
        cp[i] = 1.0 / den;
        rhs.col(i) = (rhs.col(i) - rhs.col(i - 1)) / den;
    }
    for (int i = n - 2; i >= 0; --i) rhs.col(i) -= cp[i] * rhs.col(i + 1);
}

}  // namespace

int interval_of(const Grid& grid, double t) {
    const int k = static_cast<int>(std::floor((t - grid.t0) / grid.h()));
    return std::clamp(k, 0, grid.N - 2);
}

ControlInterpolant::ControlInterpolant(const GridSeries& u, const Grid& grid) : u_(u), grid_(grid) {
    if (u.cols() != grid.N) throw ShapeError("control series does not match grid");
    require_finite(u, "control");
    const int N = grid.N;
    c_ = GridSeries::Zero(u.rows(), N);
    Mat r(u.rows(), N - 2);
    for (int k = 1; k + 1 < N; ++k) r.col(k - 1) = 6.0 * (u.col(k + 1) - 2.0 * u.col(k) + u.col(k - 1));
    solve_141(r);
    c_.middleCols(1, N - 2) = r;
}

Vec ControlInterpolant::eval_in(int k, double th) const {
    const double A = 1.0 - th, B = th;
    return A * u_.col(k) + B * u_.col(k + 1) + ((A * A * A - A) * c_.col(k) + (B * B * B - B) * c_.col(k + 1)) / 6.0;
}

Vec ControlInterpolant::eval(double t) const {
    const int k = interval_of(grid_, t);
    return eval_in(k, (t - grid_.t(k)) / grid_.h());
}

void ControlInterpolant::Adjoint::add(int k, double th, const Vec& ubar) {
    const double A = 1.0 - th, B = th;
    node_.col(k) += A * ubar;
    node_.col(k + 1) += B * ubar;
    curv_.col(k) += (A * A * A - A) / 6.0 * ubar;
    curv_.col(k + 1) += (B * B * B - B) / 6.0 * ubar;
}

GridSeries ControlInterpolant::Adjoint::finalize() const {
    const int N = static_cast<int>(node_.cols());
    GridSeries out = node_;
    Mat r = curv_.middleCols(1, N - 2);
    solve_141(r);
    for (int j = 1; j + 1 < N; ++j) {
        out.col(j - 1) += 6.0 * r.col(j - 1);
        out.col(j) -= 12.0 * r.col(j - 1);
        out.col(j + 1) += 6.0 * r.col(j - 1);
    }
    return out;
}

StateInterpolant::StateInterpolant(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Grid& grid)
    : x_(x), F_(p.n, grid.N), grid_(grid) {
    for (int i = 0; i < grid.N; ++i) F_.col(i) = p.f(x.col(i), u.col(i), grid.t(i));
    require_finite(F_, "f at nodes");
}

Vec StateInterpolant::eval_in(int k, double th) const {
    const double h = grid_.h();
    const double t2 = th * th, t3 = t2 * th;
    return (2 * t3 - 3 * t2 + 1) * x_.col(k) + (t3 - 2 * t2 + th) * h * F_.col(k) + (-2 * t3 + 3 * t2) * x_.col(k + 1) +
           (t3 - t2) * h * F_.col(k + 1);
}

GridSeries propagate_states(const OcpProblem& p, const ControlInterpolant& u, const Grid& grid, int substeps) {
    StageRhs rhs = [&](const Vec& y, double t, int k, double th) { return p.f(y, u.eval_in(k, th), t); };
    return rk4_path(rhs, p.x0, grid, Direction::Forward, substeps);
}

Vec costate_terminal(const OcpProblem& p, const Vec& x_tf, double tf, const Vec& pi) {
    Vec lam = p.phix(x_tf, tf);
    if (p.q_eff() > 0) lam += p.gx(x_tf, tf).transpose() * pi;
    return lam;
}

GridSeries propagate_costates(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Vec& pi,
                              const Grid& grid, int substeps) {
    const ControlInterpolant ui(u, grid);
    const StateInterpolant xi(p, x, u, grid);
    StageRhs rhs = [&](const Vec& lam, double t, int k, double th) {
        const Vec xs = xi.eval_in(k, th), us = ui.eval_in(k, th);
        return Vec(-(p.Lx(xs, us, t) + p.fx(xs, us, t).transpose() * lam));
    };
    const int L = grid.N - 1;
    return rk4_path(rhs, costate_terminal(p, x.col(L), grid.tf, pi), grid, Direction::Backward, substeps);
}

GridSeries costates_explicit(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Vec& pi,
                             const FundamentalSet& fs, const Grid& grid) {
    if (fs.N() != grid.N) throw ShapeError("fundamental set does not match grid");
    const int N = grid.N, L = N - 1;
    GridSeries src(p.n, N);
    for (int j = 0; j < N; ++j)
        src.col(j) = fs.M[j].transpose() * lbar_derivs(p, x.col(j), u.col(j), grid.t(j)).Lx;
    const GridSeries back = cumtrapz(src, grid, Direction::Backward);
    Vec end = Vec::Zero(p.n);
    if (p.q_eff() > 0) end = fs.M[L].transpose() * (p.gx(x.col(L), grid.tf).transpose() * pi);
    GridSeries lam(p.n, N);
    for (int i = 0; i < N; ++i)
        lam.col(i) = p.phix(x.col(i), grid.t(i)) + fs.Minv[i].transpose() * (end + back.col(i));
    require_finite(lam, "explicit costate");
    return lam;
}

LbarDerivs lbar_derivs(const OcpProblem& p, const Vec& x, const Vec& u, double t) {
    const Vec f = p.f(x, u, t);
    const Mat fx = p.fx(x, u, t), fu = p.fu(x, u, t);
    const Vec px = p.phix(x, t);
    const Mat pxx = p.phixx(x, t);
    LbarDerivs d;
    d.Lbar = p.phit(x, t) + px.dot(f) + p.L(x, u, t);
    d.Lx = p.phixt(x, t) + pxx * f + fx.transpose() * px + p.Lx(x, u, t);
    d.Lxu = pxx * fu + p.Hux(x, px, u, t).transpose();
    // third derivatives of φ only enter through φ_xx f and φ_xt
    Mat T3(p.n, p.n);
    Vec a = x;
    for (int j = 0; j < p.n; ++j) {
        const double e = fd_step(x[j]);
        a[j] = x[j] + e;
        const Vec plus = p.phixx(a, t) * f + p.phixt(a, t);
        a[j] = x[j] - e;
        const Vec minus = p.phixx(a, t) * f + p.phixt(a, t);
        a[j] = x[j];
        T3.col(j) = (plus - minus) / (2.0 * e);
    }
    d.Lxx = T3 + pxx * fx + fx.transpose() * pxx + p.Hxx(x, px, u, t);
    return d;
}

Trajectory quasi_feasible(const OcpProblem& p, const GridSeries& u, const Vec& pi, const Grid& grid) {
    Trajectory tr;
    tr.grid = grid;
    tr.u = u;
    tr.x = propagate_states(p, ControlInterpolant(u, grid), grid);
    tr.lam = propagate_costates(p, tr.x, u, pi, grid);
    return tr;
}

double bolza_cost(const OcpProblem& p, const Trajectory& tr) {
    const Grid& g = tr.grid;
    const ControlInterpolant ui(tr.u, g);
    const StateInterpolant xi(p, tr.x, tr.u, g);
    const double h = g.h();
    double J = p.phi(tr.x.col(g.N - 1), g.tf);
    for (int k = 0; k + 1 < g.N; ++k) {
        const double a = g.t(k), b = g.t(k + 1);
        const double mid = p.L(xi.eval_in(k, 0.5), ui.eval_in(k, 0.5), a + 0.5 * h);
        J += h / 6.0 * (p.L(tr.x.col(k), tr.u.col(k), a) + 4.0 * mid + p.L(tr.x.col(k + 1), tr.u.col(k + 1), b));
    }
    if (!std::isfinite(J)) throw NonFiniteEvaluation("non-finite cost");
    return J;
}

}  // namespace vem
