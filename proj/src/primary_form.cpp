#include "vem/primary_form.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vem/errors.hpp"

namespace vem {

PrimaryLayout PrimaryLayout::of(const OcpProblem& p, int N) {
    PrimaryLayout l;
    l.N = N;
    l.n = p.n;
    l.m = p.m;
    l.q = p.q_eff();
    l.has_tf = free_tf(p.mode);
    return l;
}

Vec PrimaryLayout::pack(const PrimaryState& s) const {
    Vec y(size());
    const int b = block();
    for (int i = 0; i < N; ++i) {
        y.segment(i * b, n) = s.x.col(i);
        y.segment(i * b + n, n) = s.lam.col(i);
        y.segment(i * b + 2 * n, m) = s.u.col(i);
    }
    int o = N * b;
    if (has_tf) y[o++] = s.tf;
    y.segment(o, q) = s.pi;
    return y;
}

PrimaryState PrimaryLayout::unpack(const Vec& y, double fixed_tf) const {
    if (y.size() != size())
        throw ShapeError("primary state has length " + std::to_string(y.size()) + ", layout expects " +
                         std::to_string(size()));
    PrimaryState s;
    const int b = block();
    s.x.resize(n, N);
    s.lam.resize(n, N);
    s.u.resize(m, N);
    for (int i = 0; i < N; ++i) {
        s.x.col(i) = y.segment(i * b, n);
        s.lam.col(i) = y.segment(i * b + n, n);
        s.u.col(i) = y.segment(i * b + 2 * n, m);
    }
    int o = N * b;
    s.tf = has_tf ? y[o++] : fixed_tf;
    s.pi = y.segment(o, q);
    return s;
}

Trajectory as_trajectory(const PrimaryState& s, const Grid& grid) { return Trajectory{grid, s.x, s.lam, s.u}; }

namespace {

struct Residuals {
    GridSeries xd, ld, r1, r2, r3;
    GridSeries F;
    std::vector<Mat> fx, fu;  // kept for z
};

Residuals residuals(const OcpProblem& p, const PrimaryState& s, const Grid& grid) {
    Residuals r;
    r.xd = time_derivative(s.x, grid);
    r.ld = time_derivative(s.lam, grid);
    r.r1.resize(p.n, grid.N);
    r.r2.resize(p.n, grid.N);
    r.r3.resize(p.m, grid.N);
    r.F.resize(p.n, grid.N);
    r.fx.resize(grid.N);
    r.fu.resize(grid.N);
    for (int i = 0; i < grid.N; ++i) {
        const double t = grid.t(i);
        const Vec x = s.x.col(i), l = s.lam.col(i), u = s.u.col(i);
        r.F.col(i) = p.f(x, u, t);
        r.fx[i] = p.fx(x, u, t);
        r.fu[i] = p.fu(x, u, t);
        r.r1.col(i) = r.xd.col(i) - r.F.col(i);
        r.r2.col(i) = r.ld.col(i) + p.Lx(x, u, t) + r.fx[i].transpose() * l;
        r.r3.col(i) = p.Lu(x, u, t) + r.fu[i].transpose() * l;
    }
    require_finite(r.r1, "dynamics residual");
    return r;
}

GridSeries z_from(const OcpProblem& p, const PrimaryState& s, const Grid& grid, const Residuals& r) {
    const int n = p.n, m = p.m;
    GridSeries z(2 * n + m, grid.N);
    const GridSeries d1 = time_derivative(r.r1, grid);
    const GridSeries d2 = time_derivative(r.r2, grid);
    for (int i = 0; i < grid.N; ++i) {
        const double t = grid.t(i);
        const Vec x = s.x.col(i), l = s.lam.col(i), u = s.u.col(i);
        const Mat& fx = r.fx[i];
        const Mat& fu = r.fu[i];
        const Mat Hxx = p.Hxx(x, l, u, t), Hux = p.Hux(x, l, u, t), Huu = p.Huu(x, l, u, t);
        const Vec a = r.r2.col(i), b = -r.r1.col(i), c = r.r3.col(i);
        z.col(i).head(n) = Hxx * a + fx.transpose() * b + Hux.transpose() * c - d1.col(i);
        z.col(i).segment(n, n) = fx * a + fu * c - d2.col(i);
        z.col(i).tail(m) = Hux * a + fu.transpose() * b + Huu * c;
        if (!z.col(i).allFinite()) throw NonFiniteEvaluation("z vector", i, "z");
    }
    return z;
}

struct TerminalParts {
    Vec tv;        // λ − φ_x − g_xᵀπ
    Vec g;
    Mat gx;
    double r_H = 0.0;
};

TerminalParts terminal_parts(const OcpProblem& p, const PrimaryState& s, int L) {
    TerminalParts tp;
    const Vec xf = s.x.col(L), lf = s.lam.col(L), uf = s.u.col(L);
    tp.tv = transversality(p, xf, lf, s.tf, s.pi);
    if (p.q_eff() > 0) {
        tp.g = p.g(xf, s.tf);
        tp.gx = p.gx(xf, s.tf);
    }
    if (free_tf(p.mode)) tp.r_H = terminal_h_residual(p, xf, lf, uf, s.tf, s.pi);
    return tp;
}

double h_from(const OcpProblem& p, const PrimaryState& s, const Weights& w, const Residuals& r,
              const TerminalParts& tp, int L) {
    const Vec xf = s.x.col(L), lf = s.lam.col(L), uf = s.u.col(L);
    const double tf = s.tf;
    const Vec Wtv = w.W_lambda * tp.tv;
    Vec dxt = p.phixt(xf, tf);
    double tt = p.Ht(xf, lf, uf, tf) + p.phitt(xf, tf);
    double h = 0.0;
    if (p.q_eff() > 0) {
        h += 2.0 * p.gt(xf, tf).dot(w.W_xf * tp.g);
        dxt += p.gxt(xf, tf).transpose() * s.pi;
        tt += s.pi.dot(p.gtt(xf, tf));
    }
    h -= 2.0 * dxt.dot(Wtv);
    h += 2.0 * w.w_H * tp.r_H * tt;
    h += hx(p, xf, lf, uf, tf).squaredNorm() + p.f(xf, uf, tf).squaredNorm() + r.r3.col(L).squaredNorm() -
         r.xd.col(L).squaredNorm() - r.ld.col(L).squaredNorm();
    return h;
}

}  // namespace

GridSeries z_vector(const OcpProblem& p, const PrimaryState& s, const Grid& grid) {
    return z_from(p, s, grid, residuals(p, s, grid));
}

double h_scalar(const OcpProblem& p, const PrimaryState& s, const Weights& w, const Grid& grid) {
    if (!free_tf(p.mode)) throw ModeError("h is undefined when the terminal time is fixed");
    const int L = grid.N - 1;
    const Residuals r = residuals(p, s, grid);
    return h_from(p, s, w, r, terminal_parts(p, s, L), L);
}

FlowEval rhs_primary_eval(const Vec& y, const OcpProblem& p, const Gains& K, const Weights& w,
                          const GridSpec& spec) {
    const PrimaryLayout lay = PrimaryLayout::of(p, spec.N);
    const PrimaryState s = lay.unpack(y, spec.tf);
    const Grid grid = make_grid(spec.N, spec.t0, s.tf);
    const int n = p.n, m = p.m, N = grid.N, L = N - 1, b = lay.block();
    const Residuals r = residuals(p, s, grid);
    const GridSeries z = z_from(p, s, grid, r);
    const TerminalParts tp = terminal_parts(p, s, L);

    PrimaryState d;
    d.x.resize(n, N);
    d.lam.resize(n, N);
    d.u.resize(m, N);
    auto put = [&](int i, const Vec& v) {
        d.x.col(i) = v.head(n);
        d.lam.col(i) = v.segment(n, n);
        d.u.col(i) = v.tail(m);
    };
    for (int i = 1; i < L; ++i) put(i, -(K.K * z.col(i)));

    {
        Vec a(b);
        a.head(n) = p.x0 - s.x.col(0);
        a.segment(n, n) = r.r2.col(0);
        // the control row descends like the interior rows; the printed +z_u grows u(t0)
        a.tail(m) = -z.col(0).tail(m);
        put(0, K.K * a);
    }

    double dtf = 0.0;
    if (lay.has_tf) dtf = -K.k_tf * h_from(p, s, w, r, tp, L);
    {
        const Vec xf = s.x.col(L), lf = s.lam.col(L), uf = s.u.col(L);
        const double tf = s.tf;
        const Vec Wtv = w.W_lambda * tp.tv;
        Mat d2 = p.phixx(xf, tf);
        Vec ax = r.r1.col(L);
        Vec al = Wtv + r.r2.col(L);
        if (p.q_eff() > 0) {
            d2 += p.gxx_pi(xf, tf, s.pi);
            ax += tp.gx.transpose() * (w.W_xf * tp.g);
        }
        ax -= d2.transpose() * Wtv;
        Vec au = z.col(L).tail(m);
        if (lay.has_tf) {
            Vec dx = hx(p, xf, lf, uf, tf) + p.phixt(xf, tf);
            if (p.q_eff() > 0) dx += p.gxt(xf, tf).transpose() * s.pi;
            ax += w.w_H * tp.r_H * dx;
            al += w.w_H * tp.r_H * r.F.col(L);
            const GridSeries ud = time_derivative(s.u, grid);
            au += ud.col(L) * dtf;
        }
        Vec a(b);
        a << ax, al, au;
        put(L, -(K.K * a));
    }
    d.tf = dtf;
    d.pi = lay.q > 0 ? Vec(K.K_pi * (tp.gx * (w.W_lambda * tp.tv))) : Vec(0);

    FlowEval out;
    out.rhs = lay.pack(d);
    if (!out.rhs.allFinite()) throw NonFiniteEvaluation("primary right-hand side");
    // same sum as jbar_primary, from the residuals already at hand
    double J = 0.0;
    if (p.q_eff() > 0) J += tp.g.dot(w.W_xf * tp.g);
    if (free_tf(p.mode)) J += w.w_H * tp.r_H * tp.r_H;
    const Vec dx0 = s.x.col(0) - p.x0;
    J += dx0.dot(w.W_x0 * dx0);
    J += tp.tv.dot(w.W_lambda * tp.tv);
    const Vec wq = trapz_weights(grid);
    for (int i = 0; i < N; ++i)
        J += wq[i] * (r.r1.col(i).squaredNorm() + r.r2.col(i).squaredNorm() + r.r3.col(i).squaredNorm());
    if (!std::isfinite(J)) throw NonFiniteEvaluation("jbar_primary");
    out.jbar = J;
    return out;
}

Vec rhs_primary(const Vec& y, const OcpProblem& p, const Gains& K, const Weights& w, const GridSpec& spec) {
    return rhs_primary_eval(y, p, K, w, spec).rhs;
}

double jbar_primary_at(const Vec& y, const OcpProblem& p, const Weights& w, const GridSpec& spec) {
    const PrimaryLayout lay = PrimaryLayout::of(p, spec.N);
    const PrimaryState s = lay.unpack(y, spec.tf);
    const Grid grid = make_grid(spec.N, spec.t0, s.tf);
    return jbar_primary(p, as_trajectory(s, grid), s.pi, s.tf, w);
}

}  // namespace vem
