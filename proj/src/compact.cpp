#include "vem/compact.hpp"

#include <cmath>
#include <string>

#include "vem/errors.hpp"

namespace vem {

const char* nu_term_name(int term) {
    switch (term) {
        case kNuLocal: return "local H_uu H_u";
        case kNuCostate: return "forward costate integral";
        case kNuState: return "backward state integral";
        case kNuTerminal: return "terminal block";
    }
    return "?";
}

EvalCache build_cache(const OcpProblem& p, const GridSeries& u, double tf, const Vec& pi, const Weights& w,
                      const Grid& grid, CacheOptions opts) {
    const int n = p.n, m = p.m, N = grid.N, L = N - 1;
    if (u.rows() != m || u.cols() != N) throw ShapeError("control nodes do not match grid");
    if (pi.size() != p.q_eff()) throw ShapeError("multiplier has wrong length");
    EvalCache c;
    c.tf = tf;
    c.pi = pi;
    c.traj.grid = grid;
    c.traj.u = u;
    c.wq = trapz_weights(grid);
    const double h = grid.h();
    const ControlInterpolant ui(u, grid);
    c.umid.resize(m, N - 1);
    for (int k = 0; k < N - 1; ++k) c.umid.col(k) = ui.eval_in(k, 0.5);

    // states, forward
    c.traj.x.resize(n, N);
    c.xs.resize(N - 1);
    Vec y = p.x0;
    c.traj.x.col(0) = y;
    for (int k = 0; k < N - 1; ++k) {
        const double tk = grid.t(k), dt = h;
        StateStep& s = c.xs[k];
        const Vec& um = c.umid.col(k);
        s.X[0] = y;
        s.K[0] = p.f(s.X[0], u.col(k), tk);
        s.X[1] = y + 0.5 * dt * s.K[0];
        s.K[1] = p.f(s.X[1], um, tk + 0.5 * dt);
        s.X[2] = y + 0.5 * dt * s.K[1];
        s.K[2] = p.f(s.X[2], um, tk + 0.5 * dt);
        s.X[3] = y + dt * s.K[2];
        s.K[3] = p.f(s.X[3], u.col(k + 1), tk + dt);
        y = y + (dt / 6.0) * (s.K[0] + 2.0 * s.K[1] + 2.0 * s.K[2] + s.K[3]);
        if (!y.allFinite()) throw NonFiniteEvaluation("state propagation", k + 1, "state");
        c.traj.x.col(k + 1) = y;
    }
    c.F.resize(n, N);
    for (int i = 0; i < N; ++i) c.F.col(i) = p.f(c.traj.x.col(i), u.col(i), grid.t(i));

    // costates, backward
    c.traj.lam.resize(n, N);
    c.ls.resize(N - 1);
    Vec lam = costate_terminal(p, c.traj.x.col(L), tf, pi);
    c.traj.lam.col(L) = lam;
    auto G = [&](const Vec& l, const Vec& x, const Vec& uu, double t) {
        return Vec(-(p.Lx(x, uu, t) + p.fx(x, uu, t).transpose() * l));
    };
    for (int k = N - 2; k >= 0; --k) {
        CostateStep& s = c.ls[k];
        const double t = grid.t(k + 1), dt = -h;
        const Vec& x1 = c.traj.x.col(k + 1);
        const Vec& x0 = c.traj.x.col(k);
        s.xm = 0.5 * x0 + 0.125 * h * c.F.col(k) + 0.5 * x1 - 0.125 * h * c.F.col(k + 1);
        const Vec& um = c.umid.col(k);
        s.Lam[0] = lam;
        s.Q[0] = G(s.Lam[0], x1, u.col(k + 1), t);
        s.Lam[1] = lam + 0.5 * dt * s.Q[0];
        s.Q[1] = G(s.Lam[1], s.xm, um, t + 0.5 * dt);
        s.Lam[2] = lam + 0.5 * dt * s.Q[1];
        s.Q[2] = G(s.Lam[2], s.xm, um, t + 0.5 * dt);
        s.Lam[3] = lam + dt * s.Q[2];
        s.Q[3] = G(s.Lam[3], x0, u.col(k), t + dt);
        lam = lam + (dt / 6.0) * (s.Q[0] + 2.0 * s.Q[1] + 2.0 * s.Q[2] + s.Q[3]);
        if (!lam.allFinite()) throw NonFiniteEvaluation("costate propagation", k, "costate");
        c.traj.lam.col(k) = lam;
    }

    if (opts.with_fundamental_set) c.fs = fundamental_set(p, c.traj, grid);

    c.hu.resize(m, N);
    for (int i = 0; i < N; ++i) {
        c.hu.col(i) = p.Lu(c.traj.x.col(i), u.col(i), grid.t(i)) +
                      p.fu(c.traj.x.col(i), u.col(i), grid.t(i)).transpose() * c.traj.lam.col(i);
        if (!c.hu.col(i).allFinite()) throw NonFiniteEvaluation("H_u", i, "H_u");
    }

    // terminal block
    const Vec xf = c.traj.x.col(L), lf = c.traj.lam.col(L), uf = u.col(L);
    const int q = p.q_eff();
    double J = 0.0;
    if (q > 0) {
        c.g = p.g(xf, tf);
        c.gx = p.gx(xf, tf);
        c.gt = p.gt(xf, tf);
        J += c.g.dot(w.W_xf * c.g);
    }
    if (free_tf(p.mode)) {
        c.r_H = p.L(xf, uf, tf) + lf.dot(p.f(xf, uf, tf)) + p.phit(xf, tf);
        if (q > 0) c.r_H += pi.dot(c.gt);
        if (!std::isfinite(c.r_H)) throw NonFiniteEvaluation("terminal Hamiltonian residual", L, "r_H");
        J += w.w_H * c.r_H * c.r_H;
    }
    for (int i = 0; i < N; ++i) J += c.wq[i] * c.hu.col(i).squaredNorm();
    if (!std::isfinite(J)) throw NonFiniteEvaluation("jbar");
    c.jbar = J;

    // Reverse sweep through the costate recursion. lam_bar flows forward in t
    // and converges to 2 c(t); the state and control parts it spawns are kept
    // for the state sweep in compact_gradient.
    const double T = grid.span();
    const double sN = 1.0 / (N - 1);
    c.lam_bar = GridSeries::Zero(n, N);
    c.c_fwd = GridSeries::Zero(n, N);
    c.xbar_costate = GridSeries::Zero(n, N);
    c.ubar_local = GridSeries::Zero(m, N);
    ControlInterpolant::Adjoint uadj(m, N);
    double Tbar = 0.0, hbar = 0.0;
    GridSeries lam_in = GridSeries::Zero(n, N);
    for (int i = 0; i < N; ++i) {
        const double ti = grid.t(i), si = i * sN;
        const Vec x = c.traj.x.col(i), l = c.traj.lam.col(i), uu = u.col(i);
        const Vec eb = 2.0 * c.wq[i] * c.hu.col(i);
        c.ubar_local.col(i) = p.Huu(x, l, uu, ti).transpose() * eb;
        c.xbar_costate.col(i) += p.Hux(x, l, uu, ti).transpose() * eb;
        c.lam_bar.col(i) += p.fu(x, uu, ti) * eb;
        Tbar += (c.wq[i] / T) * c.hu.col(i).squaredNorm() + si * p.Hut(x, l, uu, ti).dot(eb);
    }
    for (int k = 0; k < N - 1; ++k) {
        c.c_fwd.col(k) = 0.5 * lam_in.col(k);
        const Vec lb = c.lam_bar.col(k);
        const CostateStep& s = c.ls[k];
        const double t1 = grid.t(k + 1), dt = -h;
        const double tm = t1 + 0.5 * dt, t0k = t1 + dt;
        const double s1 = (k + 1) * sN, sm = (k + 0.5) * sN, s0 = k * sN;
        const Vec& x1 = c.traj.x.col(k + 1);
        const Vec& x0 = c.traj.x.col(k);
        const Vec u1 = u.col(k + 1), u0 = u.col(k), um = c.umid.col(k);

        Vec l1bar = lb;
        Vec Q1b = (dt / 6.0) * lb, Q2b = (2.0 * dt / 6.0) * lb, Q3b = Q2b, Q4b = Q1b;
        hbar += -(1.0 / 6.0) * (s.Q[0] + 2.0 * s.Q[1] + 2.0 * s.Q[2] + s.Q[3]).dot(lb);
        Vec xmb = Vec::Zero(n), umb = Vec::Zero(m);
        Vec x0b = Vec::Zero(n), x1b = Vec::Zero(n), u0b = Vec::Zero(m), u1b = Vec::Zero(m);

        // stage 4 at t_k
        {
            const Vec L4b = -(p.fx(x0, u0, t0k) * Q4b);
            x0b -= p.Hxx(x0, s.Lam[3], u0, t0k).transpose() * Q4b;
            u0b -= p.Hux(x0, s.Lam[3], u0, t0k) * Q4b;
            Tbar -= s0 * p.Hxt(x0, s.Lam[3], u0, t0k).dot(Q4b);
            l1bar += L4b;
            Q3b += dt * L4b;
            hbar -= s.Q[2].dot(L4b);
        }
        // stage 3 at the midpoint
        {
            const Vec L3b = -(p.fx(s.xm, um, tm) * Q3b);
            xmb -= p.Hxx(s.xm, s.Lam[2], um, tm).transpose() * Q3b;
            umb -= p.Hux(s.xm, s.Lam[2], um, tm) * Q3b;
            Tbar -= sm * p.Hxt(s.xm, s.Lam[2], um, tm).dot(Q3b);
            l1bar += L3b;
            Q2b += 0.5 * dt * L3b;
            hbar -= 0.5 * s.Q[1].dot(L3b);
        }
        // stage 2 at the midpoint
        {
            const Vec L2b = -(p.fx(s.xm, um, tm) * Q2b);
            xmb -= p.Hxx(s.xm, s.Lam[1], um, tm).transpose() * Q2b;
            umb -= p.Hux(s.xm, s.Lam[1], um, tm) * Q2b;
            Tbar -= sm * p.Hxt(s.xm, s.Lam[1], um, tm).dot(Q2b);
            l1bar += L2b;
            Q1b += 0.5 * dt * L2b;
            hbar -= 0.5 * s.Q[0].dot(L2b);
        }
        // stage 1 at t_{k+1}
        {
            l1bar -= p.fx(x1, u1, t1) * Q1b;
            x1b -= p.Hxx(x1, s.Lam[0], u1, t1).transpose() * Q1b;
            u1b -= p.Hux(x1, s.Lam[0], u1, t1) * Q1b;
            Tbar -= s1 * p.Hxt(x1, s.Lam[0], u1, t1).dot(Q1b);
        }
        // Hermite midpoint
        {
            const double tk = grid.t(k);
            x0b += 0.5 * xmb + 0.125 * h * (p.fx(x0, u0, tk).transpose() * xmb);
            u0b += 0.125 * h * (p.fu(x0, u0, tk).transpose() * xmb);
            Tbar += 0.125 * h * s0 * p.ft(x0, u0, tk).dot(xmb);
            x1b += 0.5 * xmb - 0.125 * h * (p.fx(x1, u1, t1).transpose() * xmb);
            u1b -= 0.125 * h * (p.fu(x1, u1, t1).transpose() * xmb);
            Tbar -= 0.125 * h * s1 * p.ft(x1, u1, t1).dot(xmb);
            hbar += 0.125 * (c.F.col(k) - c.F.col(k + 1)).dot(xmb);
        }
        c.xbar_costate.col(k) += x0b;
        c.xbar_costate.col(k + 1) += x1b;
        uadj.add_node(k, u0b);
        uadj.add_node(k + 1, u1b);
        uadj.add(k, 0.5, umb);
        lam_in.col(k + 1) += l1bar;
        c.lam_bar.col(k + 1) += l1bar;
    }
    c.c_fwd.col(L) = 0.5 * lam_in.col(L);
    c.ubar_costate = uadj.finalize();
    c.tbar_interior = Tbar + hbar * sN;
    return c;
}

namespace {

// reverse of one forward RK4 step; returns dJ̄/dx_k contribution, spreads control parts
struct StepJac {
    std::array<Mat, 4> fx, fu;
    std::array<Vec, 4> ft;
};

void state_step_adjoint(const StateStep& s, const StepJac& J, const Vec& xb1, double h, double sk, double sm,
                        double s1, Vec& xb0, Vec& u0b, Vec& umb, Vec& u1b, double& hbar, double& Tbar) {
    const Vec K1b0 = (h / 6.0) * xb1;
    Vec K1b = K1b0, K2b = 2.0 * K1b0, K3b = 2.0 * K1b0;
    const Vec K4b = K1b0;
    hbar += (1.0 / 6.0) * (s.K[0] + 2.0 * s.K[1] + 2.0 * s.K[2] + s.K[3]).dot(xb1);
    xb0 += xb1;
    // stage 4
    {
        const Vec X4b = J.fx[3].transpose() * K4b;
        u1b += J.fu[3].transpose() * K4b;
        Tbar += s1 * J.ft[3].dot(K4b);
        xb0 += X4b;
        K3b += h * X4b;
        hbar += s.K[2].dot(X4b);
    }
    // stage 3
    {
        const Vec X3b = J.fx[2].transpose() * K3b;
        umb += J.fu[2].transpose() * K3b;
        Tbar += sm * J.ft[2].dot(K3b);
        xb0 += X3b;
        K2b += 0.5 * h * X3b;
        hbar += 0.5 * s.K[1].dot(X3b);
    }
    // stage 2
    {
        const Vec X2b = J.fx[1].transpose() * K2b;
        umb += J.fu[1].transpose() * K2b;
        Tbar += sm * J.ft[1].dot(K2b);
        xb0 += X2b;
        K1b += 0.5 * h * X2b;
        hbar += 0.5 * s.K[0].dot(X2b);
    }
    // stage 1
    xb0 += J.fx[0].transpose() * K1b;
    u0b += J.fu[0].transpose() * K1b;
    Tbar += sk * J.ft[0].dot(K1b);
}

}  // namespace

CompactGradient compact_gradient(const EvalCache& c, const OcpProblem& p, const Weights& w, GradientOptions opts) {
    const Grid& grid = c.traj.grid;
    const int n = p.n, m = p.m, N = grid.N, L = N - 1, q = p.q_eff();
    const double h = grid.h(), sN = 1.0 / (N - 1), tf = c.tf;
    const GridSeries& u = c.traj.u;
    const Vec xf = c.traj.x.col(L), lf = c.traj.lam.col(L), uf = u.col(L);

    double Tbar = c.tbar_interior, hbar = 0.0;
    Vec pibar = Vec::Zero(q);
    Vec xbT = Vec::Zero(n);
    Vec lbL = c.lam_bar.col(L);
    ControlInterpolant::Adjoint term_adj(m, N), state_adj(m, N);

    if (free_tf(p.mode)) {
        const double rb = 2.0 * w.w_H * c.r_H;
        Vec dx = p.Lx(xf, uf, tf) + p.fx(xf, uf, tf).transpose() * lf + p.phixt(xf, tf);
        double dt = p.Ht(xf, lf, uf, tf) + p.phitt(xf, tf);
        if (q > 0) {
            dx += p.gxt(xf, tf).transpose() * c.pi;
            dt += c.pi.dot(p.gtt(xf, tf));
            pibar += rb * c.gt;
        }
        xbT += rb * dx;
        lbL += rb * p.f(xf, uf, tf);
        term_adj.add_node(L, rb * c.hu.col(L));
        Tbar += rb * dt;
    }
    if (q > 0) {
        const Vec gb = 2.0 * (w.W_xf * c.g);
        xbT += c.gx.transpose() * gb;
        Tbar += c.gt.dot(gb);
    }
    // λ(tf) = φ_x + g_xᵀπ
    {
        Mat d2 = p.phixx(xf, tf);
        Vec dt = p.phixt(xf, tf);
        if (q > 0) {
            d2 += p.gxx_pi(xf, tf, c.pi);
            dt += p.gxt(xf, tf).transpose() * c.pi;
            pibar += c.gx * lbL;
        }
        xbT += d2.transpose() * lbL;
        Tbar += dt.dot(lbL);
    }

    // state sweep, backward in t, for the interior and terminal seeds separately
    GridSeries xbI = c.xbar_costate;
    Vec xbTk = xbT;
    for (int k = N - 2; k >= 0; --k) {
        const StateStep& s = c.xs[k];
        const double tk = grid.t(k);
        const double ts[4] = {tk, tk + 0.5 * h, tk + 0.5 * h, tk + h};
        const Vec* us[4] = {nullptr, nullptr, nullptr, nullptr};
        const Vec u0 = u.col(k), u1 = u.col(k + 1), um = c.umid.col(k);
        us[0] = &u0;
        us[1] = &um;
        us[2] = &um;
        us[3] = &u1;
        StepJac J;
        for (int a = 0; a < 4; ++a) {
            J.fx[a] = p.fx(s.X[a], *us[a], ts[a]);
            J.fu[a] = p.fu(s.X[a], *us[a], ts[a]);
            J.ft[a] = p.ft(s.X[a], *us[a], ts[a]);
        }
        const double sk = k * sN, sm = (k + 0.5) * sN, s1 = (k + 1) * sN;
        {
            Vec xb0 = Vec::Zero(n), u0b = Vec::Zero(m), umb = Vec::Zero(m), u1b = Vec::Zero(m);
            state_step_adjoint(s, J, xbI.col(k + 1), h, sk, sm, s1, xb0, u0b, umb, u1b, hbar, Tbar);
            xbI.col(k) += xb0;
            state_adj.add_node(k, u0b);
            state_adj.add_node(k + 1, u1b);
            state_adj.add(k, 0.5, umb);
        }
        {
            Vec xb0 = Vec::Zero(n), u0b = Vec::Zero(m), umb = Vec::Zero(m), u1b = Vec::Zero(m);
            state_step_adjoint(s, J, xbTk, h, sk, sm, s1, xb0, u0b, umb, u1b, hbar, Tbar);
            xbTk = xb0;
            term_adj.add_node(k, u0b);
            term_adj.add_node(k + 1, u1b);
            term_adj.add(k, 0.5, umb);
        }
    }
    Tbar += hbar * sN;

    CompactGradient out;
    const GridSeries parts[4] = {c.ubar_local, c.ubar_costate, state_adj.finalize(),
                                 opts.terminal_scale * term_adj.finalize()};
    out.n_u = GridSeries::Zero(m, N);
    for (int t = 0; t < 4; ++t) {
        out.terms[t] = parts[t];
        for (int i = 0; i < N; ++i) out.terms[t].col(i) /= 2.0 * c.wq[i];
        for (int i = 0; i < N; ++i)
            if (!out.terms[t].col(i).allFinite())
                throw NonFiniteEvaluation(std::string("n_u summand '") + nu_term_name(t) + "'", i, nu_term_name(t));
        out.n_u += out.terms[t];
    }
    out.n_tf = free_tf(p.mode) ? 0.5 * Tbar : 0.0;
    out.n_pi = 0.5 * pibar;
    if (!std::isfinite(out.n_tf)) throw NonFiniteEvaluation("n_tf", L, "n_tf");
    if (!out.n_pi.allFinite()) throw NonFiniteEvaluation("n_pi", L, "n_pi");
    return out;
}

GridSeries n_u(const EvalCache& c, const OcpProblem& p, const Weights& w) { return compact_gradient(c, p, w).n_u; }

double n_tf(const EvalCache& c, const OcpProblem& p, const Weights& w) {
    if (!free_tf(p.mode)) throw ModeError("n_tf is undefined when the terminal time is fixed");
    return compact_gradient(c, p, w).n_tf;
}

Vec n_pi(const EvalCache& c, const OcpProblem& p, const Weights& w) {
    if (!constrained(p.mode)) throw ModeError("n_pi is undefined without terminal constraints");
    return compact_gradient(c, p, w).n_pi;
}

CompactLayout CompactLayout::of(const OcpProblem& p, int N) {
    CompactLayout l;
    l.N = N;
    l.m = p.m;
    l.q = p.q_eff();
    l.has_tf = free_tf(p.mode);
    return l;
}

Vec CompactLayout::pack(const GridSeries& u, double tf_, const Vec& pi_) const {
    Vec y(size());
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < m; ++j) y[i * m + j] = u(j, i);
    int o = N * m;
    if (has_tf) y[o++] = tf_;
    for (int j = 0; j < q; ++j) y[o + j] = pi_[j];
    return y;
}

GridSeries CompactLayout::u(const Vec& y) const {
    if (y.size() != size()) throw ShapeError("compact state has length " + std::to_string(y.size()) +
                                             ", layout expects " + std::to_string(size()));
    GridSeries out(m, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < m; ++j) out(j, i) = y[i * m + j];
    return out;
}

double CompactLayout::tf(const Vec& y, double fixed_tf) const { return has_tf ? y[N * m] : fixed_tf; }

Vec CompactLayout::pi(const Vec& y) const { return y.segment(N * m + (has_tf ? 1 : 0), q); }

FlowEval rhs_compact_eval(const Vec& y, const OcpProblem& p, const Gains& K, const Weights& w, const GridSpec& spec,
                          GradientOptions opts) {
    const CompactLayout lay = CompactLayout::of(p, spec.N);
    const GridSeries u = lay.u(y);
    const double tf = lay.tf(y, spec.tf);
    const Vec pi = lay.pi(y);
    const Grid grid = make_grid(spec.N, spec.t0, tf);
    const EvalCache c = build_cache(p, u, tf, pi, w, grid, CacheOptions{false});
    const CompactGradient gr = compact_gradient(c, p, w, opts);
    const GridSeries du = -(K.K * gr.n_u);
    FlowEval out;
    out.rhs = lay.pack(du, -K.k_tf * gr.n_tf, lay.q > 0 ? Vec(-(K.K_pi * gr.n_pi)) : Vec(0));
    out.jbar = c.jbar;
    return out;
}

Vec rhs_compact(const Vec& y, const OcpProblem& p, const Gains& K, const Weights& w, const GridSpec& spec) {
    return rhs_compact_eval(y, p, K, w, spec).rhs;
}

double jbar_compact_at(const Vec& y, const OcpProblem& p, const Weights& w, const GridSpec& spec) {
    const CompactLayout lay = CompactLayout::of(p, spec.N);
    const double tf = lay.tf(y, spec.tf);
    const Grid grid = make_grid(spec.N, spec.t0, tf);
    return build_cache(p, lay.u(y), tf, lay.pi(y), w, grid, CacheOptions{false}).jbar;
}

}  // namespace vem
