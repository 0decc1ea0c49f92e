#include "vem/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>

#include "vem/errors.hpp"

namespace vem {

const char* mode_name(TerminalMode m) {
    switch (m) {
        case TerminalMode::FreeTfWithConstraint: return "free_tf_constraint";
        case TerminalMode::FixedTfWithConstraint: return "fixed_tf_constraint";
        case TerminalMode::FreeTfFreeState: return "free_tf_free_state";
    }
    return "?";
}

double fd_step(double v) { return 1e-6 * std::max(1.0, std::abs(v)); }

namespace {

// central-difference Jacobian of a vector function of one vector argument
template <class F>
Mat fd_jac(F&& fn, const Vec& at, int rows) {
    Mat J(rows, at.size());
    Vec a = at;
    for (int j = 0; j < at.size(); ++j) {
        const double e = fd_step(at[j]);
        a[j] = at[j] + e;
        Vec fp = fn(a);
        a[j] = at[j] - e;
        Vec fm = fn(a);
        a[j] = at[j];
        J.col(j) = (fp - fm) / (2.0 * e);
    }
    return J;
}

// evaluated eagerly: an Eigen expression here would outlive both samples
template <class F>
auto fd_t(F&& fn, double t) {
    const double e = fd_step(t);
    const auto a = fn(t + e), b = fn(t - e);
    using R = std::decay_t<decltype(a)>;
    return R((a - b) / (2.0 * e));
}

void need(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("problem is missing callback ") + what);
}

}  // namespace

OcpProblem complete(OcpProblem p) {
    if (p.n < 1 || p.m < 1) throw ConfigError("problem needs n >= 1 and m >= 1");
    if (p.x0.size() != p.n) throw ShapeError("x0 has wrong length");
    if (constrained(p.mode) && p.q < 1) throw ConfigError("constrained terminal mode needs q >= 1");
    if (!constrained(p.mode)) p.q = 0;
    need(p.f && p.fx && p.fu, "f/fx/fu");
    const int n = p.n, m = p.m, q = p.q;

    if (!p.L) {
        p.L = [](const Vec&, const Vec&, double) { return 0.0; };
        p.Lx = [n](const Vec&, const Vec&, double) { return Vec::Zero(n).eval(); };
        p.Lu = [m](const Vec&, const Vec&, double) { return Vec::Zero(m).eval(); };
    }
    need(p.Lx && p.Lu, "Lx/Lu");

    if (!p.phi) {
        p.phi = [](const Vec&, double) { return 0.0; };
        p.phix = [n](const Vec&, double) { return Vec::Zero(n).eval(); };
        p.phit = [](const Vec&, double) { return 0.0; };
    }
    need(p.phix && p.phit, "phix/phit");
    if (!p.phixx) {
        auto phix = p.phix;
        p.phixx = [phix, n](const Vec& x, double t) {
            return fd_jac([&](const Vec& xx) { return phix(xx, t); }, x, n);
        };
    }
    if (!p.phixt) {
        auto phix = p.phix;
        p.phixt = [phix](const Vec& x, double t) {
            return fd_t([&](double tt) { return phix(x, tt); }, t).eval();
        };
    }
    if (!p.phitt) {
        auto phit = p.phit;
        p.phitt = [phit](const Vec& x, double t) { return fd_t([&](double tt) { return phit(x, tt); }, t); };
    }

    if (q > 0) {
        need(p.g && p.gx && p.gt, "g/gx/gt");
        if (!p.gxt) {
            auto gx = p.gx;
            p.gxt = [gx](const Vec& x, double t) { return fd_t([&](double tt) { return gx(x, tt); }, t).eval(); };
        }
        if (!p.gtt) {
            auto gt = p.gt;
            p.gtt = [gt](const Vec& x, double t) { return fd_t([&](double tt) { return gt(x, tt); }, t).eval(); };
        }
        if (!p.gxx_pi) {
            auto gx = p.gx;
            p.gxx_pi = [gx, n](const Vec& x, double t, const Vec& pi) {
                return fd_jac([&](const Vec& xx) { return (gx(xx, t).transpose() * pi).eval(); }, x, n);
            };
        }
    } else {
        p.g = [](const Vec&, double) { return Vec(0); };
        p.gx = [n](const Vec&, double) { return Mat(0, n); };
        p.gt = [](const Vec&, double) { return Vec(0); };
        p.gxt = [n](const Vec&, double) { return Mat(0, n); };
        p.gtt = [](const Vec&, double) { return Vec(0); };
        p.gxx_pi = [n](const Vec&, double, const Vec&) { return Mat::Zero(n, n).eval(); };
    }

    auto Lx = p.Lx, Lu = p.Lu;
    auto fx = p.fx, fu = p.fu;
    auto f = p.f;
    auto hx_of = [Lx, fx](const Vec& x, const Vec& lam, const Vec& u, double t) {
        return (Lx(x, u, t) + fx(x, u, t).transpose() * lam).eval();
    };
    auto hu_of = [Lu, fu](const Vec& x, const Vec& lam, const Vec& u, double t) {
        return (Lu(x, u, t) + fu(x, u, t).transpose() * lam).eval();
    };
    if (!p.Hxx)
        p.Hxx = [hx_of, n](const Vec& x, const Vec& lam, const Vec& u, double t) {
            return fd_jac([&](const Vec& xx) { return hx_of(xx, lam, u, t); }, x, n);
        };
    if (!p.Hux)
        p.Hux = [hu_of, m](const Vec& x, const Vec& lam, const Vec& u, double t) {
            return fd_jac([&](const Vec& xx) { return hu_of(xx, lam, u, t); }, x, m);
        };
    if (!p.Huu)
        p.Huu = [hu_of, m](const Vec& x, const Vec& lam, const Vec& u, double t) {
            return fd_jac([&](const Vec& uu) { return hu_of(x, lam, uu, t); }, u, m);
        };

    if (p.autonomous) {
        if (!p.ft) p.ft = [n](const Vec&, const Vec&, double) { return Vec::Zero(n).eval(); };
        if (!p.Hxt) p.Hxt = [n](const Vec&, const Vec&, const Vec&, double) { return Vec::Zero(n).eval(); };
        if (!p.Hut) p.Hut = [m](const Vec&, const Vec&, const Vec&, double) { return Vec::Zero(m).eval(); };
        if (!p.Ht) p.Ht = [](const Vec&, const Vec&, const Vec&, double) { return 0.0; };
    } else {
        if (!p.ft)
            p.ft = [f](const Vec& x, const Vec& u, double t) {
                return fd_t([&](double tt) { return f(x, u, tt); }, t).eval();
            };
        if (!p.Hxt)
            p.Hxt = [hx_of](const Vec& x, const Vec& lam, const Vec& u, double t) {
                return fd_t([&](double tt) { return hx_of(x, lam, u, tt); }, t).eval();
            };
        if (!p.Hut)
            p.Hut = [hu_of](const Vec& x, const Vec& lam, const Vec& u, double t) {
                return fd_t([&](double tt) { return hu_of(x, lam, u, tt); }, t).eval();
            };
        if (!p.Ht) {
            auto L = p.L;
            p.Ht = [L, f](const Vec& x, const Vec& lam, const Vec& u, double t) {
                return fd_t([&](double tt) { return L(x, u, tt) + lam.dot(f(x, u, tt)); }, t);
            };
        }
    }
    return p;
}

static void check_spd(const Mat& M, int dim, const char* name) {
    if (M.rows() != dim || M.cols() != dim)
        throw ShapeError(std::string(name) + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
    if (dim == 0) return;
    if (!M.allFinite() || (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw ConfigError(std::string(name) + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    if (es.eigenvalues().minCoeff() <= 0.0) throw ConfigError(std::string(name) + " must be positive definite");
}

Weights Weights::identity(const OcpProblem& p) {
    Weights w;
    w.W_xf = Mat::Identity(p.q_eff(), p.q_eff());
    w.w_H = 1.0;
    w.W_x0 = Mat::Identity(p.n, p.n);
    w.W_lambda = Mat::Identity(p.n, p.n);
    return w;
}

void Weights::validate(const OcpProblem& p) const {
    check_spd(W_xf, p.q_eff(), "W_xf");
    check_spd(W_x0, p.n, "W_x0");
    check_spd(W_lambda, p.n, "W_lambda");
    if (!(w_H > 0.0) || !std::isfinite(w_H)) throw ConfigError("w_H must be positive");
}

Gains Gains::scaled(const OcpProblem& p, int k_dim, double k, double k_tf, double k_pi) {
    Gains g;
    g.K = k * Mat::Identity(k_dim, k_dim);
    g.k_tf = k_tf;
    g.K_pi = k_pi * Mat::Identity(p.q_eff(), p.q_eff());
    return g;
}

void Gains::validate(const OcpProblem& p, int k_dim) const {
    check_spd(K, k_dim, "K");
    check_spd(K_pi, p.q_eff(), "K_pi");
    if (free_tf(p.mode) && (!(k_tf > 0.0) || !std::isfinite(k_tf))) throw ConfigError("k_tf must be positive");
}

double ResidualReport::max() const {
    return std::max({dyn_res, costate_res, hu_res, g_res, transversality_res, h_terminal_res, x0_res});
}

static double finite_or_throw(double v, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteEvaluation(std::string("non-finite ") + what, -1, what);
    return v;
}

double hamiltonian(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t) {
    return finite_or_throw(p.L(x, u, t) + lam.dot(p.f(x, u, t)), "hamiltonian");
}

Vec hu(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t) {
    Vec r = p.Lu(x, u, t) + p.fu(x, u, t).transpose() * lam;
    require_finite(r, "H_u");
    return r;
}

Vec hx(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t) {
    Vec r = p.Lx(x, u, t) + p.fx(x, u, t).transpose() * lam;
    require_finite(r, "H_x");
    return r;
}

double terminal_h_residual(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double tf,
                           const Vec& pi) {
    double r = hamiltonian(p, x, lam, u, tf) + p.phit(x, tf);
    if (p.q_eff() > 0) r += pi.dot(p.gt(x, tf));
    return finite_or_throw(r, "H(tf) residual");
}

Vec transversality(const OcpProblem& p, const Vec& x, const Vec& lam, double tf, const Vec& pi) {
    Vec r = lam - p.phix(x, tf);
    if (p.q_eff() > 0) r -= p.gx(x, tf).transpose() * pi;
    return r;
}

static void check_traj(const OcpProblem& p, const Trajectory& tr) {
    if (tr.grid.N < 3) throw GridTooSmall("trajectory grid needs at least 3 nodes");
    const int N = tr.grid.N;
    if (tr.x.rows() != p.n || tr.x.cols() != N || tr.lam.rows() != p.n || tr.lam.cols() != N ||
        tr.u.rows() != p.m || tr.u.cols() != N)
        throw ShapeError("trajectory shape does not match problem");
    require_finite(tr.x, "trajectory x");
    require_finite(tr.lam, "trajectory lambda");
    require_finite(tr.u, "trajectory u");
}

namespace {

struct NodeResiduals {
    GridSeries dyn, cost, hu;
};

NodeResiduals node_residuals(const OcpProblem& p, const Trajectory& tr) {
    const Grid& g = tr.grid;
    const GridSeries xd = time_derivative(tr.x, g);
    const GridSeries ld = time_derivative(tr.lam, g);
    NodeResiduals r{GridSeries(p.n, g.N), GridSeries(p.n, g.N), GridSeries(p.m, g.N)};
    for (int i = 0; i < g.N; ++i) {
        const double t = g.t(i);
        const Vec x = tr.x.col(i), lam = tr.lam.col(i), u = tr.u.col(i);
        r.dyn.col(i) = xd.col(i) - p.f(x, u, t);
        r.cost.col(i) = ld.col(i) + hx(p, x, lam, u, t);
        r.hu.col(i) = hu(p, x, lam, u, t);
    }
    return r;
}

double inf_norm(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ResidualReport optimality_report(const OcpProblem& p, const Trajectory& tr, const Vec& pi, double tf) {
    check_traj(p, tr);
    const NodeResiduals r = node_residuals(p, tr);
    const int L = tr.grid.N - 1;
    const Vec xf = tr.x.col(L), lf = tr.lam.col(L), uf = tr.u.col(L);
    ResidualReport rep;
    rep.dyn_res = inf_norm(r.dyn);
    rep.costate_res = inf_norm(r.cost);
    rep.hu_res = inf_norm(r.hu);
    rep.g_res = p.q_eff() > 0 ? p.g(xf, tf).norm() : 0.0;
    rep.transversality_res = transversality(p, xf, lf, tf, pi).norm();
    rep.h_terminal_res = free_tf(p.mode) ? std::abs(terminal_h_residual(p, xf, lf, uf, tf, pi)) : 0.0;
    rep.x0_res = (tr.x.col(0) - p.x0).norm();
    const double vals[] = {rep.dyn_res, rep.costate_res, rep.hu_res, rep.g_res,
                           rep.transversality_res, rep.h_terminal_res, rep.x0_res};
    for (double v : vals)
        if (!std::isfinite(v)) throw NonFiniteEvaluation("non-finite residual");
    return rep;
}

static double terminal_terms(const OcpProblem& p, const Trajectory& tr, const Vec& pi, double tf,
                             const Weights& w) {
    const int L = tr.grid.N - 1;
    const Vec xf = tr.x.col(L), lf = tr.lam.col(L), uf = tr.u.col(L);
    double J = 0.0;
    if (p.q_eff() > 0) {
        const Vec gv = p.g(xf, tf);
        J += gv.dot(w.W_xf * gv);
    }
    if (free_tf(p.mode)) {
        const double rh = terminal_h_residual(p, xf, lf, uf, tf, pi);
        J += w.w_H * rh * rh;
    }
    return J;
}

double jbar_compact(const OcpProblem& p, const Trajectory& tr, const Vec& pi, double tf, const Weights& w) {
    check_traj(p, tr);
    const Vec wq = trapz_weights(tr.grid);
    double J = terminal_terms(p, tr, pi, tf, w);
    for (int i = 0; i < tr.grid.N; ++i) {
        const Vec h = hu(p, tr.x.col(i), tr.lam.col(i), tr.u.col(i), tr.grid.t(i));
        J += wq[i] * h.squaredNorm();
    }
    return finite_or_throw(J, "jbar_compact");
}

double jbar_primary(const OcpProblem& p, const Trajectory& tr, const Vec& pi, double tf, const Weights& w) {
    check_traj(p, tr);
    const NodeResiduals r = node_residuals(p, tr);
    const Vec wq = trapz_weights(tr.grid);
    double J = terminal_terms(p, tr, pi, tf, w);
    const int L = tr.grid.N - 1;
    const Vec dx0 = tr.x.col(0) - p.x0;
    J += dx0.dot(w.W_x0 * dx0);
    const Vec tv = transversality(p, tr.x.col(L), tr.lam.col(L), tf, pi);
    J += tv.dot(w.W_lambda * tv);
    for (int i = 0; i < tr.grid.N; ++i)
        J += wq[i] * (r.dyn.col(i).squaredNorm() + r.cost.col(i).squaredNorm() + r.hu.col(i).squaredNorm());
    return finite_or_throw(J, "jbar_primary");
}

const FdEntry& FdReport::worst() const {
    return *std::max_element(entries.begin(), entries.end(),
                             [](const FdEntry& a, const FdEntry& b) { return a.worst < b.worst; });
}

double FdReport::worst_first_order() const {
    double w = 0.0;
    for (const auto& e : entries)
        if (!e.second_order) w = std::max(w, e.worst);
    return w;
}

FdReport fd_check(const OcpProblem& p, int samples, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const int n = p.n, m = p.m, q = p.q_eff();
    auto rvec = [&](int k) {
        Vec v(k);
        for (int i = 0; i < k; ++i) v[i] = U(rng);
        return v;
    };
    std::vector<FdEntry> E = {{"fx", 0, false},    {"fu", 0, false},     {"Lx", 0, false},    {"Lu", 0, false},
                              {"phix", 0, false},  {"phit", 0, false},   {"phixx", 0, true},  {"phixt", 0, true},
                              {"phitt", 0, true},  {"Hxx", 0, true},     {"Hux", 0, true},    {"Huu", 0, true},
                              {"Ht", 0, false}};
    if (q > 0) {
        for (const char* nm : {"gx", "gt"}) E.push_back({nm, 0, false});
        for (const char* nm : {"gxt", "gtt", "gxx_pi"}) E.push_back({nm, 0, true});
    }
    auto rel = [](const Mat& a, const Mat& b) {
        if (a.size() == 0) return 0.0;
        const double d = (a - b).cwiseAbs().maxCoeff();
        const double s = std::max(1.0, b.cwiseAbs().maxCoeff());
        return std::isfinite(d) ? d / s : INFINITY;
    };
    auto bump = [&](const char* nm, double v) {
        for (auto& e : E)
            if (e.name == nm) e.worst = std::max(e.worst, v);
    };
    auto as_mat = [](double v) { return Mat::Constant(1, 1, v); };
    for (int s = 0; s < samples; ++s) {
        const Vec x = rvec(n), u = rvec(m), lam = rvec(n), pi = rvec(q);
        const double t = p.t0 + (p.tf - p.t0) * (1.0 + U(rng)) ;
        bump("fx", rel(p.fx(x, u, t), fd_jac([&](const Vec& a) { return p.f(a, u, t); }, x, n)));
        bump("fu", rel(p.fu(x, u, t), fd_jac([&](const Vec& a) { return p.f(x, a, t); }, u, n)));
        auto Lv = [&](const Vec& a, const Vec& b) { return Vec::Constant(1, p.L(a, b, t)); };
        bump("Lx", rel(p.Lx(x, u, t), fd_jac([&](const Vec& a) { return Lv(a, u); }, x, 1).transpose()));
        bump("Lu", rel(p.Lu(x, u, t), fd_jac([&](const Vec& a) { return Lv(x, a); }, u, 1).transpose()));
        bump("phix", rel(p.phix(x, t), fd_jac([&](const Vec& a) { return Vec::Constant(1, p.phi(a, t)); }, x, 1)
                                           .transpose()));
        bump("phit", rel(as_mat(p.phit(x, t)), as_mat(fd_t([&](double tt) { return p.phi(x, tt); }, t))));
        bump("phixx", rel(p.phixx(x, t), fd_jac([&](const Vec& a) { return p.phix(a, t); }, x, n)));
        bump("phixt", rel(p.phixt(x, t), fd_t([&](double tt) { return p.phix(x, tt); }, t)));
        bump("phitt", rel(as_mat(p.phitt(x, t)), as_mat(fd_t([&](double tt) { return p.phit(x, tt); }, t))));
        auto hxv = [&](const Vec& a, const Vec& b) { return (p.Lx(a, b, t) + p.fx(a, b, t).transpose() * lam).eval(); };
        auto huv = [&](const Vec& a, const Vec& b) { return (p.Lu(a, b, t) + p.fu(a, b, t).transpose() * lam).eval(); };
        bump("Hxx", rel(p.Hxx(x, lam, u, t), fd_jac([&](const Vec& a) { return hxv(a, u); }, x, n)));
        bump("Hux", rel(p.Hux(x, lam, u, t), fd_jac([&](const Vec& a) { return huv(a, u); }, x, m)));
        bump("Huu", rel(p.Huu(x, lam, u, t), fd_jac([&](const Vec& a) { return huv(x, a); }, u, m)));
        bump("Ht", rel(as_mat(p.Ht(x, lam, u, t)),
                       as_mat(fd_t([&](double tt) { return p.L(x, u, tt) + lam.dot(p.f(x, u, tt)); }, t))));
        if (q > 0) {
            bump("gx", rel(p.gx(x, t), fd_jac([&](const Vec& a) { return p.g(a, t); }, x, q)));
            bump("gt", rel(p.gt(x, t), fd_t([&](double tt) { return p.g(x, tt); }, t)));
            bump("gxt", rel(p.gxt(x, t), fd_t([&](double tt) { return p.gx(x, tt); }, t)));
            bump("gtt", rel(p.gtt(x, t), fd_t([&](double tt) { return p.gt(x, tt); }, t)));
            bump("gxx_pi", rel(p.gxx_pi(x, t, pi),
                               fd_jac([&](const Vec& a) { return (p.gx(a, t).transpose() * pi).eval(); }, x, n)));
        }
    }
    return FdReport{E};
}

}  // namespace vem
