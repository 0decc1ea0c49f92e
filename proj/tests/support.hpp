#pragma once

#include <cmath>
#include <random>

#include "vem/compact.hpp"
#include "vem/problems.hpp"

namespace vt {

using vem::Mat;
using vem::Vec;

// central differences of J̄ over the flat compact state, step 1e-6·max(1,|y_k|)
inline Vec fd_gradient(const Vec& y, const vem::OcpProblem& p, const vem::Weights& w, const vem::GridSpec& spec) {
    Vec g(y.size());
    for (int k = 0; k < y.size(); ++k) {
        const double e = 1e-6 * std::max(1.0, std::abs(y[k]));
        Vec a = y, b = y;
        a[k] += e;
        b[k] -= e;
        g[k] = (vem::jbar_compact_at(a, p, w, spec) - vem::jbar_compact_at(b, p, w, spec)) / (2 * e);
    }
    return g;
}

// analytic counterpart built from the RHS with unit gains
inline Vec analytic_gradient(const Vec& y, const vem::OcpProblem& p, const vem::Weights& w,
                             const vem::GridSpec& spec) {
    const vem::CompactLayout lay = vem::CompactLayout::of(p, spec.N);
    const vem::Gains k = vem::Gains::scaled(p, p.m, 1.0, 1.0, 1.0);
    const Vec r = vem::rhs_compact(y, p, k, w, spec);
    const double tf = lay.tf(y, spec.tf);
    const Vec wq = vem::trapz_weights(vem::make_grid(spec.N, spec.t0, tf));
    Vec g = -2.0 * r;
    for (int i = 0; i < spec.N; ++i)
        for (int c = 0; c < p.m; ++c) g[i * p.m + c] *= wq[i];
    return g;
}

struct BlockErr {
    double u = 0, tf = 0, pi = 0;
};

inline double rel(const Vec& a, const Vec& b) {
    if (a.size() == 0) return 0.0;
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), 1e-12);
}

inline BlockErr block_errors(const Vec& an, const Vec& fd, const vem::CompactLayout& lay) {
    BlockErr e;
    const int nu = lay.N * lay.m;
    e.u = rel(an.head(nu), fd.head(nu));
    int off = nu;
    if (lay.has_tf) {
        e.tf = std::abs(an[off] - fd[off]) / std::max(std::abs(fd[off]), 1e-12);
        ++off;
    }
    e.pi = rel(an.segment(off, lay.q), fd.segment(off, lay.q));
    return e;
}

// double integrator with free terminal state: φ = ½|x − (0.5, 0)|²·S + ρ·t, free t_f
inline vem::OcpProblem free_state_problem() {
    Mat A(2, 2), B(2, 1), R(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    R << 1;
    Vec x0(2), tg(2);
    x0 << 1, 1;
    tg << 0.5, 0;
    vem::OcpProblem p = vem::linear_problem(A, B, R, Mat::Zero(2, 2), x0, tg, 0.0, 2.0);
    p.mode = vem::TerminalMode::FreeTfFreeState;
    p.q = 0;
    const double S = 4.0, rho = 0.5;
    p.phi = [=](const Vec& x, double t) { return 0.5 * S * (x - tg).squaredNorm() + rho * t; };
    p.phix = [=](const Vec& x, double) { return Vec(S * (x - tg)); };
    p.phit = [=](const Vec&, double) { return rho; };
    p.phixx = [=](const Vec&, double) { return Mat(S * Mat::Identity(2, 2)); };
    p.phixt = [](const Vec&, double) { return Vec(Vec::Zero(2)); };
    p.phitt = [](const Vec&, double) { return 0.0; };
    p.gxx_pi = {};
    return vem::complete(p);
}

// double integrator, x(t_f) = 0, running cost ½u², time penalty ρ·t_f
inline vem::OcpProblem free_tf_linear_problem() {
    Mat A(2, 2), B(2, 1), R(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    R << 1;
    Vec x0(2);
    x0 << 1, 1;
    vem::OcpProblem p = vem::linear_problem(A, B, R, Mat::Zero(2, 2), x0, Vec::Zero(2), 0.0, 2.0);
    p.mode = vem::TerminalMode::FreeTfWithConstraint;
    p.phi = [](const Vec&, double t) { return 2.0 * t; };
    p.phix = [](const Vec&, double) { return Vec(Vec::Zero(2)); };
    p.phit = [](const Vec&, double) { return 2.0; };
    p.phixx = [](const Vec&, double) { return Mat(Mat::Zero(2, 2)); };
    p.phixt = [](const Vec&, double) { return Vec(Vec::Zero(2)); };
    p.phitt = [](const Vec&, double) { return 0.0; };
    return vem::complete(p);
}

// damped pendulum with a time-varying actuator and state cost; second
// derivatives and time partials are left to complete()
inline vem::OcpProblem pendulum_problem(vem::TerminalMode mode) {
    vem::OcpProblem p;
    p.name = "pendulum";
    p.n = 2;
    p.m = 1;
    p.q = 2;
    p.t0 = 0.0;
    p.tf = 1.5;
    p.x0 = Vec(2);
    p.x0 << 0.6, 0.0;
    p.mode = mode;
    auto b = [](double t) { return 1.0 + 0.5 * t; };
    p.f = [b](const Vec& x, const Vec& u, double t) {
        Vec r(2);
        r << x[1], -std::sin(x[0]) - 0.2 * x[1] + b(t) * u[0];
        return r;
    };
    p.fx = [](const Vec& x, const Vec&, double) {
        Mat J(2, 2);
        J << 0, 1, -std::cos(x[0]), -0.2;
        return J;
    };
    p.fu = [b](const Vec&, const Vec&, double t) {
        Mat J(2, 1);
        J << 0, b(t);
        return J;
    };
    p.L = [](const Vec& x, const Vec& u, double) { return 0.5 * u[0] * u[0] + 0.1 * x[0] * x[0] * x[0] * x[0]; };
    p.Lx = [](const Vec& x, const Vec&, double) {
        Vec r(2);
        r << 0.4 * x[0] * x[0] * x[0], 0;
        return r;
    };
    p.Lu = [](const Vec&, const Vec& u, double) { return Vec(u); };
    Vec tg(2);
    tg << 0.0, 0.3;
    p.g = [tg](const Vec& x, double) { return Vec(x - tg); };
    p.gx = [](const Vec&, double) { return Mat(Mat::Identity(2, 2)); };
    p.gt = [](const Vec&, double) { return Vec(Vec::Zero(2)); };
    if (mode == vem::TerminalMode::FreeTfWithConstraint) {
        p.phi = [](const Vec&, double t) { return t; };
        p.phix = [](const Vec&, double) { return Vec(Vec::Zero(2)); };
        p.phit = [](const Vec&, double) { return 1.0; };
    }
    return vem::complete(p);
}

}  // namespace vt
