#include "vem/problems.hpp"

#include <cmath>
#include <numbers>

#include "vem/errors.hpp"

namespace vem {

OcpProblem linear_problem(const Mat& A, const Mat& B, const Mat& R, const Mat& Q, const Vec& x0, const Vec& target,
                          double t0, double tf) {
    OcpProblem p;
    p.name = "linear";
    p.n = static_cast<int>(A.rows());
    p.m = static_cast<int>(B.cols());
    p.q = p.n;
    p.t0 = t0;
    p.tf = tf;
    p.x0 = x0;
    p.mode = TerminalMode::FixedTfWithConstraint;
    p.autonomous = true;
    const int n = p.n, m = p.m;
    p.f = [A, B](const Vec& x, const Vec& u, double) { return Vec(A * x + B * u); };
    p.fx = [A](const Vec&, const Vec&, double) { return A; };
    p.fu = [B](const Vec&, const Vec&, double) { return B; };
    p.L = [R, Q](const Vec& x, const Vec& u, double) { return 0.5 * (u.dot(R * u) + x.dot(Q * x)); };
    p.Lx = [Q](const Vec& x, const Vec&, double) { return Vec(Q * x); };
    p.Lu = [R](const Vec&, const Vec& u, double) { return Vec(R * u); };
    p.g = [target](const Vec& x, double) { return Vec(x - target); };
    p.gx = [n](const Vec&, double) { return Mat::Identity(n, n).eval(); };
    p.gt = [n](const Vec&, double) { return Vec::Zero(n).eval(); };
    p.gxt = [n](const Vec&, double) { return Mat::Zero(n, n).eval(); };
    p.gtt = [n](const Vec&, double) { return Vec::Zero(n).eval(); };
    p.gxx_pi = [n](const Vec&, double, const Vec&) { return Mat::Zero(n, n).eval(); };
    p.Hxx = [Q](const Vec&, const Vec&, const Vec&, double) { return Q; };
    p.Hux = [n, m](const Vec&, const Vec&, const Vec&, double) { return Mat::Zero(m, n).eval(); };
    p.Huu = [R](const Vec&, const Vec&, const Vec&, double) { return R; };
    return complete(p);
}

Benchmark example1() {
    Mat A(2, 2), B(2, 1), R(1, 1);
    A << 0, 1, 0, 0;
    B << 0, 1;
    R << 1;
    Vec x0(2), xf(2);
    x0 << 1, 1;
    xf << 0, 0;
    Benchmark b{linear_problem(A, B, R, Mat::Zero(2, 2), x0, xf, 0.0, 2.0), {}};
    b.problem.name = "example1";
    b.reference.sample = [](double t) {
        RefPoint r{Vec(2), Vec(2), Vec(1)};
        r.u << 3 * t - 3.5;
        r.x << 0.5 * t * t * t - 1.75 * t * t + t + 1, 1.5 * t * t - 3.5 * t + 1;
        r.lam << 3, 3.5 - 3 * t;
        return r;
    };
    b.reference.pi_hat = Vec(2);
    b.reference.pi_hat << 3, -2.5;
    b.reference.tf_hat = 2.0;
    b.reference.J_hat = 3.25;
    return b;
}

OcpProblem brachistochrone_problem(double gv, const Vec& target) {
    OcpProblem p;
    p.name = "brachistochrone";
    p.n = 3;
    p.m = 1;
    p.q = 2;
    p.t0 = 0.0;
    p.tf = 1.0;
    p.x0 = Vec::Zero(3);
    p.mode = TerminalMode::FreeTfWithConstraint;
    p.autonomous = true;
    p.f = [gv](const Vec& x, const Vec& u, double) {
        Vec r(3);
        r << x[2] * std::sin(u[0]), -x[2] * std::cos(u[0]), gv * std::cos(u[0]);
        return r;
    };
    p.fx = [](const Vec&, const Vec& u, double) {
        Mat J = Mat::Zero(3, 3);
        J(0, 2) = std::sin(u[0]);
        J(1, 2) = -std::cos(u[0]);
        return J;
    };
    p.fu = [gv](const Vec& x, const Vec& u, double) {
        Mat J(3, 1);
        J << x[2] * std::cos(u[0]), x[2] * std::sin(u[0]), -gv * std::sin(u[0]);
        return J;
    };
    p.L = [](const Vec&, const Vec&, double) { return 0.0; };
    p.Lx = [](const Vec&, const Vec&, double) { return Vec::Zero(3).eval(); };
    p.Lu = [](const Vec&, const Vec&, double) { return Vec::Zero(1).eval(); };
    // minimum time: φ = t_f
    p.phi = [](const Vec&, double t) { return t; };
    p.phix = [](const Vec&, double) { return Vec::Zero(3).eval(); };
    p.phit = [](const Vec&, double) { return 1.0; };
    p.phixx = [](const Vec&, double) { return Mat::Zero(3, 3).eval(); };
    p.phixt = [](const Vec&, double) { return Vec::Zero(3).eval(); };
    p.phitt = [](const Vec&, double) { return 0.0; };
    p.g = [target](const Vec& x, double) { return Vec(x.head(2) - target); };
    p.gx = [](const Vec&, double) {
        Mat J = Mat::Zero(2, 3);
        J(0, 0) = J(1, 1) = 1.0;
        return J;
    };
    p.gt = [](const Vec&, double) { return Vec::Zero(2).eval(); };
    p.gxt = [](const Vec&, double) { return Mat::Zero(2, 3).eval(); };
    p.gtt = [](const Vec&, double) { return Vec::Zero(2).eval(); };
    p.gxx_pi = [](const Vec&, double, const Vec&) { return Mat::Zero(3, 3).eval(); };
    p.Hxx = [](const Vec&, const Vec&, const Vec&, double) { return Mat::Zero(3, 3).eval(); };
    p.Hux = [](const Vec&, const Vec& l, const Vec& u, double) {
        Mat J = Mat::Zero(1, 3);
        J(0, 2) = l[0] * std::cos(u[0]) + l[1] * std::sin(u[0]);
        return J;
    };
    p.Huu = [gv](const Vec& x, const Vec& l, const Vec& u, double) {
        const double s = std::sin(u[0]), c = std::cos(u[0]);
        return Mat::Constant(1, 1, -l[0] * x[2] * s + l[1] * x[2] * c - l[2] * gv * c);
    };
    p.Ht = [](const Vec&, const Vec&, const Vec&, double) { return 0.0; };
    return complete(p);
}

Cycloid cycloid_reference(double xf, double yf, double gv) {
    if (!(xf > 0.0) || !(yf < 0.0) || !(gv > 0.0) || !std::isfinite(xf) || !std::isfinite(yf) || !std::isfinite(gv))
        throw NoCycloid("cycloid endpoint needs x_f > 0, y_f < 0, g > 0");
    const double two_pi = 2.0 * std::numbers::pi;
    // (θ − sinθ)(−y_f) − x_f(1 − cosθ) changes sign exactly once on (0, 2π)
    auto F = [&](double th) {
        const double t2 = th * th;
        const double a = th < 1e-2 ? th * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0)) : th - std::sin(th);
        const double s = std::sin(0.5 * th);
        return a * (-yf) - xf * 2.0 * s * s;
    };
    double lo = 1e-12, hi = two_pi - 1e-12;
    if (!(F(lo) < 0.0 && F(hi) > 0.0)) throw NoCycloid("no cycloid root on (0, 2π)");
    while (hi - lo > 1e-14) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) < 0.0 ? lo : hi) = mid;
        if (mid == lo && mid == hi) break;
    }
    Cycloid c;
    c.theta = 0.5 * (lo + hi);
    c.R = -yf / (1.0 - std::cos(c.theta));
    const double w = std::sqrt(gv / c.R);
    c.tf = c.theta / w;
    const double sgr = std::sqrt(gv * c.R);
    const double a = -1.0 / (2.0 * sgr);
    const double b = -a * std::cos(0.5 * c.theta) / std::sin(0.5 * c.theta);
    const double R = c.R;
    c.ref.sample = [=](double t) {
        const double th = w * t, u = 0.5 * th;
        RefPoint r{Vec(3), Vec(3), Vec(1)};
        r.x << R * (th - std::sin(th)), -R * (1.0 - std::cos(th)), 2.0 * sgr * std::sin(u);
        r.lam << a, b, 2.0 * sgr * (a * std::cos(u) + b * std::sin(u)) / gv;
        r.u << u;
        return r;
    };
    c.ref.pi_hat = Vec(2);
    c.ref.pi_hat << a, b;
    c.ref.tf_hat = c.tf;
    c.ref.J_hat = c.tf;
    return c;
}

Benchmark example2() {
    Vec target(2);
    target << 2, -2;
    Benchmark b{brachistochrone_problem(10.0, target), cycloid_reference(2.0, -2.0, 10.0).ref};
    b.problem.name = "example2";
    return b;
}

Trajectory reference_trajectory(const ReferenceSolution& ref, const Grid& grid) {
    const RefPoint r0 = ref.sample(grid.t0);
    Trajectory tr{grid, GridSeries(r0.x.size(), grid.N), GridSeries(r0.lam.size(), grid.N),
                  GridSeries(r0.u.size(), grid.N)};
    for (int i = 0; i < grid.N; ++i) {
        const RefPoint r = ref.sample(grid.t(i));
        tr.x.col(i) = r.x;
        tr.lam.col(i) = r.lam;
        tr.u.col(i) = r.u;
    }
    return tr;
}

ErrorMetrics error_metrics(const OcpProblem& p, const Trajectory& tr, const Vec& pi, double tf,
                           const ReferenceSolution& ref) {
    ErrorMetrics e;
    e.e_x = Vec::Zero(p.n);
    e.e_lambda = Vec::Zero(p.n);
    for (int i = 0; i < tr.grid.N; ++i) {
        const RefPoint r = ref.sample(tr.grid.t(i));
        e.e_u = std::max(e.e_u, (tr.u.col(i) - r.u).cwiseAbs().maxCoeff());
        e.e_x = e.e_x.cwiseMax((tr.x.col(i) - r.x).cwiseAbs());
        e.e_lambda = e.e_lambda.cwiseMax((tr.lam.col(i) - r.lam).cwiseAbs());
    }
    e.e_J = std::abs(bolza_cost(p, tr) - ref.J_hat);
    e.e_tf = std::abs(tf - ref.tf_hat);
    e.e_pi = (pi - ref.pi_hat).cwiseAbs();
    return e;
}

Vec random_compact_state(const OcpProblem& p, int N, double u_center, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const CompactLayout lay = CompactLayout::of(p, N);
    GridSeries u(p.m, N);
    for (int j = 0; j < p.m; ++j) {
        double a[3], ph[3];
        for (int k = 0; k < 3; ++k) {
            a[k] = 0.3 * U(rng);
            ph[k] = std::numbers::pi * U(rng);
        }
        for (int i = 0; i < N; ++i) {
            const double s = double(i) / (N - 1);
            double v = u_center;
            for (int k = 0; k < 3; ++k) v += a[k] * std::sin((k + 1) * std::numbers::pi * s + ph[k]);
            u(j, i) = v;
        }
    }
    Vec pi(lay.q);
    for (int j = 0; j < lay.q; ++j) pi[j] = 0.5 * U(rng);
    const double tf = p.tf * (1.0 + 0.1 * U(rng));
    return lay.pack(u, tf, pi);
}

}  // namespace vem
