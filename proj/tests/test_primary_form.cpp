#include <cmath>
#include <limits>

#include "doctest.h"
#include "support.hpp"
#include "vem/errors.hpp"
#include "vem/primary_form.hpp"

using namespace vem;

namespace {

PrimaryState analytic_state(int N) {
    const Benchmark b = example1();
    const Trajectory tr = reference_trajectory(b.reference, make_grid(N, 0.0, 2.0));
    return PrimaryState{tr.x, tr.lam, tr.u, 2.0, b.reference.pi_hat};
}

Vec col5(double a, double b, double c, double d, double e) {
    Vec v(5);
    v << a, b, c, d, e;
    return v;
}

// free t_f double integrator with no cost on time, so H(t_f) vanishes with λ and u
OcpProblem free_tf_no_phi() {
    OcpProblem p = vt::free_tf_linear_problem();
    p.phi = [](const Vec&, double) { return 0.0; };
    p.phit = [](const Vec&, double) { return 0.0; };
    return p;
}

}  // namespace

TEST_CASE("primary layout") {
    const OcpProblem p = example1().problem;
    const PrimaryLayout lay = PrimaryLayout::of(p, 41);
    CHECK(lay.block() == 5);
    CHECK(lay.size() == 207);
    CHECK(PrimaryLayout::of(example2().problem, 101).size() == 101 * 7 + 3);

    const PrimaryState s = analytic_state(41);
    const Vec y = lay.pack(s);
    CHECK(y[5 * 3 + 2] == s.lam(0, 3));
    CHECK(y[5 * 3 + 4] == s.u(0, 3));
    const PrimaryState r = lay.unpack(y, 2.0);
    CHECK(r.x == s.x);
    CHECK(r.lam == s.lam);
    CHECK(r.u == s.u);
    CHECK(r.pi == s.pi);
    CHECK(r.tf == 2.0);
}

TEST_CASE("z at the analytic Example 1 solution carries only the stencil error") {
    const OcpProblem p = example1().problem;
    for (int N : {41, 81}) {
        const Grid g = make_grid(N, 0.0, 2.0);
        const GridSeries z = z_vector(p, analytic_state(N), g);
        // x̂₁ is cubic: ẋ − f = (h²/2, 0) at interior nodes, and Aᵀ maps its negative to (0, −h²/2)
        const double h = g.h();
        for (int i = 3; i < N - 3; ++i) CHECK((z.col(i) - col5(0, -h * h / 2, 0, 0, 0)).norm() <= 1e-11);
    }
}

TEST_CASE("z on hand-built states") {
    const OcpProblem p = example1().problem;
    const Grid g = make_grid(41, 0.0, 2.0);
    PrimaryState held{GridSeries::Ones(2, 41), GridSeries::Zero(2, 41), GridSeries::Zero(1, 41), 2.0, Vec::Zero(2)};
    const GridSeries z = z_vector(p, held, g);
    for (int i = 1; i < 40; ++i) CHECK((z.col(i) - col5(0, 1, 0, 0, 0)).norm() <= 1e-12);

    PrimaryState cons = held;
    for (int i = 0; i < 41; ++i) cons.x.col(i) << 1 + g.t(i), 1;
    CHECK(z_vector(p, cons, g).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("h_scalar") {
    const OcpProblem p1 = example1().problem;
    const Grid g = make_grid(21, 0.0, 2.0);
    const PrimaryState s1 = analytic_state(21);
    CHECK_THROWS_AS(h_scalar(p1, s1, Weights::identity(p1), g), ModeError);

    // ẋ = f exactly, λ ≡ 0 solves its own equation, and π = 0 meets transversality
    const OcpProblem p = vt::free_tf_linear_problem();
    PrimaryState s{GridSeries::Zero(2, 21), GridSeries::Zero(2, 21), GridSeries::Zero(1, 21), 2.0, Vec::Zero(2)};
    for (int i = 0; i < 21; ++i) s.x.col(i) << 1 + g.t(i), 1;
    CHECK(std::abs(h_scalar(p, s, Weights::identity(p), g)) <= 1e-12);
}

TEST_CASE("h has the sign of the t_f derivative of J̄ at a perturbed brachistochrone state") {
    const OcpProblem p = example2().problem;
    const Weights w = Weights::identity(p);
    const int N = 51;
    const double tf = 0.85;
    const Grid g = make_grid(N, 0.0, tf);
    GridSeries u(1, N);
    for (int i = 0; i < N; ++i) u(0, i) = 0.1 + 1.3 * g.s[i];
    Vec pi(2);
    pi << -0.14, 0.06;
    const Trajectory tr = quasi_feasible(p, u, pi, g);
    PrimaryState s{tr.x, tr.lam, tr.u, tf, pi};
    s.x(2, N - 1) += 0.05;
    const double h = h_scalar(p, s, w, g);
    const PrimaryLayout lay = PrimaryLayout::of(p, N);
    Vec y = lay.pack(s);
    const int k = N * lay.block();
    const double e = 1e-6;
    Vec a = y, b = y;
    a[k] += e;
    b[k] -= e;
    const GridSpec spec{N, 0.0, tf};
    const double fd = (jbar_primary_at(a, p, w, spec) - jbar_primary_at(b, p, w, spec)) / (2 * e);
    CAPTURE(h);
    CAPTURE(fd);
    CHECK((h > 0) == (fd > 0));
}

TEST_CASE("rhs_primary at the analytic Example 1 solution vanishes with the grid") {
    const OcpProblem p = example1().problem;
    const Weights w = Weights::identity(p);
    // interior rows see the h²/2 stencil error; the rows next to the ends see its jump to h², divided by h
    struct Norms {
        double inner, all;
    };
    auto norm_at = [&](int N) {
        const PrimaryLayout lay = PrimaryLayout::of(p, N);
        const Gains k = Gains::scaled(p, lay.block(), 1.0, 1.0, 1.0);
        const Vec r = rhs_primary(lay.pack(analytic_state(N)), p, k, w, {N, 0.0, 2.0});
        const int B = lay.block();
        return Norms{r.segment(4 * B, (N - 8) * B).lpNorm<Eigen::Infinity>(), r.lpNorm<Eigen::Infinity>()};
    };
    const Norms a = norm_at(41), b = norm_at(81), c = norm_at(161);
    CAPTURE(a.inner);
    CAPTURE(a.all);
    CHECK(a.inner <= 5 * 0.05 * 0.05);
    CHECK(a.inner / b.inner == doctest::Approx(4.0).epsilon(0.1));
    CHECK(b.inner / c.inner == doctest::Approx(4.0).epsilon(0.1));
    CHECK(a.all <= 0.05);
    CHECK(a.all / b.all == doctest::Approx(2.0).epsilon(0.1));
    CHECK(b.all / c.all == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("an explicit Euler step descends J̄") {
    const OcpProblem p = example1().problem;
    const Weights w = Weights::identity(p);
    const int N = 41;
    const PrimaryLayout lay = PrimaryLayout::of(p, N);
    const Gains k = Gains::scaled(p, lay.block(), 1.0, 1.0, 1.0);
    const GridSpec spec{N, 0.0, 2.0};
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 5; ++trial) {
        Vec y = lay.pack(analytic_state(N));
        // smooth perturbation in every component
        const double a = n01(rng), b = n01(rng), c = n01(rng);
        for (int i = 0; i < N; ++i) {
            const double s = double(i) / (N - 1);
            for (int j = 0; j < 5; ++j) y[i * 5 + j] += 0.2 * (a * std::sin(3 * s + j) + b * s * s + c * std::cos(j * s));
        }
        y.tail(2) += 0.2 * Vec::NullaryExpr(2, [&] { return n01(rng); });
        const double J0 = jbar_primary_at(y, p, w, spec);
        const Vec r = rhs_primary(y, p, k, w, spec);
        CHECK(jbar_primary_at(y + 1e-3 * r, p, w, spec) < J0);
    }
}

TEST_CASE("fixed and free t_f rows agree when t_f is at rest") {
    OcpProblem pf = free_tf_no_phi();
    OcpProblem px = pf;
    px.mode = TerminalMode::FixedTfWithConstraint;
    const int N = 21;
    const Grid g = make_grid(N, 0.0, 2.0);
    PrimaryState s{GridSeries::Zero(2, N), GridSeries::Zero(2, N), GridSeries::Zero(1, N), 2.0, Vec::Zero(2)};
    for (int i = 0; i < N; ++i) s.x.col(i) << 1 + g.t(i), 1;
    const Weights w = Weights::identity(pf);
    const int b = 5;
    const PrimaryLayout lf = PrimaryLayout::of(pf, N), lx = PrimaryLayout::of(px, N);
    const Gains kf = Gains::scaled(pf, b, 1.0, 1.0, 1.0), kx = Gains::scaled(px, b, 1.0, 1.0, 1.0);
    const Vec rf = rhs_primary(lf.pack(s), pf, kf, w, {N, 0.0, 2.0});
    const Vec rx = rhs_primary(lx.pack(s), px, kx, w, {N, 0.0, 2.0});
    REQUIRE(rf.size() == rx.size() + 1);
    CHECK(std::abs(rf[N * b]) <= 1e-12);
    CHECK((rf.head(N * b) - rx.head(N * b)).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((rf.tail(2) - rx.tail(2)).lpNorm<Eigen::Infinity>() <= 1e-12);
    // and the state is not an equilibrium: g = (3, 1) pushes the terminal rows
    CHECK(rx.lpNorm<Eigen::Infinity>() > 0.5);
}

TEST_CASE("jbar from the RHS evaluation matches jbar_primary") {
    const OcpProblem p = example2().problem;
    const Weights w = Weights::identity(p);
    const int N = 31;
    const PrimaryLayout lay = PrimaryLayout::of(p, N);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    Vec y = Vec::NullaryExpr(lay.size(), [&] { return 0.3 * n01(rng); });
    y[N * lay.block()] = 0.9;
    const GridSpec spec{N, 0.0, 1.0};
    const FlowEval ev = rhs_primary_eval(y, p, Gains::scaled(p, lay.block(), 0.1, 0.01, 0.1), w, spec);
    CHECK(ev.jbar == doctest::Approx(jbar_primary_at(y, p, w, spec)).epsilon(1e-12));

    y[5] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(rhs_primary(y, p, Gains::scaled(p, lay.block(), 0.1, 0.01, 0.1), w, spec), NonFiniteEvaluation);
}
