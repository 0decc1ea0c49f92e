// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cstdarg>
#include <cstring>
#include <random>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "vem/errors.hpp"
#include "vem/evolve.hpp"
#include "vem/flows.hpp"

using namespace vem;
namespace fs = std::filesystem;

namespace {

struct Run {
    std::string label;
    OcpProblem p;
    EvolveResult res;
    double seconds = 0.0;
    Trajectory traj;
    double tf = 0.0;
    Vec pi;
};

Run solve(const std::string& label, const OcpProblem& p, Form form, int N, double u0, double K, double k_tf,
          double K_pi, double tau_end, double rtol, double atol) {
    const Weights w = Weights::identity(p);
    const int kd = form == Form::Compact ? p.m : 2 * p.n + p.m;
    const EvolutionState s = initial_state(p, form, N, u0, Gains::scaled(p, kd, K, k_tf, K_pi), w);
    EvolveOptions o;
    o.tau_end = tau_end;
    o.rtol = rtol;
    o.atol = atol;
    o.trace_every = tau_end / 100;
    o.record_steps = true;
    Run r{label, p, {}, 0.0, {}, 0.0, {}};
    const auto t0 = std::chrono::steady_clock::now();
    r.res = evolve(p, s, o);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (form == Form::Compact) {
        const CompactLayout lay = CompactLayout::of(p, N);
        r.tf = lay.tf(r.res.y, p.tf);
        r.pi = lay.pi(r.res.y);
        r.traj = quasi_feasible(p, lay.u(r.res.y), r.pi, make_grid(N, p.t0, r.tf));
    } else {
        const PrimaryState ps = PrimaryLayout::of(p, N).unpack(r.res.y, p.tf);
        r.tf = ps.tf;
        r.pi = ps.pi;
        r.traj = as_trajectory(ps, make_grid(N, p.t0, r.tf));
    }
    return r;
}

long monotone_violations(const EvolveTrace& t) {
    long bad = 0;
    for (size_t k = 1; k < t.step_jbar.size(); ++k)
        if (t.step_jbar[k] > t.step_jbar[k - 1] * (1 + 1e-9)) ++bad;
    return bad;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

int failures = 0;
void report(int n, bool ok, const std::string& detail) {
    if (!ok) ++failures;
    std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double max_abs(const Mat& m) { return m.lpNorm<Eigen::Infinity>(); }

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "vem";
    const Benchmark b1 = example1(), b2 = example2();

    // 1
    Run c1 = solve("example1 compact", b1.problem, Form::Compact, 41, 0.0, 1.0, 1.0, 1.0, 300.0, 1e-3, 1e-6);
    const ErrorMetrics m1 = error_metrics(b1.problem, c1.traj, c1.pi, c1.tf, b1.reference);
    {
        const double J = bolza_cost(b1.problem, c1.traj);
        const double epi = m1.e_pi.lpNorm<Eigen::Infinity>();
        const bool ok = !c1.res.trace.failed() && m1.e_u <= 1e-3 && epi <= 1e-3 && std::abs(J - 3.25) <= 1e-3 &&
                        c1.seconds <= 30.0;
        report(1, ok,
               fmt("e_u=%.3g |pi-pi_hat|=%.3g |J-3.25|=%.3g runtime=%.2fs status=%s", m1.e_u, epi,
                   std::abs(J - 3.25), c1.seconds, status_name(c1.res.trace.status)));
    }

    // 2: the primary form with K = 3·I, tight integrator tolerances
    Run p1 = solve("example1 primary", b1.problem, Form::Primary, 41, 0.0, 3.0, 1.0, 1.0, 300.0, 1e-6, 1e-9);
    const ErrorMetrics mp1 = error_metrics(b1.problem, p1.traj, p1.pi, p1.tf, b1.reference);
    {
        const int len = PrimaryLayout::of(b1.problem, 41).size();
        const bool ok = len == 207 && !p1.res.trace.failed() && mp1.e_u <= 5e-2 && 10 * m1.e_u <= mp1.e_u;
        report(2, ok,
               fmt("flat=%d primary e_u=%.3g compact e_u=%.3g ratio=%.3g runtime=%.1fs", len, mp1.e_u, m1.e_u,
                   mp1.e_u / m1.e_u, p1.seconds));
    }

    // 3
    Run c2 = solve("example2 compact", b2.problem, Form::Compact, 101, 0.0, 0.1, 0.01, 0.1, 400.0, 1e-3, 1e-6);
    const ErrorMetrics m2 = error_metrics(b2.problem, c2.traj, c2.pi, c2.tf, b2.reference);
    {
        const int len = CompactLayout::of(b2.problem, 101).size();
        const double epi = std::max(std::abs(c2.pi[0] + 0.1477), std::abs(c2.pi[1] - 0.0564));
        const bool ok = len == 104 && !c2.res.trace.failed() && std::abs(c2.tf - 0.8165) <= 5e-3 &&
                        std::abs(c2.tf - b2.reference.tf_hat) <= 5e-3 && epi <= 2e-3 && m2.e_u <= 5e-3 &&
                        c2.seconds <= 300.0;
        report(3, ok,
               fmt("flat=%d t_f=%.6f (oracle %.6f) pi=(%.5f, %.5f) e_u=%.3g runtime=%.2fs status=%s tau=%.1f", len,
                   c2.tf, b2.reference.tf_hat, c2.pi[0], c2.pi[1], m2.e_u, c2.seconds,
                   status_name(c2.res.trace.status), c2.res.tau));
    }

    // 4: the Example 2 primary run starts from u ≡ 0.8 with the compact gains
    Run p2 = solve("example2 primary", b2.problem, Form::Primary, 101, 0.8, 0.1, 0.01, 0.1, 400.0, 1e-6, 1e-9);
    {
        bool ok = true;
        std::string d;
        for (const Run* r : {&c1, &p1, &c2, &p2}) {
            const long v = monotone_violations(r->res.trace);
            ok = ok && v == 0 && !r->res.trace.failed() && r->res.trace.accepted > 0;
            d += fmt("[%s: %ld steps, %ld violations, %ld guard rejections, %s] ", r->label.c_str(),
                     r->res.trace.accepted, v, r->res.trace.rejected_monotone, status_name(r->res.trace.status));
        }
        const ErrorMetrics mp2 = error_metrics(b2.problem, p2.traj, p2.pi, p2.tf, b2.reference);
        d += fmt("example2 primary t_f=%.5f e_u=%.3g", p2.tf, mp2.e_u);
        report(4, ok, d);
    }

    // 5
    {
        struct Mode {
            const char* name;
            OcpProblem p;
            int N;
            double u_center;
            double tf_tol;
        };
        const std::vector<Mode> modes{{"fixed t_f (example1)", b1.problem, 41, 0.0, 1e-4},
                                      {"free t_f (example2)", b2.problem, 101, 0.9, 1e-3},
                                      {"free terminal state", vt::free_state_problem(), 41, 0.0, 1e-4}};
        std::mt19937_64 rng(20240601);
        bool ok = true;
        std::string d;
        for (const Mode& m : modes) {
            const Weights w = Weights::identity(m.p);
            const GridSpec spec{m.N, m.p.t0, m.p.tf};
            const CompactLayout lay = CompactLayout::of(m.p, m.N);
            vt::BlockErr worst;
            for (int k = 0; k < 20; ++k) {
                const Vec y = random_compact_state(m.p, m.N, m.u_center, rng);
                const vt::BlockErr e =
                    vt::block_errors(vt::analytic_gradient(y, m.p, w, spec), vt::fd_gradient(y, m.p, w, spec), lay);
                worst.u = std::max(worst.u, e.u);
                worst.tf = std::max(worst.tf, e.tf);
                worst.pi = std::max(worst.pi, e.pi);
            }
            ok = ok && worst.u <= 1e-4 && worst.pi <= 1e-4 && worst.tf <= m.tf_tol;
            d += fmt("[%s: u %.2g, t_f %.2g, pi %.2g] ", m.name, worst.u, worst.tf, worst.pi);
        }
        report(5, ok, d);
    }

    // 6
    {
        const Trajectory& t1 = c1.traj;
        const FundamentalSet f1 = fundamental_set(b1.problem, t1, t1.grid);
        const double e1 = max_abs(costates_explicit(b1.problem, t1.x, t1.u, c1.pi, f1, t1.grid) -
                                  propagate_costates(b1.problem, t1.x, t1.u, c1.pi, t1.grid));
        const Grid g = make_grid(401, 0.0, c2.tf);
        const Trajectory ref = reference_trajectory(b2.reference, g);
        const Trajectory t2 = quasi_feasible(b2.problem, ref.u, b2.reference.pi_hat, g);
        const FundamentalSet f2 = fundamental_set(b2.problem, t2, g);
        const double e2 = max_abs(costates_explicit(b2.problem, t2.x, t2.u, b2.reference.pi_hat, f2, g) - t2.lam);
        report(6, e1 <= 1e-8 && e2 <= 1e-6, fmt("example1 %.3g, example2 (N=401) %.3g", e1, e2));
    }

    // 7
    {
        const FundamentalSet f1 = fundamental_set(b1.problem, c1.traj, c1.traj.grid);
        const FundamentalSet f2 = fundamental_set(b2.problem, c2.traj, c2.traj.grid);
        bool identity = true;
        for (const FundamentalSet* f : {&f1, &f2})
            for (int i = 0; i < f->N(); ++i) identity = identity && phi(*f, i, i) == Mat::Identity(f->M[0].rows(), f->M[0].rows());
        auto semigroup = [](const FundamentalSet& f) {
            double e = 0;
            for (int i = 0; i < f.N(); i += 3)
                for (int j = 0; j < f.N(); j += 5)
                    for (int k = 0; k < f.N(); k += 7)
                        e = std::max(e, max_abs(phi(f, i, k) - phi(f, i, j) * phi(f, j, k)));
            return e;
        };
        const double s1 = semigroup(f1), s2 = semigroup(f2);
        // perturbation direction: smooth, nonzero at both ends
        const Grid& g = c2.traj.grid;
        GridSeries du(1, g.N);
        for (int i = 0; i < g.N; ++i) du(0, i) = std::cos(2.0 * g.s[i]) + 0.5 * g.s[i];
        const GridSeries an = control_sensitivity_apply(f2, b2.problem, c2.traj, g, du);
        const double eps = 1e-6;
        const GridSeries xp = propagate_states(b2.problem, ControlInterpolant(c2.traj.u + eps * du, g), g);
        const GridSeries xm = propagate_states(b2.problem, ControlInterpolant(c2.traj.u - eps * du, g), g);
        const GridSeries fd = (xp - xm) / (2 * eps);
        const double cs = max_abs(an - fd) / max_abs(fd);
        report(7, identity && s1 <= 1e-10 && s2 <= 1e-7 && cs <= 1e-4,
               fmt("phi(t,t)=I %s, semigroup example1 %.3g, example2 %.3g, sensitivity vs FD %.3g",
                   identity ? "exact" : "NOT exact", s1, s2, cs));
    }

    // 8
    {
        double worst = 0;
        const Trajectory& t = c2.traj;
        for (int i = 0; i < t.grid.N; ++i)
            worst = std::max(worst, std::abs(hamiltonian(b2.problem, t.x.col(i), t.lam.col(i), t.u.col(i), t.grid.t(i)) + 1.0));
        report(8, worst <= 5e-3, fmt("max |H(t)+1| = %.3g over %d nodes", worst, t.grid.N));
    }

    // 9
    {
        Mat Q(3, 3);
        Q << 3, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
        const ScalarObjective quad{[Q](const Vec& t) { return 0.5 * t.dot(Q * t); },
                                   [Q](const Vec& t) { return Vec(Q * t); }, [Q](const Vec&) { return Q; }};
        Vec th0(3);
        th0 << 1, -2, 0.5;
        EvolveOptions o;
        o.tau_end = 1.0;
        o.rtol = 1e-10;
        o.atol = 1e-12;
        o.trace_every = 0.1;
        const double k_n = 1.5;
        const double en = max_abs(evolve_flow(newton_flow_system(quad, k_n), th0, o).y - th0 * std::exp(-k_n));

        const double alpha = 0.1, k_g = 4.0;
        const Vec a = euler_step(th0, gradient_flow_rhs(quad, th0, k_g), alpha / k_g);
        const Vec bb = gradient_iteration(quad, th0, alpha);
        const bool bitwise = std::memcmp(a.data(), bb.data(), sizeof(double) * 3) == 0;

        std::mt19937_64 rng(9);
        std::normal_distribution<double> n01;
        Mat C = Mat::NullaryExpr(3, 3, [&] { return n01(rng); });
        C = C * C.transpose() + Mat::Identity(3, 3);
        const Vec c = 0.3 * Vec::NullaryExpr(3, [&] { return n01(rng); });
        const Vec lin = Vec::NullaryExpr(3, [&] { return n01(rng); });
        const ScalarObjective cub{
            [=](const Vec& t) { return 0.5 * t.dot(C * t) + (c.array() * t.array().cube()).sum() / 3 + lin.dot(t); },
            [=](const Vec& t) { return Vec(C * t + Vec(c.array() * t.array().square()) + lin); },
            [=](const Vec& t) { return Mat(C + Mat(Vec(2 * c.array() * t.array()).asDiagonal())); }};
        EvolveOptions og = o;
        og.tau_end = 5.0;
        og.rtol = 1e-6;
        og.atol = 1e-9;
        const EvolveResult gr = evolve_flow(gauss_flow_system(cub, 1.0), Vec::NullaryExpr(3, [&] { return n01(rng); }), og);
        const long gv = monotone_violations(gr.trace);
        report(9, en <= 1e-6 && bitwise && gv == 0 && !gr.trace.failed(),
               fmt("newton vs e^{-k tau} %.3g, euler==iteration %s, gauss flow %ld violations in %ld steps (%ld guard rejections)",
                   en, bitwise ? "bitwise" : "DIFFERS", gv, gr.trace.accepted, gr.trace.rejected_monotone));
    }

    // 10
    {
        const fs::path root = fs::temp_directory_path() / "vem_acceptance_det";
        fs::remove_all(root);
        bool ok = true;
        std::string d;
        const std::vector<std::string> setups{"--problem example1 --form compact --nodes 41 --tau-end 300",
                                              "--problem example2 --form primary --tau-end 5 --init-noise 0.02 --seed 4"};
        for (size_t k = 0; k < setups.size(); ++k) {
            std::vector<std::string> outs;
            for (int rep = 0; rep < 2; ++rep) {
                const fs::path dir = root / (std::to_string(k) + "_" + std::to_string(rep));
                const std::string cmd = "\"" + cli + "\" solve " + setups[k] + " --out-dir \"" + dir.string() + "\" > /dev/null 2>&1";
                const int rc = std::system(cmd.c_str());
                ok = ok && rc != -1 && fs::exists(dir / "trajectory.csv");
                outs.push_back(slurp(dir / "trajectory.csv") + "\x1f" + slurp(dir / "trace.csv"));
            }
            const bool same = outs[0] == outs[1] && outs[0].size() > 2;
            ok = ok && same;
            d += fmt("[%s: %s, %zu bytes] ", setups[k].c_str(), same ? "identical" : "DIFFERENT", outs[0].size());
        }
        report(10, ok, d);
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
