#include "vem/evolve.hpp"

#include <algorithm>
#include <cmath>

#include "vem/errors.hpp"

namespace vem {

const char* form_name(Form f) { return f == Form::Compact ? "compact" : "primary"; }

const char* status_name(EvolveStatus s) {
    switch (s) {
        case EvolveStatus::Completed: return "completed";
        case EvolveStatus::FloorReached: return "floor_reached";
        case EvolveStatus::StiffnessFailure: return "stiffness_failure";
        case EvolveStatus::Divergence: return "divergence";
        case EvolveStatus::StepLimit: return "step_limit";
    }
    return "?";
}

bool EvolveTrace::failed() const {
    return status == EvolveStatus::StiffnessFailure || status == EvolveStatus::Divergence ||
           status == EvolveStatus::StepLimit;
}

void EvolveResult::raise() const {
    if (trace.status == EvolveStatus::Divergence) throw Divergence(trace.message);
    if (trace.failed()) throw StiffnessFailure(trace.message);
}

namespace {

// Dormand–Prince tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// 5th-order weights equal row 7; e_i = b_i − b*_i
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

bool all_finite(const Vec& v) { return v.allFinite(); }

double err_norm(const Vec& e, const Vec& y0, const Vec& y1, const EvolveOptions& o) {
    if (e.size() == 0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = e[i] / sc;
        s += r * r;
    }
    return std::sqrt(s / double(e.size()));
}

struct Trial {
    bool ok = false;
    Vec y;
    FlowEval end;
    double err = 0.0;
};

}  // namespace

EvolveResult evolve_flow(const FlowSystem& sys, const Vec& y0, const EvolveOptions& o) {
    if (!(o.tau_end > 0.0) || !(o.trace_every > 0.0) || !(o.rtol > 0.0) || !(o.atol > 0.0))
        throw ConfigError("evolution horizon, trace interval and tolerances must be positive");
    EvolveResult res;
    EvolveTrace& tr = res.trace;
    res.y = y0;

    auto safe_eval = [&](const Vec& y, FlowEval& out) {
        ++tr.evaluations;
        try {
            out = sys.eval(y);
        } catch (const NonFiniteEvaluation&) {
            return false;
        } catch (const BadHorizon&) {
            return false;
        }
        return all_finite(out.rhs) && std::isfinite(out.jbar);
    };
    auto push_row = [&](double tau, const Vec& y, const FlowEval& e, double step) {
        TraceRow r;
        r.tau = tau;
        r.jbar = e.jbar;
        r.rhs_inf = e.rhs.size() ? e.rhs.lpNorm<Eigen::Infinity>() : 0.0;
        r.tf = sys.tf_of ? sys.tf_of(y) : 0.0;
        r.pi = sys.pi_of ? sys.pi_of(y) : Vec(0);
        r.step = step;
        tr.rows.push_back(std::move(r));
    };

    FlowEval E;
    if (!all_finite(y0) || !safe_eval(y0, E)) {
        tr.status = EvolveStatus::Divergence;
        tr.message = "non-finite initial state";
        return res;
    }
    const double floor = sys.merit_nonnegative ? o.floor_rel * std::max(1.0, E.jbar)
                                               : -std::numeric_limits<double>::infinity();
    push_row(0.0, y0, E, 0.0);
    tr.checkpoints.push_back({0.0, y0});
    if (o.record_steps) tr.step_jbar.push_back(E.jbar);

    Vec y = y0;
    double tau = 0.0;
    const Eigen::Index d = y.size();

    double h = o.h_init;
    if (!(h > 0.0)) {
        // starting step from the size of y and its rate
        double d0 = 0, d1 = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double sc = o.atol + o.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (E.rhs[i] / sc) * (E.rhs[i] / sc);
        }
        d0 = std::sqrt(d0 / std::max<double>(1, d));
        d1 = std::sqrt(d1 / std::max<double>(1, d));
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        FlowEval E1;
        if (safe_eval(y + h * E.rhs, E1)) {
            double d2 = 0;
            for (Eigen::Index i = 0; i < d; ++i) {
                const double sc = o.atol + o.rtol * std::abs(y[i]);
                const double r = (E1.rhs[i] - E.rhs[i]) / sc;
                d2 += r * r;
            }
            d2 = std::sqrt(d2 / std::max<double>(1, d)) / h;
            const double m = std::max(d1, d2);
            const double h1 = m <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / m, 0.2);
            h = std::min(100.0 * h, h1);
        } else {
            h *= 1e-3;
        }
    }
    h = std::min({h, o.max_step, o.tau_end});

    Vec k2(d), k3(d), k4(d), k5(d), k6(d), ytmp(d);
    auto trial = [&](double hs) {
        Trial t;
        FlowEval tmp;
        const Vec& k1 = E.rhs;
        ytmp = y + hs * a21 * k1;
        if (!safe_eval(ytmp, tmp)) return t;
        k2 = tmp.rhs;
        ytmp = y + hs * (a31 * k1 + a32 * k2);
        if (!safe_eval(ytmp, tmp)) return t;
        k3 = tmp.rhs;
        ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        if (!safe_eval(ytmp, tmp)) return t;
        k4 = tmp.rhs;
        ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        if (!safe_eval(ytmp, tmp)) return t;
        k5 = tmp.rhs;
        ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        if (!safe_eval(ytmp, tmp)) return t;
        k6 = tmp.rhs;
        t.y = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        if (!all_finite(t.y) || !safe_eval(t.y, t.end)) return t;
        const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * t.end.rhs);
        t.err = err_norm(err, y, t.y, o);
        t.ok = std::isfinite(t.err);
        return t;
    };

    double err_old = 1e-4;
    // steps that raised J̄ leave a slowly relaxing ceiling behind
    double h_cap = std::numeric_limits<double>::infinity();
    bool last_rejected = false;
    long next_row = 1;
    long steps = 0;
    double last_step = 0.0;
    while (tau < o.tau_end) {
        if (++steps > o.max_steps) {
            tr.status = EvolveStatus::StepLimit;
            tr.message = "step limit reached at tau=" + std::to_string(tau);
            break;
        }
        const double target = std::min(double(next_row) * o.trace_every, o.tau_end);
        double hs = std::min({h, o.max_step, h_cap});
        bool landing = false;
        if (tau + hs >= target - 1e-12 * std::max(1.0, std::abs(target))) {
            hs = target - tau;
            landing = true;
        }
        Trial t = trial(hs);
        if (!t.ok) {
            ++tr.rejected_error;
            h = 0.25 * hs;
            last_rejected = true;
            if (h < o.min_step) {
                tr.status = EvolveStatus::Divergence;
                tr.message = "non-finite flow state at tau=" + std::to_string(tau);
                break;
            }
            continue;
        }
        if (t.err > 1.0) {
            ++tr.rejected_error;
            h = hs * std::max(0.2, 0.9 * std::pow(t.err, -0.2));
            last_rejected = true;
            if (h < o.min_step) {
                tr.status = EvolveStatus::StiffnessFailure;
                tr.message = "step size underflow at tau=" + std::to_string(tau) + "; try smaller gains";
                break;
            }
            continue;
        }
        if (t.end.jbar > E.jbar + o.monotone_slack * std::abs(E.jbar)) {
            ++tr.rejected_monotone;
            h = 0.5 * hs;
            h_cap = 0.9 * hs;
            last_rejected = true;
            if (h < o.min_step) {
                tr.status = EvolveStatus::StiffnessFailure;
                tr.message = "J̄ increases at every admissible step, tau=" + std::to_string(tau) + "; try smaller gains";
                break;
            }
            continue;
        }
        // accepted
        ++tr.accepted;
        const double err = std::max(t.err, 1e-10);
        double fac = 0.9 * std::pow(err, -0.17) * std::pow(err_old, 0.04);
        fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
        const double h_next = hs * fac;
        h = landing ? std::max(h, h_next) : h_next;
        err_old = std::max(t.err, 1e-4);
        last_rejected = false;
        last_step = hs;
        h_cap *= 1.002;
        tau = landing ? target : tau + hs;
        y = std::move(t.y);
        E = std::move(t.end);
        if (o.record_steps) tr.step_jbar.push_back(E.jbar);

        if (E.jbar <= floor) {
            push_row(tau, y, E, last_step);
            tr.checkpoints.push_back({tau, y});
            tr.status = EvolveStatus::FloorReached;
            tr.message = "J̄ reached the floor";
            break;
        }
        if (landing) {
            push_row(tau, y, E, last_step);
            if (long(tr.rows.size() - 1) % std::max(1, o.checkpoint_every) == 0 || tau >= o.tau_end)
                tr.checkpoints.push_back({tau, y});
            ++next_row;
        }
    }
    if (tr.failed()) tr.checkpoints.push_back({tau, y});
    res.y = y;
    res.tau = tau;
    return res;
}

FlowSystem make_system(const OcpProblem& p, const EvolutionState& s, GradientOptions gopt) {
    FlowSystem sys;
    const OcpProblem* pp = &p;
    const Gains k = s.gains;
    const Weights w = s.weights;
    const GridSpec spec = s.spec;
    if (s.form == Form::Compact) {
        const CompactLayout lay = CompactLayout::of(p, spec.N);
        sys.dim = lay.size();
        sys.eval = [pp, k, w, spec, gopt](const Vec& y) { return rhs_compact_eval(y, *pp, k, w, spec, gopt); };
        sys.tf_of = [lay, spec](const Vec& y) { return lay.tf(y, spec.tf); };
        sys.pi_of = [lay](const Vec& y) { return lay.pi(y); };
    } else {
        const PrimaryLayout lay = PrimaryLayout::of(p, spec.N);
        sys.dim = lay.size();
        sys.eval = [pp, k, w, spec](const Vec& y) { return rhs_primary_eval(y, *pp, k, w, spec); };
        sys.tf_of = [lay, spec](const Vec& y) { return lay.unpack(y, spec.tf).tf; };
        sys.pi_of = [lay, spec](const Vec& y) { return lay.unpack(y, spec.tf).pi; };
    }
    return sys;
}

EvolveResult evolve(const OcpProblem& p, const EvolutionState& s, const EvolveOptions& opts) {
    return evolve_flow(make_system(p, s), s.flat, opts);
}

bool converged(const EvolveTrace& trace, double tol) {
    if (trace.rows.size() < 2 || trace.failed()) return false;
    const TraceRow& r = trace.rows.back();
    return r.rhs_inf <= tol && r.jbar <= tol * tol;
}

double AuditReport::worst() const { return std::max({u_block, tf_block, pi_block}); }

std::string AuditReport::worst_block() const {
    if (u_block >= tf_block && u_block >= pi_block) return "u";
    return tf_block >= pi_block ? "tf" : "pi";
}

AuditReport gradient_audit(const OcpProblem& p, const EvolutionState& s, GradientOptions gopt) {
    if (s.form != Form::Compact) throw ModeError("gradient audit applies to the compact form");
    const CompactLayout lay = CompactLayout::of(p, s.spec.N);
    const Vec& y = s.flat;
    const double tf = lay.tf(y, s.spec.tf);
    const Grid grid = make_grid(s.spec.N, s.spec.t0, tf);
    const EvalCache c = build_cache(p, lay.u(y), tf, lay.pi(y), s.weights, grid, CacheOptions{false});
    const CompactGradient g = compact_gradient(c, p, s.weights, gopt);
    const Vec wq = trapz_weights(grid);
    // analytic dJ̄/dy in layout order
    Vec an(lay.size());
    for (int i = 0; i < lay.N; ++i)
        for (int j = 0; j < lay.m; ++j) an[i * lay.m + j] = 2.0 * wq[i] * g.n_u(j, i);
    int o = lay.N * lay.m;
    if (lay.has_tf) an[o++] = 2.0 * g.n_tf;
    for (int j = 0; j < lay.q; ++j) an[o + j] = 2.0 * g.n_pi[j];

    Vec fd(lay.size());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double e = fd_step(y[j]);
        Vec a = y, b = y;
        a[j] += e;
        b[j] -= e;
        fd[j] = (jbar_compact_at(a, p, s.weights, s.spec) - jbar_compact_at(b, p, s.weights, s.spec)) / (2.0 * e);
    }
    auto block = [&](int from, int len) {
        if (len == 0) return 0.0;
        const double ref = fd.segment(from, len).lpNorm<Eigen::Infinity>();
        const double diff = (an - fd).segment(from, len).lpNorm<Eigen::Infinity>();
        return diff / std::max(ref, 1e-12);
    };
    AuditReport r;
    r.u_block = block(0, lay.N * lay.m);
    o = lay.N * lay.m;
    if (lay.has_tf) r.tf_block = block(o++, 1);
    r.pi_block = block(o, lay.q);
    return r;
}

EvolutionState initial_state(const OcpProblem& p, Form form, int N, double u0, const Gains& k, const Weights& w) {
    EvolutionState s;
    s.form = form;
    s.spec = GridSpec{N, p.t0, p.tf};
    s.gains = k;
    s.weights = w;
    const Vec pi = Vec::Zero(p.q_eff());
    if (form == Form::Compact) {
        const CompactLayout lay = CompactLayout::of(p, N);
        s.flat = lay.pack(GridSeries::Constant(p.m, N, u0), p.tf, pi);
    } else {
        const PrimaryLayout lay = PrimaryLayout::of(p, N);
        PrimaryState ps;
        // states consistent with the initial control; λ starts at zero
        const Grid grid = make_grid(N, p.t0, p.tf);
        ps.x = propagate_states(p, ControlInterpolant(GridSeries::Constant(p.m, N, u0), grid), grid);
        ps.lam = GridSeries::Zero(p.n, N);
        ps.u = GridSeries::Constant(p.m, N, u0);
        ps.tf = p.tf;
        ps.pi = pi;
        s.flat = lay.pack(ps);
    }
    return s;
}

}  // namespace vem
