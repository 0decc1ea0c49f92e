#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vem/propagate.hpp"
#include "vem/stm.hpp"

namespace vem {

// Stage values of one forward RK4 step (states) and one backward RK4 step
// (costates), kept for the reverse sweep.
struct StateStep {
    std::array<Vec, 4> X, K;
};
struct CostateStep {
    std::array<Vec, 4> Lam, Q;
    Vec xm;  // Hermite midpoint state
};

struct EvalCache {
    Trajectory traj;
    double tf = 0.0;
    Vec pi;
    std::optional<FundamentalSet> fs;
    Vec wq;                       // trapezoid weights
    GridSeries umid;              // spline control at interval midpoints
    GridSeries F;                 // f at nodes
    std::vector<StateStep> xs;
    std::vector<CostateStep> ls;
    GridSeries hu;
    // c(t_i) = ∫_{t0}^{t_i} Φ(t_i,s) f_u H_u ds, as accumulated by the discrete sweep
    GridSeries c_fwd;
    GridSeries lam_bar;           // dJ̄/dλ_i through the H_u terms
    GridSeries xbar_costate;      // dJ̄/dx_i through H_u and the costate recursion
    GridSeries ubar_local;        // direct H_uu H_u part (times 2 w_i)
    GridSeries ubar_costate;      // control part through the costate recursion
    double tbar_interior = 0.0;   // dJ̄/d(tf) collected so far
    // terminal block
    Vec g;
    Mat gx;
    Vec gt;
    double r_H = 0.0;
    double jbar = 0.0;
};

struct CacheOptions {
    bool with_fundamental_set = true;
};

EvalCache build_cache(const OcpProblem& p, const GridSeries& u_nodes, double tf, const Vec& pi, const Weights& w,
                      const Grid& grid, CacheOptions opts = {});

struct GradientOptions {
    double terminal_scale = 1.0;  // fault injection in audits
};

enum NuTerm { kNuLocal = 0, kNuCostate = 1, kNuState = 2, kNuTerminal = 3 };
const char* nu_term_name(int term);

struct CompactGradient {
    GridSeries n_u;
    std::array<GridSeries, 4> terms;  // n_u split by summand
    double n_tf = 0.0;
    Vec n_pi;
};

CompactGradient compact_gradient(const EvalCache& c, const OcpProblem& p, const Weights& w,
                                 GradientOptions opts = {});

GridSeries n_u(const EvalCache& c, const OcpProblem& p, const Weights& w);
double n_tf(const EvalCache& c, const OcpProblem& p, const Weights& w);
Vec n_pi(const EvalCache& c, const OcpProblem& p, const Weights& w);

struct CompactLayout {
    int N = 0, m = 0, q = 0;
    bool has_tf = false;

    static CompactLayout of(const OcpProblem& p, int N);
    int size() const { return N * m + (has_tf ? 1 : 0) + q; }
    Vec pack(const GridSeries& u, double tf, const Vec& pi) const;
    GridSeries u(const Vec& flat) const;
    double tf(const Vec& flat, double fixed_tf) const;
    Vec pi(const Vec& flat) const;
};

struct FlowEval {
    Vec rhs;
    double jbar = 0.0;
};

FlowEval rhs_compact_eval(const Vec& flat, const OcpProblem& p, const Gains& k, const Weights& w,
                          const GridSpec& spec, GradientOptions opts = {});
Vec rhs_compact(const Vec& flat, const OcpProblem& p, const Gains& k, const Weights& w, const GridSpec& spec);

// J̄ at a flat compact state (forward/backward propagation included)
double jbar_compact_at(const Vec& flat, const OcpProblem& p, const Weights& w, const GridSpec& spec);

}  // namespace vem
