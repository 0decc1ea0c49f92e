#pragma once

#include "vem/model.hpp"

namespace vem {

// Natural cubic spline per control channel. Curvatures are stored scaled by h²,
// so midpoint values do not depend on the horizon length.
class ControlInterpolant {
public:
    ControlInterpolant(const GridSeries& u, const Grid& grid);

    Vec eval(double t) const;
    Vec eval_in(int k, double theta) const;
    const GridSeries& nodes() const { return u_; }
    const Grid& grid() const { return grid_; }

    // Transposed evaluation: collects dJ/du(t) at stage points and maps it
    // back onto dJ/du_nodes.
    class Adjoint {
    public:
        Adjoint(int m, int N) : node_(GridSeries::Zero(m, N)), curv_(GridSeries::Zero(m, N)) {}
        void add_node(int i, const Vec& ubar) { node_.col(i) += ubar; }
        void add(int k, double theta, const Vec& ubar);
        GridSeries finalize() const;

    private:
        GridSeries node_, curv_;
    };

private:
    GridSeries u_, c_;
    Grid grid_;
};

// Cubic Hermite in x using f at the two end nodes of each interval.
class StateInterpolant {
public:
    StateInterpolant(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Grid& grid);
    Vec eval_in(int k, double theta) const;
    const GridSeries& slopes() const { return F_; }

private:
    GridSeries x_, F_;
    Grid grid_;
};

int interval_of(const Grid& grid, double t);

GridSeries propagate_states(const OcpProblem& p, const ControlInterpolant& u, const Grid& grid, int substeps = 1);

Vec costate_terminal(const OcpProblem& p, const Vec& x_tf, double tf, const Vec& pi);

GridSeries propagate_costates(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Vec& pi,
                              const Grid& grid, int substeps = 1);

struct FundamentalSet;
GridSeries costates_explicit(const OcpProblem& p, const GridSeries& x, const GridSeries& u, const Vec& pi,
                             const FundamentalSet& fs, const Grid& grid);

struct LbarDerivs {
    double Lbar = 0.0;
    Vec Lx;
    Mat Lxx;
    Mat Lxu;
};
// L̄ = φ_t + φ_xᵀf + L and its x/u partials
LbarDerivs lbar_derivs(const OcpProblem& p, const Vec& x, const Vec& u, double t);

// forward states and backward costates for nodal controls
Trajectory quasi_feasible(const OcpProblem& p, const GridSeries& u, const Vec& pi, const Grid& grid);

// Bolza cost φ(x(tf),tf) + ∫L dt, Simpson rule on the interpolated trajectory
double bolza_cost(const OcpProblem& p, const Trajectory& traj);

}  // namespace vem
