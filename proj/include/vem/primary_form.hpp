#pragma once

#include "vem/compact.hpp"

namespace vem {

struct PrimaryState {
    GridSeries x, lam, u;
    double tf = 1.0;
    Vec pi;
};

struct PrimaryLayout {
    int N = 0, n = 0, m = 0, q = 0;
    bool has_tf = false;

    static PrimaryLayout of(const OcpProblem& p, int N);
    int block() const { return 2 * n + m; }
    int size() const { return N * block() + (has_tf ? 1 : 0) + q; }
    Vec pack(const PrimaryState& s) const;
    PrimaryState unpack(const Vec& flat, double fixed_tf) const;
};

Trajectory as_trajectory(const PrimaryState& s, const Grid& grid);

// (2n+m)×N
GridSeries z_vector(const OcpProblem& p, const PrimaryState& s, const Grid& grid);

double h_scalar(const OcpProblem& p, const PrimaryState& s, const Weights& w, const Grid& grid);

FlowEval rhs_primary_eval(const Vec& flat, const OcpProblem& p, const Gains& k, const Weights& w,
                          const GridSpec& spec);
Vec rhs_primary(const Vec& flat, const OcpProblem& p, const Gains& k, const Weights& w, const GridSpec& spec);

double jbar_primary_at(const Vec& flat, const OcpProblem& p, const Weights& w, const GridSpec& spec);

}  // namespace vem
