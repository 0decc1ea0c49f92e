#pragma once

#include <vector>

#include "vem/model.hpp"

namespace vem {

struct FundamentalSet {
    std::vector<Mat> M;
    std::vector<Mat> Minv;
    double cond_max = 1.0;
    int N() const { return static_cast<int>(M.size()); }
};

inline constexpr double kMaxTransitionCond = 1e8;

FundamentalSet fundamental_set(const OcpProblem& p, const Trajectory& traj, const Grid& grid);

// Φ(t_i, t_j) = M_i M_j⁻¹
Mat phi(const FundamentalSet& fs, int i, int j);

// δx(t_i) = ∫_{t0}^{t_i} Φ(t_i,s) f_u(s) δu(s) ds for every node
GridSeries control_sensitivity_apply(const FundamentalSet& fs, const OcpProblem& p, const Trajectory& traj,
                                     const Grid& grid, const GridSeries& du);

}  // namespace vem
