#pragma once

#include <functional>
#include <random>

#include "vem/compact.hpp"

namespace vem {

struct RefPoint {
    Vec x, lam, u;
};

struct ReferenceSolution {
    std::function<RefPoint(double t)> sample;
    Vec pi_hat;
    double tf_hat = 0.0;
    double J_hat = 0.0;
};

struct Benchmark {
    OcpProblem problem;
    ReferenceSolution reference;
};

Benchmark example1();
Benchmark example2();

// ẋ = Ax + Bu with ½(uᵀRu + xᵀQx) running cost and x(tf) = target
OcpProblem linear_problem(const Mat& A, const Mat& B, const Mat& R, const Mat& Q, const Vec& x0, const Vec& target,
                          double t0, double tf);
OcpProblem brachistochrone_problem(double gravity, const Vec& target);

struct Cycloid {
    double theta = 0.0;  // θ* at the endpoint
    double R = 0.0;
    double tf = 0.0;
    ReferenceSolution ref;
};
Cycloid cycloid_reference(double x_f, double y_f, double gravity);

Trajectory reference_trajectory(const ReferenceSolution& ref, const Grid& grid);

struct ErrorMetrics {
    double e_J = 0.0, e_u = 0.0, e_tf = 0.0;
    Vec e_x, e_lambda, e_pi;
};
ErrorMetrics error_metrics(const OcpProblem& p, const Trajectory& traj, const Vec& pi, double tf,
                           const ReferenceSolution& ref);

// compact-layout state with a smooth random control around u_center, random π
// and, for free t_f, a horizon within 10% of the problem's guess
Vec random_compact_state(const OcpProblem& p, int N, double u_center, std::mt19937_64& rng);

}  // namespace vem
