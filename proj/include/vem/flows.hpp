#pragma once

#include <functional>

#include "vem/evolve.hpp"

namespace vem {

struct ScalarObjective {
    std::function<double(const Vec&)> h;
    std::function<Vec(const Vec&)> h_theta;
    std::function<Mat(const Vec&)> h_thetatheta;
};

Vec gradient_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_g);
// throws SingularHessian
Vec newton_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_n);
Vec gauss_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_n);

// discrete gradient iteration θ − α·hθ
Vec gradient_iteration(const ScalarObjective& obj, const Vec& theta, double alpha);
Vec euler_step(const Vec& theta, const Vec& rhs, double dt);

// flows as evolve systems; merit h for the gradient flow, hθᵀhθ for the others
FlowSystem gradient_flow_system(const ScalarObjective& obj, double k_g);
FlowSystem newton_flow_system(const ScalarObjective& obj, double k_n);
FlowSystem gauss_flow_system(const ScalarObjective& obj, double k_n);

}  // namespace vem
