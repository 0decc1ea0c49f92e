#include "vem/flows.hpp"

#include <Eigen/LU>

#include "vem/errors.hpp"

namespace vem {

Vec gradient_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_g) {
    return -k_g * obj.h_theta(theta);
}

Vec newton_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_n) {
    const Mat H = obj.h_thetatheta(theta);
    Eigen::FullPivLU<Mat> lu(H);
    const double scale = H.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !lu.isInvertible() || lu.rcond() < 1e-14)
        throw SingularHessian("h_θθ is singular at θ");
    return -k_n * lu.solve(obj.h_theta(theta));
}

Vec gauss_flow_rhs(const ScalarObjective& obj, const Vec& theta, double k_n) {
    return -k_n * (obj.h_thetatheta(theta).transpose() * obj.h_theta(theta));
}

Vec gradient_iteration(const ScalarObjective& obj, const Vec& theta, double alpha) {
    return theta - alpha * obj.h_theta(theta);
}

Vec euler_step(const Vec& theta, const Vec& rhs, double dt) { return theta + dt * rhs; }

namespace {

FlowSystem wrap(const ScalarObjective& obj, std::function<Vec(const Vec&)> rhs, bool merit_is_h) {
    FlowSystem s;
    s.eval = [obj, rhs, merit_is_h](const Vec& th) {
        FlowEval e;
        e.rhs = rhs(th);
        if (merit_is_h) {
            e.jbar = obj.h(th);
        } else {
            const Vec g = obj.h_theta(th);
            e.jbar = g.squaredNorm();
        }
        return e;
    };
    return s;
}

}  // namespace

FlowSystem gradient_flow_system(const ScalarObjective& obj, double k_g) {
    FlowSystem s = wrap(obj, [obj, k_g](const Vec& th) { return gradient_flow_rhs(obj, th, k_g); }, true);
    s.merit_nonnegative = false;
    return s;
}

FlowSystem newton_flow_system(const ScalarObjective& obj, double k_n) {
    return wrap(obj, [obj, k_n](const Vec& th) { return newton_flow_rhs(obj, th, k_n); }, false);
}

FlowSystem gauss_flow_system(const ScalarObjective& obj, double k_n) {
    return wrap(obj, [obj, k_n](const Vec& th) { return gauss_flow_rhs(obj, th, k_n); }, false);
}

}  // namespace vem
