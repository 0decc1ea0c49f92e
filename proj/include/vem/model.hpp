#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vem/grid.hpp"

namespace vem {

enum class TerminalMode { FreeTfWithConstraint, FixedTfWithConstraint, FreeTfFreeState };

inline bool free_tf(TerminalMode m) { return m != TerminalMode::FixedTfWithConstraint; }
inline bool constrained(TerminalMode m) { return m != TerminalMode::FreeTfFreeState; }
const char* mode_name(TerminalMode m);

using VecFn = std::function<Vec(const Vec& x, const Vec& u, double t)>;
using MatFn = std::function<Mat(const Vec& x, const Vec& u, double t)>;
using ScalarFn = std::function<double(const Vec& x, const Vec& u, double t)>;
using TermScalarFn = std::function<double(const Vec& x, double t)>;
using TermVecFn = std::function<Vec(const Vec& x, double t)>;
using TermMatFn = std::function<Mat(const Vec& x, double t)>;
using HessFn = std::function<Mat(const Vec& x, const Vec& lam, const Vec& u, double t)>;
using HVecFn = std::function<Vec(const Vec& x, const Vec& lam, const Vec& u, double t)>;
using HScalarFn = std::function<double(const Vec& x, const Vec& lam, const Vec& u, double t)>;

struct OcpProblem {
    std::string name;
    int n = 0, m = 0, q = 0;
    double t0 = 0.0;
    Vec x0;
    // the horizon end when fixed, the starting guess otherwise
    double tf = 1.0;
    TerminalMode mode = TerminalMode::FixedTfWithConstraint;
    // skips the explicit-time partials ft, Hxt, Hut
    bool autonomous = false;

    VecFn f;
    MatFn fx, fu;
    ScalarFn L;
    VecFn Lx, Lu;

    TermScalarFn phi, phit, phitt;
    TermVecFn phix, phixt;
    TermMatFn phixx;

    TermVecFn g, gt, gtt;
    TermMatFn gx, gxt;

    HessFn Hxx, Hux, Huu;
    std::function<Mat(const Vec& x, double t, const Vec& pi)> gxx_pi;
    HScalarFn Ht;

    // explicit-time partials; filled by finite differences when absent
    VecFn ft;
    HVecFn Hxt, Hut;

    int q_eff() const { return constrained(mode) ? q : 0; }
};

// Fills every missing second-derivative or time-partial callback by central
// differences (step 1e-6) of the first-derivative ones. Throws ConfigError on
// missing first-order callbacks or inconsistent dimensions.
OcpProblem complete(OcpProblem prob);

struct Weights {
    Mat W_xf;
    double w_H = 1.0;
    Mat W_x0;
    Mat W_lambda;

    static Weights identity(const OcpProblem& prob);
    void validate(const OcpProblem& prob) const;
};

struct Gains {
    Mat K;  // m×m (compact) or (2n+m)×(2n+m) (primary)
    double k_tf = 1.0;
    Mat K_pi;

    static Gains scaled(const OcpProblem& prob, int k_dim, double k, double k_tf, double k_pi);
    void validate(const OcpProblem& prob, int k_dim) const;
};

struct GridSpec {
    int N = 41;
    double t0 = 0.0;
    double tf = 1.0;  // used when the horizon is fixed
};

struct Trajectory {
    Grid grid;
    GridSeries x, lam, u;
};

struct ResidualReport {
    double dyn_res = 0, costate_res = 0, hu_res = 0, g_res = 0;
    double transversality_res = 0, h_terminal_res = 0, x0_res = 0;
    double max() const;
};

double hamiltonian(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t);
Vec hu(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t);
Vec hx(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double t);

// H(tf) + φ_t + πᵀg_t
double terminal_h_residual(const OcpProblem& p, const Vec& x, const Vec& lam, const Vec& u, double tf,
                           const Vec& pi);
// λ(tf) − φ_x − g_xᵀπ
Vec transversality(const OcpProblem& p, const Vec& x, const Vec& lam, double tf, const Vec& pi);

ResidualReport optimality_report(const OcpProblem& p, const Trajectory& traj, const Vec& pi, double tf);

double jbar_compact(const OcpProblem& p, const Trajectory& traj, const Vec& pi, double tf, const Weights& w);
double jbar_primary(const OcpProblem& p, const Trajectory& traj, const Vec& pi, double tf, const Weights& w);

struct FdEntry {
    std::string name;
    double worst = 0.0;
    bool second_order = false;
};
struct FdReport {
    std::vector<FdEntry> entries;
    const FdEntry& worst() const;
    double worst_first_order() const;
};
FdReport fd_check(const OcpProblem& p, int samples, unsigned long long seed);

double fd_step(double v);

}  // namespace vem
