#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vem/evolve.hpp"
#include "vem/problems.hpp"

namespace vem {

// A problem plus the run settings it ships with
struct ProblemSetup {
    OcpProblem problem;
    std::optional<ReferenceSolution> reference;
    int N = 41;
    double tau_end = 300.0;
    double K = 1.0, k_tf = 1.0, K_pi = 1.0;
    double W_xf = 1.0, w_H = 1.0, W_x0 = 1.0, W_lambda = 1.0;
    double u0 = 0.0;
    // the primary form co-evolves x and λ and wants its own gain and start
    double K_primary = 3.0, u0_primary = 0.0;
};

// built-in id ("example1", "example2") or a path to a JSON problem config
ProblemSetup load_problem(const std::string& id_or_path);
std::string export_problem(const std::string& id);

struct RunConfig {
    std::string problem;
    Form form = Form::Compact;
    int N = 0;
    double K = 0, k_tf = 0, K_pi = 0;
    double W_xf = 0, w_H = 0, W_x0 = 0, W_lambda = 0;
    double tau_end = 0;
    double rtol = 1e-3, atol = 1e-6;
    double trace_every = 0;
    double tol = 1e-3;
    double init_noise = 0.0;
    std::string out_dir;
    unsigned long long seed = 0;
};

std::string format_double(double v);

int cmd_solve(const std::vector<std::string>& args);
int cmd_check(const std::vector<std::string>& args);
int cmd_reference(const std::vector<std::string>& args);
int cmd_export(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace vem
