#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "vem/primary_form.hpp"

namespace vem {

enum class Form { Compact, Primary };
const char* form_name(Form f);

// Generic autonomous flow dy/dτ = rhs(y) carrying a merit value J̄(y).
struct FlowSystem {
    int dim = 0;
    std::function<FlowEval(const Vec&)> eval;
    std::function<double(const Vec&)> tf_of;  // optional, for the trace
    std::function<Vec(const Vec&)> pi_of;     // optional, for the trace
    // a merit that can go negative (raw h) has no floor to reach
    bool merit_nonnegative = true;
};

struct EvolveOptions {
    double tau_end = 1.0;
    double rtol = 1e-6, atol = 1e-9;
    double trace_every = 1.0;
    double h_init = 0.0;  // 0 picks a starting step automatically
    double min_step = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    // accepted steps may raise J̄ by at most this much, relative
    double monotone_slack = 1e-9;
    // stop once J̄ falls below floor_rel·max(1, J̄(0))
    double floor_rel = 1e-24;
    int checkpoint_every = 10;  // in trace rows
    bool record_steps = true;
    long max_steps = 100'000'000;
};

struct TraceRow {
    double tau = 0.0, jbar = 0.0, rhs_inf = 0.0, tf = 0.0;
    Vec pi;
    double step = 0.0;
};

enum class EvolveStatus { Completed, FloorReached, StiffnessFailure, Divergence, StepLimit };
const char* status_name(EvolveStatus s);

struct Checkpoint {
    double tau = 0.0;
    Vec y;
};

struct EvolveTrace {
    std::vector<TraceRow> rows;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> step_jbar;  // J̄ after each accepted step, J̄(0) first
    long accepted = 0, rejected_error = 0, rejected_monotone = 0, evaluations = 0;
    EvolveStatus status = EvolveStatus::Completed;
    std::string message;
    bool failed() const;
};

struct EvolveResult {
    Vec y;
    double tau = 0.0;
    EvolveTrace trace;
    // throws StiffnessFailure or Divergence when the run failed
    void raise() const;
};

// Dormand–Prince 5(4) with PI step control and a monotone-J̄ guard
EvolveResult evolve_flow(const FlowSystem& sys, const Vec& y0, const EvolveOptions& opts);

struct EvolutionState {
    Form form = Form::Compact;
    Vec flat;
    GridSpec spec;
    Gains gains;
    Weights weights;
};

FlowSystem make_system(const OcpProblem& p, const EvolutionState& s, GradientOptions gopt = {});
EvolveResult evolve(const OcpProblem& p, const EvolutionState& s, const EvolveOptions& opts);

// Final row at rest: ‖RHS‖∞ ≤ tol and J̄ ≤ tol²
bool converged(const EvolveTrace& trace, double tol);

struct AuditReport {
    double u_block = 0.0, tf_block = 0.0, pi_block = 0.0;
    double worst() const;
    std::string worst_block() const;
};

// Compares the compact RHS against central differences of J̄ at a compact state
AuditReport gradient_audit(const OcpProblem& p, const EvolutionState& s, GradientOptions gopt = {});

// state at the start of a compact or primary run
EvolutionState initial_state(const OcpProblem& p, Form form, int N, double u0, const Gains& k, const Weights& w);

}  // namespace vem
