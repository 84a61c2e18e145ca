#pragma once

#include <vector>

#include "dgflow/energy.hpp"

namespace dgflow {

enum class StepPolicy {
    Fixed,     // explicit Euler at the configured dt; faithful flow integration
    Adaptive,  // Barzilai-Borwein step with monotone safeguard; minimization
};

struct FlowConfig {
    double dt = 0.05;        // flow-time step
    double t_end = 500.0;    // training horizon T
    double grad_tol = 1e-6;  // stop when |grad I^k| drops below this
    double backoff = 0.5;    // step shrink factor on a loss increase, in (0,1)
    int max_backoffs = 60;
    int record_every = 25;
    StepPolicy policy = StepPolicy::Adaptive;
    long max_steps = 2000000;

    void validate() const;
};

struct TraceEntry {
    double t = 0.0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double dt_used = 0.0;
};

struct TrainingTrace {
    std::vector<TraceEntry> entries;  // strictly increasing t
    long steps = 0;
    long backoff_events = 0;
    long monotonicity_violations = 0;  // accepted steps that raised the loss beyond 1e-12
    bool reached_tol = false;
    bool stalled = false;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    double final_t = 0.0;
};

struct TimeStepConfig {
    double T = 0.1;
    int K = 4;
    bool warm_start = false;
    FlowConfig flow;

    double h() const { return T / K; }
    void validate() const;
};

struct StepDiagnostics {
    int k = 0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
    double wall_time = 0.0;
    long flow_steps = 0;
};

struct SolveResult {
    std::vector<NetworkParams> checkpoints;  // U^1 .. U^K
    std::vector<StepDiagnostics> diagnostics;
};

/// One explicit-Euler update theta <- theta - dt * eta * grad I^k(theta).
/// Raw parameters move; clipping is re-applied at the next evaluation.
NetworkParams flow_step(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act,
                        double dt, double eta);

struct TrainResult {
    NetworkParams net;
    TrainingTrace trace;
};

/// Integrates the parameter flow until grad_tol or t_end. A step that raises
/// the loss is retried with dt * backoff (up to max_backoffs); accepted losses
/// are non-increasing. Under the Adaptive policy the step size additionally
/// follows a Barzilai-Borwein estimate between safeguards.
TrainResult train(const EnergyContext& ctx, const NetworkParams& init, const BumpActivation& act,
                  const FlowConfig& cfg);

struct NetworkHyper {
    int n = 256;
    double delta = 0.75;
    double clip_radius = 0.0;  // 0 => log n
    int dim = 1;

    double resolved_clip(int n_actual) const;
};

/// Full DGFM solve: U^0 = u0; for k = 1..K train a network minimizing I^k
/// built from U^{k-1}, stepping h = T/K. Fresh random init per step by
/// default; warm_start reuses the previous step's parameters.
SolveResult solve_pde(const OperatorSpec& spec, std::shared_ptr<const ScalarField> u0,
                      const QuadratureRule& rule, const TimeStepConfig& tcfg, const NetworkHyper& ncfg,
                      const BumpActivation& act, std::uint64_t seed, double lambda2 = 0.0,
                      long jump_count = 0);

}  // namespace dgflow
