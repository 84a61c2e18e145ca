#include "dgflow/training.hpp"

#include <chrono>
#include <cmath>

namespace dgflow {

void FlowConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("FlowConfig: dt must be positive");
    if (!(t_end > 0.0)) throw ConfigError("FlowConfig: t_end must be positive");
    if (!(backoff > 0.0 && backoff < 1.0)) throw ConfigError("FlowConfig: backoff must lie in (0,1)");
    if (max_backoffs < 1) throw ConfigError("FlowConfig: max_backoffs must be >= 1");
}

void TimeStepConfig::validate() const {
    if (!(T > 0.0)) throw ConfigError("TimeStepConfig: T must be positive");
    if (K < 1) throw ConfigError("TimeStepConfig: K must be >= 1");
    flow.validate();
}

double NetworkHyper::resolved_clip(int n_actual) const {
    return clip_radius > 0.0 ? clip_radius : std::log(static_cast<double>(n_actual));
}

NetworkParams flow_step(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act,
                        double dt, double eta) {
    const Vec g = loss_grad(ctx, net, act);
    NetworkParams out = net;
    Vec flat(net.param_count());
    net.to_flat({flat.data(), static_cast<std::size_t>(flat.size())});
    flat -= dt * eta * g;
    if (!flat.allFinite()) throw NumericalError("flow_step: non-finite parameter update");
    out.from_flat({flat.data(), static_cast<std::size_t>(flat.size())});
    return out;
}

namespace {

// Accepted-step tolerance: matches the descent property asserted by the
// acceptance suite (no accepted increase beyond 1e-12).
constexpr double kDescentTol = 1e-12;

}  // namespace

TrainResult train(const EnergyContext& ctx, const NetworkParams& init, const BumpActivation& act,
                  const FlowConfig& cfg) {
    cfg.validate();
    const double eta = init.learning_rate();

    TrainResult res;
    res.net = init;
    TrainingTrace& trace = res.trace;

    Vec theta(init.param_count());
    res.net.to_flat({theta.data(), static_cast<std::size_t>(theta.size())});

    Vec grad;
    double cur_loss = loss_and_grad(ctx, res.net, act, grad);
    double gnorm = grad.norm();
    double t = 0.0;
    double dt_cur = cfg.dt;
    Vec prev_theta, prev_grad;
    bool have_prev = false;

    auto record = [&](double dt_used) {
        trace.entries.push_back({t, cur_loss, gnorm, dt_used});
    };
    record(0.0);

    while (t < cfg.t_end && trace.steps < cfg.max_steps) {
        if (gnorm < cfg.grad_tol) {
            trace.reached_tol = true;
            break;
        }

        double dt_try = dt_cur;
        if (cfg.policy == StepPolicy::Adaptive && have_prev) {
            // Barzilai-Borwein step (in flow time: theta' = -eta g, so the BB
            // quotient carries a 1/eta factor).
            const Vec s = theta - prev_theta;
            const Vec y = grad - prev_grad;
            const double sy = s.dot(y);
            if (sy > 0.0) {
                const double bb = s.squaredNorm() / sy / eta;
                if (std::isfinite(bb) && bb > 0.0) {
                    dt_try = std::min(std::max(bb, cfg.dt * 1e-3), cfg.dt * 1e6);
                }
            }
        }

        bool accepted = false;
        double new_loss = 0.0;
        Vec cand;
        NetworkParams candidate = res.net;
        for (int attempt = 0; attempt <= cfg.max_backoffs; ++attempt) {
            cand = theta - dt_try * eta * grad;
            if (!cand.allFinite()) throw NumericalError("train: non-finite parameter update");
            candidate.from_flat({cand.data(), static_cast<std::size_t>(cand.size())});
            NetworkField f(candidate, act);
            new_loss = loss(ctx, f.sample(*ctx.rule, true));
            if (new_loss <= cur_loss + kDescentTol) {
                accepted = true;
                break;
            }
            ++trace.backoff_events;
            dt_try *= cfg.backoff;
        }
        if (!accepted) {
            trace.stalled = true;
            break;
        }
        if (new_loss > cur_loss + kDescentTol) ++trace.monotonicity_violations;

        prev_theta = theta;
        prev_grad = grad;
        have_prev = true;
        theta = cand;
        res.net.from_flat({theta.data(), static_cast<std::size_t>(theta.size())});
        t += dt_try;
        ++trace.steps;
        if (cfg.policy == StepPolicy::Adaptive) dt_cur = dt_try;

        cur_loss = loss_and_grad(ctx, res.net, act, grad);
        gnorm = grad.norm();
        if (trace.steps % std::max(1, cfg.record_every) == 0) record(dt_try);
    }

    if (gnorm < cfg.grad_tol) trace.reached_tol = true;
    trace.final_loss = cur_loss;
    trace.final_grad_norm = gnorm;
    trace.final_t = t;
    if (trace.entries.empty() || trace.entries.back().t < t) record(dt_cur);
    return res;
}

SolveResult solve_pde(const OperatorSpec& spec, std::shared_ptr<const ScalarField> u0,
                      const QuadratureRule& rule, const TimeStepConfig& tcfg, const NetworkHyper& ncfg,
                      const BumpActivation& act, std::uint64_t seed, double lambda2, long jump_count) {
    tcfg.validate();
    const double h = tcfg.h();
    if (lambda2 > 0.0 && !(h < 1.0 / (2.0 * lambda2))) {
        throw ConfigError("solve_pde: h violates the bound h < 1/(2 lambda_2)");
    }

    SolveResult result;
    std::shared_ptr<const ScalarField> prev = std::move(u0);
    std::shared_ptr<NetworkParams> warm;

    for (int k = 1; k <= tcfg.K; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        EnergyContext ctx = make_energy_context(spec, rule, prev, h, lambda2, jump_count,
                                                seed_for(seed, SeedStage::JumpSamples, k));

        NetworkParams start;
        if (tcfg.warm_start && warm) {
            start = *warm;
        } else {
            start = init_params(ncfg.n, ncfg.delta, ncfg.resolved_clip(ncfg.n), ncfg.dim,
                                seed_for(seed, SeedStage::NetworkInit, k));
        }

        TrainResult tr = train(ctx, start, act, tcfg.flow);
        if (tr.trace.stalled) {
            throw NumericalError("solve_pde: training stalled at step k=" + std::to_string(k) +
                                 " (loss " + std::to_string(tr.trace.final_loss) + ", grad " +
                                 std::to_string(tr.trace.final_grad_norm) + ")");
        }

        const auto t1 = std::chrono::steady_clock::now();
        StepDiagnostics diag;
        diag.k = k;
        diag.final_loss = tr.trace.final_loss;
        diag.grad_norm = tr.trace.final_grad_norm;
        diag.wall_time = std::chrono::duration<double>(t1 - t0).count();
        diag.flow_steps = tr.trace.steps;
        result.diagnostics.push_back(diag);

        result.checkpoints.push_back(tr.net);
        warm = std::make_shared<NetworkParams>(std::move(tr.net));
        prev = std::make_shared<NetworkField>(warm, act);
    }
    return result;
}

}  // namespace dgflow
