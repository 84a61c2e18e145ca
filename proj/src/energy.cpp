#include "dgflow/energy.hpp"

#include <cmath>

namespace dgflow {

EnergyContext make_energy_context(const OperatorSpec& spec, const QuadratureRule& rule,
                                  std::shared_ptr<const ScalarField> prev, double h,
                                  double lambda2, long jump_count, std::uint64_t jump_seed) {
    if (!(h >= 0.0)) throw ConfigError("make_energy_context: h must be nonnegative");
    if (lambda2 > 0.0 && !(h < 1.0 / (2.0 * lambda2))) {
        throw ConfigError("make_energy_context: step bound violated, need h < 1/(2 lambda_2)");
    }
    EnergyContext ctx;
    ctx.spec = &spec;
    ctx.rule = &rule;
    ctx.h = h;
    ctx.prev_field = std::move(prev);
    ctx.coeffs = sample_coeffs(spec, rule);
    ctx.prev = ctx.prev_field->sample(rule, true);

    if (spec.jump) {
        if (jump_count < 1) {
            throw ConfigError("make_energy_context: jump operator requires jump_count >= 1");
        }
        ctx.jump_samples = spec.jump->sample(jump_count, jump_seed);
    }

    const long m = rule.size();
    ctx.f_prev.resize(m);
    const bool trivial_F = !spec.has_drift() && !spec.jump && !spec.nonlinearity;
    for (long j = 0; j < m; ++j) {
        ctx.f_prev[j] = trivial_F ? 0.0
                                  : apply_F(spec, *ctx.prev_field, rule.node(j),
                                            ctx.jump_samples ? &*ctx.jump_samples : nullptr);
    }
    ctx.prev_l2_sq = inner_product(ctx.prev, ctx.prev, rule, IPMode::L2);
    return ctx;
}

double loss(const EnergyContext& ctx, const NodeField& u) {
    const QuadratureRule& rule = *ctx.rule;
    const long m = rule.size();
    const int d = rule.dim();
    if (u.values.size() != m) throw NumericalError("loss: field size does not match rule");
    double mismatch = 0.0, quad = 0.0, forcing = 0.0;
    for (long j = 0; j < m; ++j) {
        const double w = rule.weight(j);
        const double diff = u.values[j] - ctx.prev.values[j];
        mismatch += w * diff * diff;
        double aq = 0.0;
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                aq += u.grads(j, a) * ctx.coeffs.a_nodes(j, a * d + b) * u.grads(j, b);
            }
        }
        quad += w * (aq + ctx.coeffs.r_nodes[j] * u.values[j] * u.values[j]);
        forcing += w * ctx.f_prev[j] * u.values[j];
    }
    const double out = 0.5 * mismatch + 0.5 * ctx.h * quad + ctx.h * forcing;
    if (!std::isfinite(out)) throw NumericalError("loss: non-finite value");
    return out;
}

double loss(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act) {
    NetworkField f(net, act);
    return loss(ctx, f.sample(*ctx.rule, true));
}

double frechet_pair(const EnergyContext& ctx, const NodeField& v, const NodeField& u) {
    const QuadratureRule& rule = *ctx.rule;
    const long m = rule.size();
    const int d = rule.dim();
    double acc = 0.0;
    for (long j = 0; j < m; ++j) {
        const double w = rule.weight(j);
        double aq = 0.0;
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                aq += v.grads(j, a) * ctx.coeffs.a_nodes(j, a * d + b) * u.grads(j, b);
            }
        }
        acc += w * ((v.values[j] - ctx.prev.values[j]) * u.values[j] + ctx.h * aq +
                    ctx.h * (ctx.coeffs.r_nodes[j] * v.values[j] * u.values[j] + ctx.f_prev[j] * u.values[j]));
    }
    return acc;
}

namespace {

// Shared forward + residual pass. Fills V (values, grads), then
//   rv_j = w_j [ (V - U^{k-1})_j + h f_prev_j + h r_j V_j ]
//   rg_j = w_j h A_j grad V_j
// so that the gradient w.r.t. any parameter is sum_j rv_j X_p(x_j)
// + rg_j . grad X_p(x_j), scaled by n^{-delta}.
void residuals(const EnergyContext& ctx, const NodeField& V, Vec& rv, Mat& rg) {
    const QuadratureRule& rule = *ctx.rule;
    const long m = rule.size();
    const int d = rule.dim();
    rv.resize(m);
    rg.resize(m, d);
    for (long j = 0; j < m; ++j) {
        const double w = rule.weight(j);
        rv[j] = w * (V.values[j] - ctx.prev.values[j] + ctx.h * ctx.f_prev[j] +
                     ctx.h * ctx.coeffs.r_nodes[j] * V.values[j]);
        for (int a = 0; a < d; ++a) {
            double av = 0.0;
            for (int b = 0; b < d; ++b) av += ctx.coeffs.a_nodes(j, a * d + b) * V.grads(j, b);
            rg(j, a) = w * ctx.h * av;
        }
    }
}

}  // namespace

double loss_and_grad(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act,
                     Vec& grad_out) {
    const QuadratureRule& rule = *ctx.rule;
    const int d = net.dim;
    const int stride = 2 + d;
    const double scale = net.scale();

    NetworkField f(net, act);
    const NodeField V = f.sample(rule, true);
    const double L = loss(ctx, V);

    Vec rv;
    Mat rg;
    residuals(ctx, V, rv, rg);

    grad_out = Vec::Zero(net.param_count());
    for (int i = 0; i < net.n(); ++i) {
        const auto cn = detail::make_clipped(net.neurons[i], net.clip_radius);
        double gb = 0.0, ga = 0.0;
        double gc[8] = {0};
        detail::for_each_support_node(
            rule, cn, act, true, true,
            [&](long j, const double* z, double w, const double* g, const double* h) {
                const double rvj = rv[j];
                // beta row: X = psi(z), grad_x X = alpha grad psi
                if (cn.beta_active) {
                    double dot = 0.0;
                    for (int k = 0; k < d; ++k) dot += rg(j, k) * g[k];
                    gb += rvj * w + cn.alpha * dot;
                }
                // alpha row: X = beta x . grad psi, grad_x X = beta (grad psi + alpha H x)
                if (cn.alpha_active) {
                    // x reconstructed from z to stay inside the pruned scan
                    double x[8];
                    for (int k = 0; k < d; ++k) x[k] = (z[k] - cn.c[k]) / cn.alpha;
                    double xg = 0.0;
                    for (int k = 0; k < d; ++k) xg += x[k] * g[k];
                    double dot = 0.0;
                    for (int k = 0; k < d; ++k) {
                        double hx = 0.0;
                        for (int l = 0; l < d; ++l) hx += h[k * d + l] * x[l];
                        dot += rg(j, k) * (g[k] + cn.alpha * hx);
                    }
                    ga += cn.beta * (rvj * xg + dot);
                }
                // c rows: X = beta psi_r(z), grad_x X = beta alpha H row r
                for (int r = 0; r < d; ++r) {
                    if (!cn.c_active[r]) continue;
                    double dot = 0.0;
                    for (int k = 0; k < d; ++k) dot += rg(j, k) * h[r * d + k];
                    gc[r] += cn.beta * (rvj * g[r] + cn.alpha * dot);
                }
            });
        grad_out[i * stride + 0] = scale * gb;
        grad_out[i * stride + 1] = scale * ga;
        for (int r = 0; r < d; ++r) grad_out[i * stride + 2 + r] = scale * gc[r];
    }
    if (!grad_out.allFinite()) throw NumericalError("loss_grad: non-finite gradient");
    return L;
}

Vec loss_grad(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act) {
    Vec g;
    loss_and_grad(ctx, net, act, g);
    return g;
}

}  // namespace dgflow
