#pragma once

#include <memory>
#include <optional>

#include "dgflow/operators.hpp"
#include "dgflow/quadrature.hpp"
#include "dgflow/shallow_net.hpp"

namespace dgflow {

/// Frozen state of one backward-Euler step: the previous iterate U^{k-1}
/// (evaluable + node caches), the step size h, the operator, and one shared
/// quadrature rule. All three loss terms integrate over the same rule so the
/// loss and its gradient are exactly consistent.
struct EnergyContext {
    const OperatorSpec* spec = nullptr;
    const QuadratureRule* rule = nullptr;
    double h = 0.0;
    std::shared_ptr<const ScalarField> prev_field;
    NodeField prev;           // U^{k-1} at nodes
    Vec f_prev;               // F(U^{k-1}) at nodes
    CoeffField coeffs;        // A, r at nodes
    std::optional<Mat> jump_samples;  // frozen for the whole step
    double prev_l2_sq = 0.0;  // |U^{k-1}|_{L2}^2 (constant loss term)
};

/// Builds the per-step context. When lambda2 > 0 the step bound h < 1/(2 lambda2)
/// is enforced. For jump operators, `jump_count` samples are drawn once with
/// `jump_seed` and reused across every loss/gradient evaluation of the step.
EnergyContext make_energy_context(const OperatorSpec& spec, const QuadratureRule& rule,
                                  std::shared_ptr<const ScalarField> prev, double h,
                                  double lambda2 = 0.0, long jump_count = 0, std::uint64_t jump_seed = 0);

/// I^k(u) = 1/2 |u - U^{k-1}|_{L2}^2 + h/2 a(u,u) + h <F(U^{k-1}), u>_{L2}
/// evaluated on node data.
double loss(const EnergyContext& ctx, const NodeField& u);
double loss(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act);

/// <D I^k(v), u> = <v - U^{k-1}, u>_{L2} + h a(v,u) + h <F(U^{k-1}), u>_{L2}.
double frechet_pair(const EnergyContext& ctx, const NodeField& v, const NodeField& u);

/// Gradient of I^k(V(theta)) with respect to the raw parameters, flat layout
/// (beta, alpha, c_1..c_d) per neuron; clipped-out components are zero.
Vec loss_grad(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act);

/// Loss and gradient in one pass (training hot path).
double loss_and_grad(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act,
                     Vec& grad_out);

}  // namespace dgflow
