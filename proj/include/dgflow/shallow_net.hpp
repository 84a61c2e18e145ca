#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dgflow/activation.hpp"
#include "dgflow/quadrature.hpp"

namespace dgflow {

struct NeuronParams {
    double beta = 0.0;   // output weight
    double alpha = 1.0;  // isotropic scale, nonzero
    Vec c;               // shift in R^d
};

/// Raw parameter triple after projection into the clip set
/// {|beta| <= r, 1/r <= |alpha| <= r, |c_j| <= r}.
NeuronParams clip(const NeuronParams& p, double r_n);

/// Single-hidden-layer network V(theta; x) = n^{-delta} sum_i beta_i w(alpha_i x + c_i),
/// evaluated through clipped parameters. Raw parameters are stored; the
/// training flow evolves them and clipping is re-applied on every evaluation.
struct NetworkParams {
    std::vector<NeuronParams> neurons;
    double delta = 0.75;        // in (1/2, 1)
    double clip_radius = 2.0;   // r_n <= log n
    int dim = 1;

    int n() const { return static_cast<int>(neurons.size()); }
    int param_count() const { return n() * (2 + dim); }
    double scale() const { return std::pow(static_cast<double>(n()), -delta); }
    /// Learning rate eta_n = n^{2 delta - 1}.
    double learning_rate() const { return std::pow(static_cast<double>(n()), 2.0 * delta - 1.0); }

    void validate() const;
    void to_flat(std::span<double> out) const;    // per-neuron blocks (beta, alpha, c_1..c_d)
    void from_flat(std::span<const double> in);
};

double eval(const NetworkParams& net, const BumpActivation& act, std::span<const double> x);
Vec spatial_grad(const NetworkParams& net, const BumpActivation& act, std::span<const double> x);

/// Unscaled gradient X^{i,n}(x) of the i-th neuron with respect to its raw
/// parameters; the full network gradient is n^{-delta} X. Masks record which
/// clip indicators were active.
struct ParamGradient {
    double d_beta = 0.0;
    double d_alpha = 0.0;
    Vec d_c;
    bool beta_active = false;
    bool alpha_active = false;
    std::vector<bool> c_active;
};

ParamGradient param_grad(const NetworkParams& net, const BumpActivation& act, std::span<const double> x,
                         int neuron);

/// Spatial Jacobian of X^{i,n}: rows (beta, alpha, c_1..c_d), columns d.
Mat param_grad_spatial(const NetworkParams& net, const BumpActivation& act, std::span<const double> x,
                       int neuron);

/// Concrete (NNI)-compliant initialization law:
///   beta ~ Uniform(-1, 1),
///   alpha = S sqrt(G), S ~ Uniform{-1,+1}, G ~ Gamma(shape (d+4)/2, rate 1),
///   c ~ N(0, I_d).
/// All four moment/support conditions hold with analytic moments available.
struct InitLaw {
    int dim = 1;
    NeuronParams draw(std::mt19937_64& rng) const;
};

NetworkParams init_params(int n, double delta, double r_n, int dim, std::uint64_t seed);

struct MomentReport {
    long sample_count = 0;
    double beta_sq = 0.0;           // E|beta|^2
    double alpha_pos = 0.0;         // E|alpha|^{d+7}
    double alpha_neg = 0.0;         // E|alpha|^{-d-2}
    double c_pos = 0.0;             // E|c|^{d+7}
    double beta_symmetry = 0.0;     // |mean(beta)| / std(beta)
    double beta_sq_analytic = 0.0;
    double alpha_pos_analytic = 0.0;
    double alpha_neg_analytic = 0.0;
    double c_pos_analytic = 0.0;
    bool symmetry_flag = false;     // |mean|/std above threshold
    bool divergence_flag = false;   // prefix estimates of E|alpha|^{-d-2} keep growing
    bool moment_flag = false;       // some empirical moment exceeds 10x analytic
    bool all_finite = true;
};

MomentReport validate_init(const std::vector<NeuronParams>& samples, int dim);

/// Checkpoint: JSON header (n, d, delta, r_n, seed) + raw little-endian
/// doubles (beta, alpha, c_1..c_d per neuron). Bit-exact round trip.
void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net, std::uint64_t seed);
NetworkParams load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed_out = nullptr);

/// ScalarField adapter with a support-pruned batch sampler. The owning
/// overload keeps the parameter set alive for contexts that outlive the
/// caller's copy.
class NetworkField : public ScalarField {
public:
    NetworkField(const NetworkParams& net, const BumpActivation& act) : net_(&net), act_(&act) {}
    NetworkField(std::shared_ptr<const NetworkParams> net, const BumpActivation& act)
        : owned_(std::move(net)), net_(owned_.get()), act_(&act) {}
    int dim() const override { return net_->dim; }
    double value(std::span<const double> x) const override { return eval(*net_, *act_, x); }
    void gradient(std::span<const double> x, std::span<double> out) const override;
    NodeField sample(const QuadratureRule& rule, bool with_grads = true) const override;

private:
    std::shared_ptr<const NetworkParams> owned_;
    const NetworkParams* net_;
    const BumpActivation* act_;
};

namespace detail {

struct ClippedNeuron {
    double beta, alpha;
    Vec c;
    bool beta_active, alpha_active;
    std::vector<bool> c_active;
};

ClippedNeuron make_clipped(const NeuronParams& p, double r_n);

/// Calls fn(node_index, z, w, grad_w, hess_w) for every rule node inside the
/// neuron's support. grad/hess pointers are null unless requested. Pruning is
/// conservative (exact |z|^2 < 1 checked inside), so no support node is missed.
template <typename F>
void for_each_support_node(const QuadratureRule& rule, const ClippedNeuron& cn, const BumpActivation& act,
                           bool need_grad, bool need_hess, F&& fn) {
    const int d = rule.dim();
    double gbuf[8];
    double hbuf[64];
    double zbuf[8];
    double* g = need_grad ? gbuf : nullptr;
    double* h = need_hess ? hbuf : nullptr;

    if (rule.kind() == RuleKind::Tensor && d <= 8) {
        // Per-axis support ranges: |alpha x_k + c_k| < 1 is necessary per axis.
        long lo[8], hi[8], idx[8];
        for (int k = 0; k < d; ++k) {
            const double b1 = (-1.0 - cn.c[k]) / cn.alpha;
            const double b2 = (1.0 - cn.c[k]) / cn.alpha;
            auto [f, l] = rule.axis_range(k, b1, b2);
            lo[k] = f;
            hi[k] = l;
            if (f >= l) return;
            idx[k] = f;
        }
        while (true) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                zbuf[k] = cn.alpha * rule.axis_coord(k, idx[k]) + cn.c[k];
                s += zbuf[k] * zbuf[k];
            }
            if (s < 1.0) {
                long j = rule.flat_index(std::span<const long>(idx, static_cast<std::size_t>(d)));
                const double w = act.jet(zbuf, g, h);
                fn(j, zbuf, w, g, h);
            }
            int k = d - 1;
            for (; k >= 0; --k) {
                if (++idx[k] < hi[k]) break;
                idx[k] = lo[k];
            }
            if (k < 0) break;
        }
        return;
    }

    const long m = rule.size();
    for (long j = 0; j < m; ++j) {
        const auto x = rule.node(j);
        double s = 0.0;
        bool inside = true;
        for (int k = 0; k < d; ++k) {
            zbuf[k] = cn.alpha * x[k] + cn.c[k];
            if (zbuf[k] <= -1.0 || zbuf[k] >= 1.0) {
                inside = false;
                break;
            }
            s += zbuf[k] * zbuf[k];
        }
        if (!inside || s >= 1.0) continue;
        const double w = act.jet(zbuf, g, h);
        fn(j, zbuf, w, g, h);
    }
}

}  // namespace detail

}  // namespace dgflow
