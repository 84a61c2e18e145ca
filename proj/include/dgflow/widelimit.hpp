#pragma once

#include <vector>

#include "dgflow/energy.hpp"
#include "dgflow/training.hpp"

namespace dgflow {

/// Finite-dimensional stand-in for H^1_0 elements: values at the tensor-rule
/// nodes with piecewise-linear (central difference) gradient reconstruction.
/// Carries the Gram matrices every grid computation shares:
///   M    diagonal mass matrix (weights),
///   Amat a-form matrix  D^T W_A D + M_r,
///   G    Htilde Gram    M + h Amat,
///   H1   M + sum_k D_k^T W D_k.
struct GridContext {
    const QuadratureRule* rule = nullptr;
    double h = 0.0;
    std::vector<Mat> D;  // one m x m reconstruction matrix per axis
    Vec mass;            // quadrature weights
    Mat Amat;
    Mat G;
    Mat H1;

    long size() const { return mass.size(); }
    double htilde_norm(const Vec& u) const { return std::sqrt(std::max(0.0, u.dot(G * u))); }
    double h1_norm(const Vec& u) const { return std::sqrt(std::max(0.0, u.dot(H1 * u))); }
    /// Node values -> NodeField with reconstructed gradients.
    NodeField to_field(const Vec& u) const;
};

GridContext make_grid_context(const EnergyContext& ctx);

/// Minimizer of the discrete quadratic I^k over grid functions:
/// solves (M + h Amat) w = M U^{k-1} - h M F(U^{k-1}).
Vec grid_minimizer(const EnergyContext& ctx, const GridContext& grid);

/// Monte-Carlo estimate of the limit kernel Z(x,y) = E[X(x) . X(y)] over the
/// grid, with unclipped features
///   X(x) = (psi(a x + c), beta x . grad psi(a x + c), beta grad psi(a x + c)).
struct KernelEstimate {
    Mat Z;                // g x g, symmetric PSD
    std::vector<Mat> dZ;  // per axis: (d/dy_l) Z(x_a, y_b)
    long samples = 0;
    std::uint64_t seed = 0;
};

KernelEstimate empirical_kernel(const QuadratureRule& grid, long samples, std::uint64_t seed,
                                const BumpActivation& act, const InitLaw& law);

/// Matrix realization of T~ v = <v, Z(x, .)>_{Htilde} on grid functions:
/// T = Z G, which is exactly self-adjoint and PSD in the G metric.
struct TtildeOp {
    Mat T;
    Mat G;
    double sym_defect = 0.0;  // |G T - T^T G|_max, diagnostic
};

TtildeOp build_Ttilde(const KernelEstimate& kernel, const GridContext& grid);

/// Independent Monte-Carlo estimate of E |X|^2_{Htilde} with exact feature
/// gradients; cross-checks trace(T) = sum_i gamma_i.
double feature_htilde_norm_mc(const EnergyContext& ctx, long samples, std::uint64_t seed,
                              const BumpActivation& act, const InitLaw& law);

/// Spectral solution of d(V - w*)/dt = -T~ (V - w*): eigenpairs of T in the
/// G metric (descending, clamped at 0) and coefficients h0_i = <V0 - w*, e_i>_G.
class SpectralFlow {
public:
    SpectralFlow(const TtildeOp& op, const Vec& v0, const Vec& w_star);

    const Vec& gammas() const { return gammas_; }
    const Vec& h0() const { return h0_; }
    const Mat& basis() const { return basis_; }
    /// V_t - w* = sum_i e^{-gamma_i t} h0_i e_i.
    Vec evaluate(double t) const;
    /// |V_t - w*|_{Htilde} from the coefficient identity.
    double htilde_distance(double t) const;
    double gamma_min_positive() const;

private:
    Vec gammas_;  // descending, >= 0
    Mat basis_;   // columns G-orthonormal
    Vec h0_;
};

/// Classical RK4 integration of the same ODE on the grid; mutual oracle for
/// SpectralFlow. Returns V_t - w* at each requested time.
std::vector<Vec> direct_flow(const TtildeOp& op, const Vec& v0, const Vec& w_star,
                             std::span<const double> t_grid);

struct WideLimitRow {
    int n = 0;
    double t = 0.0;
    double mean_error = 0.0;
    double std_error = 0.0;
};

struct WideLimitResult {
    std::vector<WideLimitRow> rows;
    std::vector<double> sup_error;  // per n, sup over probe times of mean error
    std::vector<int> n_list;
};

/// Finite-n training (fixed-dt Euler on the same rule) against the limit
/// trajectory, averaged over trials: E |V^n_t - V_t|_{H1} on the grid.
WideLimitResult compare_wide_limit(const OperatorSpec& spec, std::shared_ptr<const ScalarField> u0,
                                   const QuadratureRule& grid, double h, const std::vector<int>& n_list,
                                   const std::vector<double>& t_probe, int trials, double delta,
                                   long kernel_samples, double flow_dt, const BumpActivation& act,
                                   std::uint64_t seed);

}  // namespace dgflow
