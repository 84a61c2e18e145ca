#pragma once

#include <functional>
#include <optional>
#include <string>

#include "dgflow/quadrature.hpp"
#include "dgflow/shallow_net.hpp"

namespace dgflow {

/// Normally distributed (standard, componentwise) jump sizes with intensity
/// lambda; sampling is deterministic per seed.
struct JumpSpec {
    double lambda = 0.0;
    int dim = 1;
    /// count x dim matrix of i.i.d. N(0,1) jump sizes.
    Mat sample(long count, std::uint64_t seed) const;
};

struct Nonlinearity {
    double epsilon = 1.0;
    /// W'(u) = u^3 - u for the double-well potential; applied as eps^{-2} W'(u).
    double operator()(double u) const { return (u * u * u - u) / (epsilon * epsilon); }
};

/// A u = L u + F(u) with L u = -div(A grad u) + r u (self-adjoint part,
/// evaluated through its weak bilinear form) and F the remainder:
/// drift, jump integral, explicit nonlinearity.
struct OperatorSpec {
    std::string name;
    int dim = 1;
    std::function<void(std::span<const double>, double*)> diffusion;  // fills d*d row-major
    std::function<double(std::span<const double>)> reaction;
    std::function<void(std::span<const double>, double*)> drift;      // null => zero drift
    std::optional<JumpSpec> jump;
    std::optional<Nonlinearity> nonlinearity;
    double nominal_lambda2 = 0.0;  // analytic lambda_2 when known (0 for the catalog)

    bool has_drift() const { return static_cast<bool>(drift); }
};

OperatorSpec make_heat(double kappa, int dim = 1);
OperatorSpec make_black_scholes(double sigma, double rate);
OperatorSpec make_heston(double rate, double eta, double rho, double kappa_v, double theta);
OperatorSpec make_merton(double sigma, double rate, const Vec& drift, double lambda);
OperatorSpec make_allen_cahn(double epsilon, int dim = 2);

/// Sample A(x), r(x) at the rule nodes. Verifies symmetry of A pointwise.
CoeffField sample_coeffs(const OperatorSpec& spec, const QuadratureRule& rule);

/// a(u, v) = int (grad u)^T A grad v + r u v over the rule.
double bilinear_a(const OperatorSpec& spec, const NodeField& u, const NodeField& v,
                  const QuadratureRule& rule);
double bilinear_a(const OperatorSpec& spec, const ScalarField& u, const ScalarField& v,
                  const QuadratureRule& rule);

/// F(u)(x) = b(x) . grad u(x) - lambda mean_j [u(x e^{z_j}) - u(x)] + eps^{-2} W'(u(x)),
/// jump and nonlinearity terms present only when configured. The jump integral
/// uses the provided frozen samples (componentwise exponential scaling).
double apply_F(const OperatorSpec& spec, const ScalarField& u, std::span<const double> x,
               const Mat* jump_samples = nullptr);

/// Jump part only, via dense z-quadrature instead of Monte Carlo:
/// lambda int (u(x e^z) - u(x)) nu(dz), 1d jumps. Test oracle for apply_F.
double jump_integral_quadrature(const OperatorSpec& spec, const ScalarField& u, std::span<const double> x,
                                int z_nodes = 2000, double z_halfwidth = 8.0);

struct AssumptionConstants {
    double M = 0.0;        // continuity bound
    double lambda1 = 0.0;  // Garding coercivity
    double lambda2 = 0.0;  // Garding L2 shift
    std::string source;    // "empirically-estimated" or "paper-derived"
};

/// Empirical (CON)/(GA) constants over trial networks. For Black-Scholes the
/// empirical M is checked against sigma^2/2 + |r|.
AssumptionConstants estimate_constants(const OperatorSpec& spec, const std::vector<NetworkParams>& trials,
                                       const BumpActivation& act, const QuadratureRule& rule);

}  // namespace dgflow
