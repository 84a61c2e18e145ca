#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dgflow/operators.hpp"
#include "dgflow/quadrature.hpp"

namespace dgflow {

/// Space-time ground truth. Implementations must pass the finite-difference
/// PDE residual probe before use in acceptance tests.
class ExactSolution {
public:
    virtual ~ExactSolution() = default;
    virtual int dim() const = 0;
    virtual double value(double t, std::span<const double> x) const = 0;
    std::string method;
    Box validity;
};

/// u(t, x) = int G_{kappa t}(x - y) u0(y) dy by dense tensor quadrature over
/// the support box of u0, node-doubled until successive refinements differ by
/// less than 1e-8.
class HeatExact : public ExactSolution {
public:
    HeatExact(std::shared_ptr<const ScalarField> u0, Box support, double kappa);
    int dim() const override;
    double value(double t, std::span<const double> x) const override;

private:
    std::shared_ptr<const ScalarField> u0_;
    Box support_;
    double kappa_;
};

double heat_exact(const ScalarField& u0, const Box& support, double kappa, double t,
                  std::span<const double> x);

/// Solves u_t = (sigma^2/2) u_xx + (r - sigma^2/2) u_x - r u through the
/// substitution u = e^{-rt} v(t, x + (r - sigma^2/2) t), v a heat solution
/// with kappa = sigma^2/2.
class BlackScholesExact : public ExactSolution {
public:
    BlackScholesExact(std::shared_ptr<const ScalarField> u0, Box support, double sigma, double rate);
    int dim() const override { return 1; }
    double value(double t, std::span<const double> x) const override;

private:
    HeatExact heat_;
    double sigma_, rate_;
};

double bs_reference(double sigma, double rate, const ScalarField& u0, const Box& support, double t,
                    double x);

/// Max |u_t + L u + F(u)| over random interior space-time probes, with u_t
/// and spatial derivatives from finite differences. Gate for every
/// ExactSolution before it backs an acceptance test.
double pde_residual_probe(const ExactSolution& sol, const OperatorSpec& spec, const Box& box, double t_min,
                          double t_max, int probes, std::uint64_t seed);

struct ErrorRow {
    int k = 0;
    double t = 0.0;
    double l2_error = 0.0;
    double h1_error = 0.0;
};

struct ErrorReport {
    std::vector<ErrorRow> rows;
    double max_l2 = 0.0;
    double max_h1 = 0.0;
};

/// Per-time L2/H1 grid-norm errors of numeric fields against the exact
/// solution, plus the max over k. `times[i]` is the PDE time of fields[i].
ErrorReport error_report(const std::vector<const ScalarField*>& numeric, const ExactSolution& exact,
                         const QuadratureRule& rule, const std::vector<double>& times);

}  // namespace dgflow
