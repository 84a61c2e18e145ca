#pragma once

#include <span>

#include "dgflow/common.hpp"

namespace dgflow {

/// Compactly supported radial bump activation
///
///   w(x) = c * exp(-1 / (1 - |x|^2))  for |x| < 1,   0 otherwise,
///
/// with c fixed per dimension so that the integral of w over R^d equals 1.
/// Immutable after construction; all evaluations are pure.
class BumpActivation {
public:
    explicit BumpActivation(int dim);

    int dim() const { return dim_; }
    double norm_const() const { return norm_const_; }
    static constexpr double support_radius() { return 1.0; }

    double value(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;
    /// Hessian, row-major d*d.
    void hessian(std::span<const double> x, std::span<double> out) const;

    Vec gradient(std::span<const double> x) const;
    Mat hessian(std::span<const double> x) const;

    /// Fused evaluation at z (length dim). Fills grad (length dim) and
    /// hess (row-major dim*dim) when non-null. Returns w(z).
    /// This is the single hot kernel behind every network evaluation.
    double jet(const double* z, double* grad, double* hess) const;

    /// L2 norms of w and |grad w| over R^d, by dense radial quadrature.
    /// Exposed for test oracles.
    double l2_norm_sq() const;
    double grad_l2_norm_sq() const;

private:
    int dim_;
    double norm_const_;
};

}  // namespace dgflow
