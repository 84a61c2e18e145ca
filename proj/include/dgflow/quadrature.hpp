#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dgflow/common.hpp"

namespace dgflow {

/// Axis-aligned truncation box for the R^d integrals. Networks are compactly
/// supported, so a box containing every neuron support makes truncation exact.
struct Box {
    Vec lower;
    Vec upper;

    Box() = default;
    Box(Vec lo, Vec up);
    static Box cube(int dim, double lo, double up);

    int dim() const { return static_cast<int>(lower.size()); }
    double volume() const;
    bool contains(std::span<const double> x) const;
};

enum class RuleKind { Tensor, MonteCarlo };

/// Quadrature nodes/weights on a box. Tensor rules are composite midpoint
/// (m^d nodes, lexicographic order); Monte Carlo rules are i.i.d. uniform
/// with weight volume/N, deterministic per seed.
class QuadratureRule {
public:
    static QuadratureRule tensor_grid(const Box& box, int points_per_axis);
    static QuadratureRule monte_carlo(const Box& box, long num_samples, std::uint64_t seed);

    RuleKind kind() const { return kind_; }
    const Box& box() const { return box_; }
    int dim() const { return box_.dim(); }
    long size() const { return static_cast<long>(weights_.size()); }
    std::uint64_t seed() const { return seed_; }

    std::span<const double> node(long j) const {
        return {nodes_.data() + j * dim(), static_cast<std::size_t>(dim())};
    }
    double weight(long j) const { return weights_[j]; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& flat_nodes() const { return nodes_; }

    // Tensor structure (throws for Monte Carlo rules).
    int points_per_axis() const;
    double axis_coord(int axis, long idx) const;
    double axis_spacing(int axis) const;
    /// Smallest half-open index range [first, last) covering axis coordinates
    /// inside (xlo, xhi), padded by one node on each side.
    std::pair<long, long> axis_range(int axis, double xlo, double xhi) const;
    /// Flat node index from per-axis indices (lexicographic, axis 0 slowest).
    long flat_index(std::span<const long> axis_idx) const;

private:
    QuadratureRule() = default;
    RuleKind kind_ = RuleKind::Tensor;
    Box box_;
    std::vector<double> nodes_;    // row-major size*dim
    std::vector<double> weights_;  // positive, sum to box volume
    int points_per_axis_ = 0;
    std::uint64_t seed_ = 0;
};

/// sum_j w_j f(x_j), accumulated sequentially in node order.
/// Throws NumericalError on a non-finite integrand value.
double integrate(const std::function<double(std::span<const double>)>& f, const QuadratureRule& rule);

/// Values (and optionally gradients) of a function at every rule node.
struct NodeField {
    Vec values;  // size m
    Mat grads;   // m x d, or 0 x 0 when absent

    bool has_grads() const { return grads.size() > 0; }
};

/// A(x) and r(x) sampled at rule nodes; plain data so that inner products
/// stay independent of the operator catalog.
struct CoeffField {
    Mat a_nodes;  // m x (d*d), row-major per node
    Vec r_nodes;  // m
};

enum class IPMode { L2, H1, AForm, Htilde };

/// Inner products over a rule. AForm computes  int (grad u)^T A grad v + r u v;
/// Htilde is L2 + h * AForm. Gradient-requiring modes throw if a field has no
/// gradient data.
double inner_product(const NodeField& u, const NodeField& v, const QuadratureRule& rule, IPMode mode,
                     const CoeffField* coeffs = nullptr, double h = 0.0);

inline double norm(const NodeField& u, const QuadratureRule& rule, IPMode mode,
                   const CoeffField* coeffs = nullptr, double h = 0.0) {
    return std::sqrt(std::max(0.0, inner_product(u, u, rule, mode, coeffs, h)));
}

/// Evaluable function with spatial gradient. Networks, bumps, grid
/// interpolants and exact-solution slices all reduce to this.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual int dim() const = 0;
    virtual double value(std::span<const double> x) const = 0;
    virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;

    /// Sample at every rule node. The default loops node by node; compactly
    /// supported implementations may override with a pruned scan.
    virtual NodeField sample(const QuadratureRule& rule, bool with_grads = true) const;
};

/// f(x) = amplitude * w((x - center)/width), w the unit bump.
class BumpField : public ScalarField {
public:
    BumpField(const class BumpActivation& act, Vec center, double width, double amplitude);
    int dim() const override;
    double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;

private:
    const BumpActivation* act_;
    Vec center_;
    double width_;
    double amplitude_;
};

/// Sum of scaled/shifted bumps; the benchmark initial conditions.
class BumpSumField : public ScalarField {
public:
    BumpSumField(const BumpActivation& act, std::vector<Vec> centers, std::vector<double> widths,
                 std::vector<double> amplitudes);
    int dim() const override;
    double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;

private:
    std::vector<BumpField> terms_;
    int dim_;
};

class ZeroField : public ScalarField {
public:
    explicit ZeroField(int d) : dim_(d) {}
    int dim() const override { return dim_; }
    double value(std::span<const double>) const override { return 0.0; }
    void gradient(std::span<const double>, std::span<double> out) const override {
        for (auto& v : out) v = 0.0;
    }

private:
    int dim_;
};

}  // namespace dgflow
