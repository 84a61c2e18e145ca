#include "dgflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dgflow/activation.hpp"

namespace dgflow {

Box::Box(Vec lo, Vec up) : lower(std::move(lo)), upper(std::move(up)) {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw ConfigError("Box: lower/upper dimension mismatch");
    }
    for (int k = 0; k < lower.size(); ++k) {
        if (!(lower[k] < upper[k])) throw ConfigError("Box: empty interior");
    }
}

Box Box::cube(int dim, double lo, double up) {
    return Box(Vec::Constant(dim, lo), Vec::Constant(dim, up));
}

double Box::volume() const {
    double v = 1.0;
    for (int k = 0; k < lower.size(); ++k) v *= upper[k] - lower[k];
    return v;
}

bool Box::contains(std::span<const double> x) const {
    for (int k = 0; k < lower.size(); ++k) {
        if (x[k] < lower[k] || x[k] > upper[k]) return false;
    }
    return true;
}

QuadratureRule QuadratureRule::tensor_grid(const Box& box, int points_per_axis) {
    if (points_per_axis < 2) throw ConfigError("tensor_grid: points_per_axis must be >= 2");
    const int d = box.dim();
    double count = std::pow(static_cast<double>(points_per_axis), d);
    if (count > 1e8) throw ConfigError("tensor_grid: m^d exceeds 1e8 nodes");
    const long m = static_cast<long>(std::llround(count));

    QuadratureRule rule;
    rule.kind_ = RuleKind::Tensor;
    rule.box_ = box;
    rule.points_per_axis_ = points_per_axis;
    rule.nodes_.resize(m * d);
    const double w = box.volume() / static_cast<double>(m);
    rule.weights_.assign(m, w);

    std::vector<long> idx(d, 0);
    for (long j = 0; j < m; ++j) {
        for (int k = 0; k < d; ++k) {
            const double delta = (box.upper[k] - box.lower[k]) / points_per_axis;
            rule.nodes_[j * d + k] = box.lower[k] + (idx[k] + 0.5) * delta;
        }
        for (int k = d - 1; k >= 0; --k) {
            if (++idx[k] < points_per_axis) break;
            idx[k] = 0;
        }
    }
    return rule;
}

QuadratureRule QuadratureRule::monte_carlo(const Box& box, long num_samples, std::uint64_t seed) {
    if (num_samples < 1) throw ConfigError("monte_carlo: need at least one sample");
    const int d = box.dim();
    QuadratureRule rule;
    rule.kind_ = RuleKind::MonteCarlo;
    rule.box_ = box;
    rule.seed_ = seed;
    rule.nodes_.resize(num_samples * d);
    rule.weights_.assign(num_samples, box.volume() / static_cast<double>(num_samples));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (long j = 0; j < num_samples; ++j) {
        for (int k = 0; k < d; ++k) {
            rule.nodes_[j * d + k] = box.lower[k] + (box.upper[k] - box.lower[k]) * unif(rng);
        }
    }
    return rule;
}

int QuadratureRule::points_per_axis() const {
    if (kind_ != RuleKind::Tensor) throw NumericalError("rule is not a tensor grid");
    return points_per_axis_;
}

double QuadratureRule::axis_spacing(int axis) const {
    if (kind_ != RuleKind::Tensor) throw NumericalError("rule is not a tensor grid");
    return (box_.upper[axis] - box_.lower[axis]) / points_per_axis_;
}

double QuadratureRule::axis_coord(int axis, long idx) const {
    return box_.lower[axis] + (idx + 0.5) * axis_spacing(axis);
}

std::pair<long, long> QuadratureRule::axis_range(int axis, double xlo, double xhi) const {
    const double delta = axis_spacing(axis);
    if (xhi < xlo) std::swap(xlo, xhi);
    long first = static_cast<long>(std::floor((xlo - box_.lower[axis]) / delta - 0.5)) - 1;
    long last = static_cast<long>(std::ceil((xhi - box_.lower[axis]) / delta - 0.5)) + 2;
    first = std::clamp<long>(first, 0, points_per_axis_);
    last = std::clamp<long>(last, 0, points_per_axis_);
    return {first, last};
}

long QuadratureRule::flat_index(std::span<const long> axis_idx) const {
    long j = 0;
    for (int k = 0; k < dim(); ++k) j = j * points_per_axis_ + axis_idx[k];
    return j;
}

double integrate(const std::function<double(std::span<const double>)>& f, const QuadratureRule& rule) {
    double acc = 0.0;
    const long m = rule.size();
    for (long j = 0; j < m; ++j) {
        const double fj = f(rule.node(j));
        if (!std::isfinite(fj)) {
            throw NumericalError("integrate: non-finite integrand at node " + std::to_string(j));
        }
        acc += rule.weight(j) * fj;
    }
    return acc;
}

namespace {

void require_grads(const NodeField& u, const char* what) {
    if (!u.has_grads()) throw NumericalError(std::string("inner_product: missing gradient data for ") + what);
}

double aform(const NodeField& u, const NodeField& v, const QuadratureRule& rule, const CoeffField& coeffs) {
    require_grads(u, "A-form");
    require_grads(v, "A-form");
    const int d = rule.dim();
    const long m = rule.size();
    double acc = 0.0;
    for (long j = 0; j < m; ++j) {
        double quad = 0.0;
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                quad += u.grads(j, a) * coeffs.a_nodes(j, a * d + b) * v.grads(j, b);
            }
        }
        acc += rule.weight(j) * (quad + coeffs.r_nodes[j] * u.values[j] * v.values[j]);
    }
    return acc;
}

}  // namespace

double inner_product(const NodeField& u, const NodeField& v, const QuadratureRule& rule, IPMode mode,
                     const CoeffField* coeffs, double h) {
    const long m = rule.size();
    if (u.values.size() != m || v.values.size() != m) {
        throw NumericalError("inner_product: field size does not match rule");
    }
    switch (mode) {
        case IPMode::L2: {
            double acc = 0.0;
            for (long j = 0; j < m; ++j) acc += rule.weight(j) * u.values[j] * v.values[j];
            return acc;
        }
        case IPMode::H1: {
            require_grads(u, "H1");
            require_grads(v, "H1");
            double acc = 0.0;
            const int d = rule.dim();
            for (long j = 0; j < m; ++j) {
                double g = 0.0;
                for (int k = 0; k < d; ++k) g += u.grads(j, k) * v.grads(j, k);
                acc += rule.weight(j) * (u.values[j] * v.values[j] + g);
            }
            return acc;
        }
        case IPMode::AForm: {
            if (!coeffs) throw NumericalError("inner_product: A-form requires operator coefficients");
            return aform(u, v, rule, *coeffs);
        }
        case IPMode::Htilde: {
            if (!coeffs) throw NumericalError("inner_product: Htilde requires operator coefficients");
            return inner_product(u, v, rule, IPMode::L2) + h * aform(u, v, rule, *coeffs);
        }
    }
    throw NumericalError("inner_product: unknown mode");
}

NodeField ScalarField::sample(const QuadratureRule& rule, bool with_grads) const {
    const long m = rule.size();
    const int d = rule.dim();
    NodeField f;
    f.values.resize(m);
    if (with_grads) f.grads.resize(m, d);
    std::vector<double> g(d);
    for (long j = 0; j < m; ++j) {
        const auto x = rule.node(j);
        f.values[j] = value(x);
        if (with_grads) {
            gradient(x, g);
            for (int k = 0; k < d; ++k) f.grads(j, k) = g[k];
        }
    }
    return f;
}

BumpField::BumpField(const BumpActivation& act, Vec center, double width, double amplitude)
    : act_(&act), center_(std::move(center)), width_(width), amplitude_(amplitude) {
    if (width_ <= 0.0) throw ConfigError("BumpField: width must be positive");
    if (center_.size() != act.dim()) throw ConfigError("BumpField: center dimension mismatch");
}

int BumpField::dim() const { return act_->dim(); }

double BumpField::value(std::span<const double> x) const {
    Vec z(dim());
    for (int k = 0; k < dim(); ++k) z[k] = (x[k] - center_[k]) / width_;
    return amplitude_ * act_->jet(z.data(), nullptr, nullptr);
}

void BumpField::gradient(std::span<const double> x, std::span<double> out) const {
    Vec z(dim());
    for (int k = 0; k < dim(); ++k) z[k] = (x[k] - center_[k]) / width_;
    Vec g(dim());
    act_->jet(z.data(), g.data(), nullptr);
    for (int k = 0; k < dim(); ++k) out[k] = amplitude_ * g[k] / width_;
}

BumpSumField::BumpSumField(const BumpActivation& act, std::vector<Vec> centers, std::vector<double> widths,
                           std::vector<double> amplitudes)
    : dim_(act.dim()) {
    if (centers.size() != widths.size() || centers.size() != amplitudes.size() || centers.empty()) {
        throw ConfigError("BumpSumField: component lists must be nonempty and equal length");
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
        terms_.emplace_back(act, centers[i], widths[i], amplitudes[i]);
    }
}

int BumpSumField::dim() const { return dim_; }

double BumpSumField::value(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& t : terms_) acc += t.value(x);
    return acc;
}

void BumpSumField::gradient(std::span<const double> x, std::span<double> out) const {
    for (auto& v : out) v = 0.0;
    std::vector<double> g(dim_);
    for (const auto& t : terms_) {
        t.gradient(x, g);
        for (int k = 0; k < dim_; ++k) out[k] += g[k];
    }
}

}  // namespace dgflow
