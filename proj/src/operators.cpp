#include "dgflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dgflow {

Mat JumpSpec::sample(long count, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat z(count, dim);
    for (long j = 0; j < count; ++j) {
        for (int k = 0; k < dim; ++k) z(j, k) = normal(rng);
    }
    return z;
}

OperatorSpec make_heat(double kappa, int dim) {
    if (!(kappa > 0.0)) throw ConfigError("make_heat: kappa must be positive");
    OperatorSpec spec;
    spec.name = "heat";
    spec.dim = dim;
    spec.diffusion = [kappa, dim](std::span<const double>, double* a) {
        for (int i = 0; i < dim * dim; ++i) a[i] = 0.0;
        for (int i = 0; i < dim; ++i) a[i * dim + i] = kappa;
    };
    spec.reaction = [](std::span<const double>) { return 0.0; };
    return spec;
}

OperatorSpec make_black_scholes(double sigma, double rate) {
    if (!(sigma > 0.0)) throw ConfigError("make_black_scholes: sigma must be positive");
    if (rate < 0.0) throw ConfigError("make_black_scholes: rate must be nonnegative");
    OperatorSpec spec;
    spec.name = "black_scholes";
    spec.dim = 1;
    const double half_sig2 = 0.5 * sigma * sigma;
    spec.diffusion = [half_sig2](std::span<const double>, double* a) { a[0] = half_sig2; };
    spec.reaction = [rate](std::span<const double>) { return rate; };
    spec.drift = [half_sig2, rate](std::span<const double>, double* b) { b[0] = half_sig2 - rate; };
    return spec;
}

OperatorSpec make_heston(double rate, double eta, double rho, double kappa_v, double theta) {
    if (!(eta > 0.0)) throw ConfigError("make_heston: eta must be positive");
    if (std::abs(rho) > 1.0) throw ConfigError("make_heston: |rho| must be <= 1");
    OperatorSpec spec;
    spec.name = "heston";
    spec.dim = 2;  // x = (S, V)
    spec.diffusion = [eta, rho](std::span<const double> x, double* a) {
        const double S = x[0], V = x[1];
        a[0] = 0.5 * V * S * S;
        a[1] = 0.5 * V * eta * rho * S;
        a[2] = a[1];
        a[3] = 0.5 * V * eta * eta;
    };
    spec.reaction = [rate](std::span<const double>) { return rate; };
    spec.drift = [rate, eta, rho, kappa_v, theta](std::span<const double> x, double* b) {
        const double S = x[0], V = x[1];
        b[0] = (V - rate + 0.5 * rho * eta) * S;
        b[1] = kappa_v * (V - theta) + 0.5 * eta * rho * V + 0.5 * eta * eta;
    };
    return spec;
}

OperatorSpec make_merton(double sigma, double rate, const Vec& drift, double lambda) {
    if (!(sigma > 0.0)) throw ConfigError("make_merton: sigma must be positive");
    if (!(lambda > 0.0)) throw ConfigError("make_merton: lambda must be positive");
    const int d = static_cast<int>(drift.size());
    OperatorSpec spec;
    spec.name = "merton";
    spec.dim = d;
    const double half_sig2 = 0.5 * sigma * sigma;
    spec.diffusion = [half_sig2, d](std::span<const double>, double* a) {
        for (int i = 0; i < d * d; ++i) a[i] = 0.0;
        for (int i = 0; i < d; ++i) a[i * d + i] = half_sig2;
    };
    spec.reaction = [rate](std::span<const double>) { return rate; };
    Vec b = drift;
    spec.drift = [b, d](std::span<const double>, double* out) {
        for (int k = 0; k < d; ++k) out[k] = b[k];
    };
    spec.jump = JumpSpec{lambda, d};
    return spec;
}

OperatorSpec make_allen_cahn(double epsilon, int dim) {
    if (!(epsilon > 0.0)) throw ConfigError("make_allen_cahn: epsilon must be positive");
    // The double-well term is applied explicitly through F; the implicit part
    // L u = -Delta u stays linear so each step remains a quadratic minimization.
    OperatorSpec spec = make_heat(1.0, dim);
    spec.name = "allen_cahn";
    spec.nonlinearity = Nonlinearity{epsilon};
    return spec;
}

CoeffField sample_coeffs(const OperatorSpec& spec, const QuadratureRule& rule) {
    const long m = rule.size();
    const int d = rule.dim();
    if (d != spec.dim) throw ConfigError("sample_coeffs: rule/operator dimension mismatch");
    CoeffField cf;
    cf.a_nodes.resize(m, d * d);
    cf.r_nodes.resize(m);
    std::vector<double> a(d * d);
    for (long j = 0; j < m; ++j) {
        const auto x = rule.node(j);
        spec.diffusion(x, a.data());
        for (int i = 0; i < d; ++i) {
            for (int k = i + 1; k < d; ++k) {
                if (std::abs(a[i * d + k] - a[k * d + i]) >= 1e-12) {
                    throw NumericalError("sample_coeffs: diffusion tensor not symmetric at a node");
                }
            }
        }
        for (int i = 0; i < d * d; ++i) cf.a_nodes(j, i) = a[i];
        cf.r_nodes[j] = spec.reaction(x);
    }
    return cf;
}

double bilinear_a(const OperatorSpec& spec, const NodeField& u, const NodeField& v,
                  const QuadratureRule& rule) {
    const CoeffField cf = sample_coeffs(spec, rule);
    return inner_product(u, v, rule, IPMode::AForm, &cf);
}

double bilinear_a(const OperatorSpec& spec, const ScalarField& u, const ScalarField& v,
                  const QuadratureRule& rule) {
    const NodeField fu = u.sample(rule, true);
    const NodeField fv = v.sample(rule, true);
    return bilinear_a(spec, fu, fv, rule);
}

double apply_F(const OperatorSpec& spec, const ScalarField& u, std::span<const double> x,
               const Mat* jump_samples) {
    const int d = spec.dim;
    double acc = 0.0;
    if (spec.has_drift()) {
        std::vector<double> b(d), g(d);
        spec.drift(x, b.data());
        u.gradient(x, g);
        for (int k = 0; k < d; ++k) acc += b[k] * g[k];
    }
    if (spec.jump) {
        if (!jump_samples || jump_samples->rows() == 0) {
            throw NumericalError("apply_F: jump operator requires frozen jump samples");
        }
        const double ux = u.value(x);
        std::vector<double> y(d);
        double mean = 0.0;
        for (long j = 0; j < jump_samples->rows(); ++j) {
            for (int k = 0; k < d; ++k) y[k] = x[k] * std::exp((*jump_samples)(j, k));
            mean += u.value(y) - ux;
        }
        mean /= static_cast<double>(jump_samples->rows());
        acc -= spec.jump->lambda * mean;
    }
    if (spec.nonlinearity) {
        acc += (*spec.nonlinearity)(u.value(x));
    }
    return acc;
}

double jump_integral_quadrature(const OperatorSpec& spec, const ScalarField& u, std::span<const double> x,
                                int z_nodes, double z_halfwidth) {
    if (!spec.jump) throw NumericalError("jump_integral_quadrature: operator has no jump component");
    if (spec.dim != 1) throw NumericalError("jump_integral_quadrature: 1d jumps only");
    const double ux = u.value(x);
    const double dz = 2.0 * z_halfwidth / z_nodes;
    double acc = 0.0;
    for (int j = 0; j < z_nodes; ++j) {
        const double z = -z_halfwidth + (j + 0.5) * dz;
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        const double y = x[0] * std::exp(z);
        acc += (u.value({&y, 1}) - ux) * phi * dz;
    }
    return spec.jump->lambda * acc;
}

AssumptionConstants estimate_constants(const OperatorSpec& spec, const std::vector<NetworkParams>& trials,
                                       const BumpActivation& act, const QuadratureRule& rule) {
    if (trials.size() < 50) throw ConfigError("estimate_constants: need at least 50 trial networks");
    const CoeffField cf = sample_coeffs(spec, rule);

    std::vector<NodeField> fields;
    std::vector<double> h1, l2, auu;
    fields.reserve(trials.size());
    for (const auto& net : trials) {
        NetworkField f(net, act);
        NodeField nf = f.sample(rule, true);
        const double nh1 = inner_product(nf, nf, rule, IPMode::H1);
        if (nh1 <= 0.0) continue;
        h1.push_back(nh1);
        l2.push_back(inner_product(nf, nf, rule, IPMode::L2));
        auu.push_back(inner_product(nf, nf, rule, IPMode::AForm, &cf));
        fields.push_back(std::move(nf));
    }
    if (fields.empty()) throw NumericalError("estimate_constants: all trial networks vanish on the rule");

    AssumptionConstants out;
    out.source = "empirically-estimated";

    double m_max = 0.0;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        for (std::size_t j = i; j < fields.size(); ++j) {
            const double aij = (i == j) ? auu[i]
                                        : inner_product(fields[i], fields[j], rule, IPMode::AForm, &cf);
            m_max = std::max(m_max, std::abs(aij) / std::sqrt(h1[i] * h1[j]));
        }
    }
    out.M = m_max;

    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fields.size(); ++i) min_ratio = std::min(min_ratio, auu[i] / h1[i]);
    if (min_ratio > 0.0) {
        out.lambda1 = min_ratio;
        out.lambda2 = 0.0;
    } else {
        // Least-squares fit of a(u,u) ~ l1 |u|_H1^2 - l2 |u|_L2^2, then inflate
        // lambda2 until every trial satisfies the inequality with margin.
        Mat X(fields.size(), 2);
        Vec y(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            X(i, 0) = h1[i];
            X(i, 1) = -l2[i];
            y[i] = auu[i];
        }
        Vec sol = (X.transpose() * X).ldlt().solve(X.transpose() * y);
        out.lambda1 = std::max(sol[0], 1e-12);
        out.lambda2 = std::max(sol[1], 0.0);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const double deficit = out.lambda1 * h1[i] - out.lambda2 * l2[i] - auu[i];
            if (deficit > 0.0) out.lambda2 += 1.05 * deficit / std::max(l2[i], 1e-12);
        }
    }

    if (spec.name == "black_scholes") {
        // Appendix bound: continuity holds with M = sigma^2/2 + |r|. The
        // diffusion coefficient equals sigma^2/2, the reaction equals r.
        double a0[1];
        spec.diffusion(rule.node(0), a0);
        const double bound = a0[0] + std::abs(spec.reaction(rule.node(0)));
        if (out.M > bound + 1e-3) {
            throw NumericalError("estimate_constants: Black-Scholes empirical M exceeds sigma^2/2 + |r|");
        }
    }
    return out;
}

}  // namespace dgflow
