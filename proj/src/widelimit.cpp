#include "dgflow/widelimit.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace dgflow {

namespace {

// Central-difference reconstruction along one axis of a tensor grid,
// one-sided at the ends. Keeps D^T W D symmetric PSD.
Mat axis_gradient_matrix(const QuadratureRule& rule, int axis) {
    const long m = rule.size();
    const int d = rule.dim();
    const int ppa = rule.points_per_axis();
    const double delta = rule.axis_spacing(axis);
    Mat D = Mat::Zero(m, m);

    long stride = 1;
    for (int k = d - 1; k > axis; --k) stride *= ppa;

    for (long j = 0; j < m; ++j) {
        const long pos = (j / stride) % ppa;
        if (pos == 0) {
            D(j, j) -= 1.0 / delta;
            D(j, j + stride) += 1.0 / delta;
        } else if (pos == ppa - 1) {
            D(j, j - stride) -= 1.0 / delta;
            D(j, j) += 1.0 / delta;
        } else {
            D(j, j - stride) -= 0.5 / delta;
            D(j, j + stride) += 0.5 / delta;
        }
    }
    return D;
}

}  // namespace

NodeField GridContext::to_field(const Vec& u) const {
    NodeField f;
    f.values = u;
    const int d = rule->dim();
    f.grads.resize(u.size(), d);
    for (int k = 0; k < d; ++k) f.grads.col(k) = D[k] * u;
    return f;
}

GridContext make_grid_context(const EnergyContext& ctx) {
    const QuadratureRule& rule = *ctx.rule;
    if (rule.kind() != RuleKind::Tensor) {
        throw ConfigError("make_grid_context: grid functions require a tensor rule");
    }
    const long m = rule.size();
    const int d = rule.dim();
    if (m > 8192) throw ConfigError("make_grid_context: dense grid matrices capped at 8192 nodes");

    GridContext g;
    g.rule = &rule;
    g.h = ctx.h;
    g.mass.resize(m);
    for (long j = 0; j < m; ++j) g.mass[j] = rule.weight(j);
    for (int k = 0; k < d; ++k) g.D.push_back(axis_gradient_matrix(rule, k));

    g.Amat = Mat::Zero(m, m);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            Vec wab(m);
            for (long j = 0; j < m; ++j) wab[j] = rule.weight(j) * ctx.coeffs.a_nodes(j, a * d + b);
            g.Amat.noalias() += g.D[a].transpose() * wab.asDiagonal() * g.D[b];
        }
    }
    Vec wr(m);
    for (long j = 0; j < m; ++j) wr[j] = rule.weight(j) * ctx.coeffs.r_nodes[j];
    g.Amat += Mat(wr.asDiagonal());
    g.Amat = 0.5 * (g.Amat + g.Amat.transpose()).eval();

    g.G = Mat(g.mass.asDiagonal()) + ctx.h * g.Amat;
    g.G = 0.5 * (g.G + g.G.transpose()).eval();

    g.H1 = Mat(g.mass.asDiagonal());
    for (int k = 0; k < d; ++k) {
        g.H1.noalias() += g.D[k].transpose() * g.mass.asDiagonal() * g.D[k];
    }
    g.H1 = 0.5 * (g.H1 + g.H1.transpose()).eval();
    return g;
}

Vec grid_minimizer(const EnergyContext& ctx, const GridContext& grid) {
    const Vec rhs = grid.mass.asDiagonal() * (ctx.prev.values - ctx.h * ctx.f_prev);
    Eigen::LDLT<Mat> solver(grid.G);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("grid_minimizer: Htilde Gram is singular or indefinite");
    }
    const Vec w = solver.solve(rhs);
    const double resid = (grid.G * w - rhs).norm();
    if (resid > 1e-10 * std::max(1.0, rhs.norm())) {
        throw NumericalError("grid_minimizer: linear solve residual too large (h-bound or operator violation?)");
    }
    return w;
}

KernelEstimate empirical_kernel(const QuadratureRule& grid, long samples, std::uint64_t seed,
                                const BumpActivation& act, const InitLaw& law) {
    if (samples < 1000) throw ConfigError("empirical_kernel: need at least 10^3 samples");
    const long g = grid.size();
    const int d = grid.dim();
    const int p = 2 + d;

    KernelEstimate est;
    est.samples = samples;
    est.seed = seed;
    est.Z = Mat::Zero(g, g);
    for (int k = 0; k < d; ++k) est.dZ.push_back(Mat::Zero(g, g));

    std::mt19937_64 rng(seed);
    Mat phi(g, p);         // feature values per node
    std::vector<Mat> dphi;  // feature spatial gradients per axis
    for (int k = 0; k < d; ++k) dphi.emplace_back(g, p);

    double z[8], gr[8], hs[64], x[8];
    for (long s = 0; s < samples; ++s) {
        const NeuronParams nrn = law.draw(rng);
        phi.setZero();
        for (int k = 0; k < d; ++k) dphi[k].setZero();

        for (long j = 0; j < g; ++j) {
            const auto xj = grid.node(j);
            double s2 = 0.0;
            for (int k = 0; k < d; ++k) {
                z[k] = nrn.alpha * xj[k] + nrn.c[k];
                s2 += z[k] * z[k];
                x[k] = xj[k];
            }
            if (s2 >= 1.0) continue;
            const double w = act.jet(z, gr, hs);
            double xg = 0.0;
            for (int k = 0; k < d; ++k) xg += x[k] * gr[k];
            phi(j, 0) = w;
            phi(j, 1) = nrn.beta * xg;
            for (int k = 0; k < d; ++k) phi(j, 2 + k) = nrn.beta * gr[k];
            for (int l = 0; l < d; ++l) {
                double hx = 0.0;
                for (int k = 0; k < d; ++k) hx += hs[l * d + k] * x[k];
                dphi[l](j, 0) = nrn.alpha * gr[l];
                dphi[l](j, 1) = nrn.beta * (gr[l] + nrn.alpha * hx);
                for (int k = 0; k < d; ++k) dphi[l](j, 2 + k) = nrn.beta * nrn.alpha * hs[k * d + l];
            }
        }
        est.Z.noalias() += phi * phi.transpose();
        for (int l = 0; l < d; ++l) est.dZ[l].noalias() += phi * dphi[l].transpose();
    }
    est.Z /= static_cast<double>(samples);
    est.Z = 0.5 * (est.Z + est.Z.transpose()).eval();
    for (int l = 0; l < d; ++l) est.dZ[l] /= static_cast<double>(samples);
    return est;
}

TtildeOp build_Ttilde(const KernelEstimate& kernel, const GridContext& grid) {
    if (kernel.Z.rows() != grid.size()) throw ConfigError("build_Ttilde: kernel grid mismatch");
    TtildeOp op;
    op.G = grid.G;
    op.T = kernel.Z * grid.G;
    const Mat gt = grid.G * op.T;
    op.sym_defect = (gt - gt.transpose()).cwiseAbs().maxCoeff();
    return op;
}

double feature_htilde_norm_mc(const EnergyContext& ctx, long samples, std::uint64_t seed,
                              const BumpActivation& act, const InitLaw& law) {
    const QuadratureRule& rule = *ctx.rule;
    const long g = rule.size();
    const int d = rule.dim();
    std::mt19937_64 rng(seed);

    double acc = 0.0;
    double z[8], gr[8], hs[64], x[8];
    double feat[10];
    double dfeat[8][10];
    for (long s = 0; s < samples; ++s) {
        const NeuronParams nrn = law.draw(rng);
        double total = 0.0;
        for (long j = 0; j < g; ++j) {
            const auto xj = rule.node(j);
            double s2 = 0.0;
            for (int k = 0; k < d; ++k) {
                z[k] = nrn.alpha * xj[k] + nrn.c[k];
                s2 += z[k] * z[k];
                x[k] = xj[k];
            }
            if (s2 >= 1.0) continue;
            const double w = act.jet(z, gr, hs);
            double xg = 0.0;
            for (int k = 0; k < d; ++k) xg += x[k] * gr[k];
            feat[0] = w;
            feat[1] = nrn.beta * xg;
            for (int k = 0; k < d; ++k) feat[2 + k] = nrn.beta * gr[k];
            for (int l = 0; l < d; ++l) {
                double hx = 0.0;
                for (int k = 0; k < d; ++k) hx += hs[l * d + k] * x[k];
                dfeat[l][0] = nrn.alpha * gr[l];
                dfeat[l][1] = nrn.beta * (gr[l] + nrn.alpha * hx);
                for (int k = 0; k < d; ++k) dfeat[l][2 + k] = nrn.beta * nrn.alpha * hs[k * d + l];
            }
            // sum over feature components of |X|^2 + h [ (dX)^T A dX + r |X|^2 ]
            const double wq = rule.weight(j);
            const double rj = ctx.coeffs.r_nodes[j];
            double node_acc = 0.0;
            for (int pcomp = 0; pcomp < 2 + d; ++pcomp) {
                double aq = 0.0;
                for (int a = 0; a < d; ++a) {
                    for (int b = 0; b < d; ++b) {
                        aq += dfeat[a][pcomp] * ctx.coeffs.a_nodes(j, a * d + b) * dfeat[b][pcomp];
                    }
                }
                const double v2 = feat[pcomp] * feat[pcomp];
                node_acc += v2 + ctx.h * (aq + rj * v2);
            }
            total += wq * node_acc;
        }
        acc += total;
    }
    return acc / static_cast<double>(samples);
}

SpectralFlow::SpectralFlow(const TtildeOp& op, const Vec& v0, const Vec& w_star) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(op.G * op.T, op.G);
    if (solver.info() != Eigen::Success) throw NumericalError("spectral_flow: eigensolver failed");
    const long m = v0.size();
    gammas_.resize(m);
    basis_.resize(m, m);
    // Eigen returns ascending eigenvalues; store descending and clamp at 0.
    for (long i = 0; i < m; ++i) {
        gammas_[i] = std::max(solver.eigenvalues()[m - 1 - i], 0.0);
        basis_.col(i) = solver.eigenvectors().col(m - 1 - i);
    }
    const Vec diff = v0 - w_star;
    h0_ = basis_.transpose() * (op.G * diff);
}

Vec SpectralFlow::evaluate(double t) const {
    Vec coeff = h0_;
    for (long i = 0; i < coeff.size(); ++i) coeff[i] *= std::exp(-gammas_[i] * t);
    return basis_ * coeff;
}

double SpectralFlow::htilde_distance(double t) const {
    double acc = 0.0;
    for (long i = 0; i < h0_.size(); ++i) {
        const double hi = std::exp(-gammas_[i] * t) * h0_[i];
        acc += hi * hi;
    }
    return std::sqrt(acc);
}

double SpectralFlow::gamma_min_positive() const {
    const double gmax = gammas_.size() ? gammas_[0] : 0.0;
    double out = gmax;
    for (long i = 0; i < gammas_.size(); ++i) {
        if (gammas_[i] > 1e-14 * gmax) out = gammas_[i];
    }
    return out;
}

std::vector<Vec> direct_flow(const TtildeOp& op, const Vec& v0, const Vec& w_star,
                             std::span<const double> t_grid) {
    // Power iteration for the stiffness scale; only the step size depends on
    // it, so the spectral solver stays an independent oracle.
    Vec v = Vec::Ones(v0.size()).normalized();
    double lmax = 1.0;
    for (int it = 0; it < 50; ++it) {
        v = op.T * v;
        const double nv = v.norm();
        if (nv == 0.0) break;
        lmax = nv;
        v /= nv;
    }

    std::vector<Vec> out;
    Vec y = v0 - w_star;
    double t = 0.0;
    double dt = std::min(0.5 / lmax, 0.05);
    const double init_norm = y.norm();

    for (double target : t_grid) {
        if (target < t) throw ConfigError("direct_flow: t_grid must be nondecreasing");
        int halvings = 0;
        while (t < target - 1e-15) {
            const double step = std::min(dt, target - t);
            const Vec k1 = -(op.T * y);
            const Vec k2 = -(op.T * (y + 0.5 * step * k1));
            const Vec k3 = -(op.T * (y + 0.5 * step * k2));
            const Vec k4 = -(op.T * (y + step * k3));
            const Vec ynew = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!ynew.allFinite() || ynew.norm() > 10.0 * std::max(init_norm, 1e-300)) {
                if (++halvings > 10) throw NumericalError("direct_flow: step-size instability");
                dt *= 0.5;
                continue;
            }
            y = ynew;
            t += step;
        }
        out.push_back(y);
    }
    return out;
}

WideLimitResult compare_wide_limit(const OperatorSpec& spec, std::shared_ptr<const ScalarField> u0,
                                   const QuadratureRule& grid, double h, const std::vector<int>& n_list,
                                   const std::vector<double>& t_probe, int trials, double delta,
                                   long kernel_samples, double flow_dt, const BumpActivation& act,
                                   std::uint64_t seed) {
    if (trials < 5) throw ConfigError("compare_wide_limit: need at least 5 trials");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        if (n_list[i] <= n_list[i - 1]) throw ConfigError("compare_wide_limit: n_list must be increasing");
    }

    EnergyContext ctx = make_energy_context(spec, grid, u0, h);
    GridContext gctx = make_grid_context(ctx);
    const Vec w_star = grid_minimizer(ctx, gctx);

    const InitLaw law{grid.dim()};
    const KernelEstimate kernel =
        empirical_kernel(grid, kernel_samples, seed_for(seed, SeedStage::Kernel), act, law);
    const TtildeOp op = build_Ttilde(kernel, gctx);
    const Vec v0_limit = Vec::Zero(grid.size());
    const SpectralFlow limit(op, v0_limit, w_star);

    WideLimitResult result;
    result.n_list = n_list;

    const double t_max = *std::max_element(t_probe.begin(), t_probe.end());
    const long total_steps = static_cast<long>(std::llround(t_max / flow_dt));

    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const int n = n_list[ni];
        const double r_n = std::log(static_cast<double>(n));
        std::vector<std::vector<double>> errs(t_probe.size());

        for (int trial = 0; trial < trials; ++trial) {
            NetworkParams net = init_params(
                n, delta, r_n, grid.dim(),
                seed_for(seed, SeedStage::TrialNetworks, ni * 1000 + static_cast<std::uint64_t>(trial)));
            const double eta = net.learning_rate();

            Vec theta(net.param_count());
            net.to_flat({theta.data(), static_cast<std::size_t>(theta.size())});
            Vec grad;

            std::size_t probe_idx = 0;
            for (long step = 0; step <= total_steps; ++step) {
                const double t = step * flow_dt;
                while (probe_idx < t_probe.size() && t_probe[probe_idx] <= t + 0.5 * flow_dt) {
                    NetworkField f(net, act);
                    const NodeField nf = f.sample(grid, false);
                    const Vec limit_vals = w_star + limit.evaluate(t_probe[probe_idx]);
                    const Vec diff = nf.values - limit_vals;
                    errs[probe_idx].push_back(gctx.h1_norm(diff));
                    ++probe_idx;
                }
                if (step == total_steps) break;
                loss_and_grad(ctx, net, act, grad);
                theta -= flow_dt * eta * grad;
                if (!theta.allFinite()) throw NumericalError("compare_wide_limit: non-finite update");
                net.from_flat({theta.data(), static_cast<std::size_t>(theta.size())});
            }
        }

        double sup_err = 0.0;
        for (std::size_t ti = 0; ti < t_probe.size(); ++ti) {
            double mean = 0.0;
            for (double e : errs[ti]) mean += e;
            mean /= errs[ti].size();
            double var = 0.0;
            for (double e : errs[ti]) var += (e - mean) * (e - mean);
            const double sd = errs[ti].size() > 1 ? std::sqrt(var / (errs[ti].size() - 1)) : 0.0;
            result.rows.push_back({n, t_probe[ti], mean, sd / std::sqrt(static_cast<double>(errs[ti].size()))});
            sup_err = std::max(sup_err, mean);
        }
        result.sup_error.push_back(sup_err);
    }
    return result;
}

}  // namespace dgflow
