#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dgflow/shallow_net.hpp"

using namespace dgflow;

namespace {

NeuronParams neuron(double beta, double alpha, std::initializer_list<double> c) {
    NeuronParams p;
    p.beta = beta;
    p.alpha = alpha;
    p.c = Vec(static_cast<long>(c.size()));
    int i = 0;
    for (double v : c) p.c[i++] = v;
    return p;
}

NetworkParams tiny_net(std::vector<NeuronParams> neurons, double delta, double r, int dim) {
    NetworkParams net;
    net.neurons = std::move(neurons);
    net.delta = delta;
    net.clip_radius = r;
    net.dim = dim;
    return net;
}

// Unclipped single-neuron value beta w(alpha x + c); finite-difference target
// for param_grad away from clip boundaries.
double raw_neuron_value(const BumpActivation& act, const NeuronParams& p, const Vec& x) {
    Vec z = p.alpha * x + p.c;
    return p.beta * act.value({z.data(), static_cast<std::size_t>(z.size())});
}

}  // namespace

TEST_CASE("clip applies the componentwise projection formulas") {
    NeuronParams p = neuron(5.0, 0.1, {3.0});
    NeuronParams q = clip(p, 2.0);
    CHECK(q.beta == 2.0);
    CHECK(q.alpha == 0.5);
    CHECK(q.c[0] == 2.0);

    p = neuron(1.0, -3.0, {-5.0});
    q = clip(p, 4.0);
    CHECK(q.beta == 1.0);
    CHECK(q.alpha == -3.0);
    CHECK(q.c[0] == -4.0);

    // identity on the feasible set
    p = neuron(0.5, 1.5, {-1.0});
    q = clip(p, 2.0);
    CHECK(q.beta == p.beta);
    CHECK(q.alpha == p.alpha);
    CHECK(q.c[0] == p.c[0]);

    CHECK_THROWS_AS(clip(neuron(1.0, 0.0, {0.0}), 2.0), NumericalError);
}

TEST_CASE("clip is idempotent and lands in the feasible set") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-8.0, 8.0);
    for (int trial = 0; trial < 200; ++trial) {
        double alpha = unif(rng);
        if (alpha == 0.0) alpha = 0.3;
        const NeuronParams p = neuron(unif(rng), alpha, {unif(rng), unif(rng)});
        const double r = 3.0;
        const NeuronParams q = clip(p, r);
        CHECK(std::abs(q.beta) <= r);
        CHECK(std::abs(q.alpha) >= 1.0 / r);
        CHECK(std::abs(q.alpha) <= r);
        for (int k = 0; k < 2; ++k) CHECK(std::abs(q.c[k]) <= r);
        const NeuronParams qq = clip(q, r);
        CHECK(qq.beta == q.beta);
        CHECK(qq.alpha == q.alpha);
        CHECK(qq.c == q.c);
    }
}

TEST_CASE("eval: zero betas, single neuron, and the hand-summed stack") {
    const BumpActivation act(1);
    const double w0 = act.norm_const() * std::exp(-1.0);

    auto zero = tiny_net({neuron(0, 1, {0}), neuron(0, 2, {0.5})}, 0.75, 2.0, 1);
    double x = 0.3;
    CHECK(eval(zero, act, {&x, 1}) == 0.0);

    auto single = tiny_net({neuron(1, 1, {0})}, 0.75, 2.0, 1);
    x = 0.0;
    CHECK(eval(single, act, {&x, 1}) == doctest::Approx(w0).epsilon(1e-14));

    // n = 4 identical neurons, delta = 1/2 is outside (1/2,1); the hand sum
    // 4 * 4^{-delta} w(0) = 4^{1-delta} w(0) is checked at delta = 0.75.
    auto stack = tiny_net({neuron(1, 1, {0}), neuron(1, 1, {0}), neuron(1, 1, {0}), neuron(1, 1, {0})},
                          0.75, 1.2, 1);
    CHECK(eval(stack, act, {&x, 1}) ==
          doctest::Approx(std::pow(4.0, 1.0 - 0.75) * w0).epsilon(1e-14));
}

TEST_CASE("eval vanishes outside the union of neuron supports") {
    const BumpActivation act(1);
    auto net = tiny_net({neuron(1.0, 2.0, {0.0}), neuron(-0.5, 1.0, {1.0})}, 0.75, 2.0, 1);
    double x = 5.0;  // outside both supports
    CHECK(eval(net, act, {&x, 1}) == 0.0);
    CHECK(spatial_grad(net, act, {&x, 1}).norm() == 0.0);
}

TEST_CASE("spatial_grad matches finite differences of eval") {
    const BumpActivation act(1);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto net = tiny_net({neuron(0.8, 1.3, {0.2})}, 0.75, 2.0, 1);
    double x = 0.2;
    const Vec g = spatial_grad(net, act, {&x, 1});
    double xp = x + 1e-6, xm = x - 1e-6;
    const double fd = (eval(net, act, {&xp, 1}) - eval(net, act, {&xm, 1})) / 2e-6;
    CHECK(g[0] == doctest::Approx(fd).epsilon(1e-6));

    // 2d random networks
    const BumpActivation act2(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<NeuronParams> ns;
        for (int i = 0; i < 3; ++i) ns.push_back(neuron(unif(rng), 1.0 + 0.5 * unif(rng), {unif(rng), unif(rng)}));
        auto net2 = tiny_net(std::move(ns), 0.8, 2.0, 2);
        Vec p(2);
        p << 0.3 * unif(rng), 0.3 * unif(rng);
        const Vec g2 = spatial_grad(net2, act2, {p.data(), 2});
        for (int k = 0; k < 2; ++k) {
            Vec pp = p, pm = p;
            pp[k] += 1e-6;
            pm[k] -= 1e-6;
            const double fd2 = (eval(net2, act2, {pp.data(), 2}) - eval(net2, act2, {pm.data(), 2})) / 2e-6;
            CHECK(g2[k] == doctest::Approx(fd2).epsilon(2e-6));
        }
    }
}

TEST_CASE("param_grad honors the clip indicators") {
    const BumpActivation act(1);
    auto net = tiny_net({neuron(5.0, 1.0, {0.0})}, 0.75, 2.0, 1);  // beta outside [-2,2]
    double x = 0.1;
    ParamGradient pg = param_grad(net, act, {&x, 1}, 0);
    CHECK(pg.d_beta == 0.0);
    CHECK_FALSE(pg.beta_active);

    // beta = 0 inside bounds: d_alpha = d_c = 0, d_beta = psi
    net = tiny_net({neuron(0.0, 1.0, {0.0})}, 0.75, 2.0, 1);
    pg = param_grad(net, act, {&x, 1}, 0);
    CHECK(pg.d_alpha == 0.0);
    CHECK(pg.d_c[0] == 0.0);
    double z = x;
    CHECK(pg.d_beta == doctest::Approx(act.value({&z, 1})).epsilon(1e-14));
}

TEST_CASE("param_grad matches finite differences on the unclipped neuron") {
    const BumpActivation act(1);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        // interior parameters, at least 1e-3 from every clip bound (r = 2)
        const double beta = 1.5 * unif(rng);
        const double alpha = (unif(rng) > 0 ? 1.0 : -1.0) * (0.7 + 0.8 * std::abs(unif(rng)));
        const double c = 1.2 * unif(rng);
        auto net = tiny_net({neuron(beta, alpha, {c})}, 0.75, 2.0, 1);
        const Vec x = Vec::Constant(1, 0.3);

        const ParamGradient pg = param_grad(net, act, {x.data(), 1}, 0);
        const double step = 1e-6;
        NeuronParams p = net.neurons[0];

        p.beta = beta + step;
        const double fb_p = raw_neuron_value(act, p, x);
        p.beta = beta - step;
        const double fb_m = raw_neuron_value(act, p, x);
        p.beta = beta;
        const double fd_beta = (fb_p - fb_m) / (2.0 * step);
        CHECK(std::abs(pg.d_beta - fd_beta) <= 1e-6 * std::max(1.0, std::abs(fd_beta)));

        p.alpha = alpha + step;
        const double fa_p = raw_neuron_value(act, p, x);
        p.alpha = alpha - step;
        const double fa_m = raw_neuron_value(act, p, x);
        p.alpha = alpha;
        const double fd_alpha = (fa_p - fa_m) / (2.0 * step);
        CHECK(std::abs(pg.d_alpha - fd_alpha) <= 1e-6 * std::max(1.0, std::abs(fd_alpha)));

        p.c[0] = c + step;
        const double fc_p = raw_neuron_value(act, p, x);
        p.c[0] = c - step;
        const double fc_m = raw_neuron_value(act, p, x);
        const double fd_c = (fc_p - fc_m) / (2.0 * step);
        CHECK(std::abs(pg.d_c[0] - fd_c) <= 1e-6 * std::max(1.0, std::abs(fd_c)));
    }
}

TEST_CASE("param_grad_spatial matches finite differences of param_grad") {
    for (int d : {1, 2}) {
        const BumpActivation act(d);
        std::mt19937_64 rng(31 + d);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> cvals;
            for (int k = 0; k < d; ++k) cvals.push_back(0.8 * unif(rng));
            NeuronParams p;
            p.beta = 1.2 * unif(rng);
            p.alpha = (unif(rng) > 0 ? 1.0 : -1.0) * (0.8 + 0.6 * std::abs(unif(rng)));
            p.c = Eigen::Map<Vec>(cvals.data(), d);
            auto net = tiny_net({p}, 0.75, 2.0, d);

            Vec x(d);
            for (int k = 0; k < d; ++k) x[k] = 0.3 * unif(rng);
            const Mat jac = param_grad_spatial(net, act, {x.data(), static_cast<std::size_t>(d)}, 0);

            for (int k = 0; k < d; ++k) {
                Vec xp = x, xm = x;
                xp[k] += 1e-5;
                xm[k] -= 1e-5;
                const ParamGradient gp = param_grad(net, act, {xp.data(), static_cast<std::size_t>(d)}, 0);
                const ParamGradient gm = param_grad(net, act, {xm.data(), static_cast<std::size_t>(d)}, 0);
                CHECK(std::abs(jac(0, k) - (gp.d_beta - gm.d_beta) / 2e-5) <= 1e-5 * std::max(1.0, std::abs(jac(0, k))));
                CHECK(std::abs(jac(1, k) - (gp.d_alpha - gm.d_alpha) / 2e-5) <=
                      2e-5 * std::max(1.0, std::abs(jac(1, k))));
                for (int r = 0; r < d; ++r) {
                    CHECK(std::abs(jac(2 + r, k) - (gp.d_c[r] - gm.d_c[r]) / 2e-5) <=
                          2e-5 * std::max(1.0, std::abs(jac(2 + r, k))));
                }
            }
        }
    }
    // masked rows are zero
    const BumpActivation act(1);
    auto net = tiny_net({neuron(5.0, 1.0, {0.0})}, 0.75, 2.0, 1);
    double x = 0.1;
    const Mat jac = param_grad_spatial(net, act, {&x, 1}, 0);
    CHECK(jac.row(0).norm() == 0.0);
}

TEST_CASE("init_params is deterministic and respects hyperparameter bounds") {
    const NetworkParams a = init_params(64, 0.75, std::log(64.0), 1, 2024);
    const NetworkParams b = init_params(64, 0.75, std::log(64.0), 1, 2024);
    REQUIRE(a.n() == 64);
    for (int i = 0; i < a.n(); ++i) {
        CHECK(a.neurons[i].beta == b.neurons[i].beta);
        CHECK(a.neurons[i].alpha == b.neurons[i].alpha);
        CHECK(a.neurons[i].c == b.neurons[i].c);
    }
    CHECK_THROWS_AS(init_params(64, 0.4, 2.0, 1, 1), ConfigError);
    CHECK_THROWS_AS(init_params(64, 0.75, 10.0, 1, 1), ConfigError);
    CHECK_THROWS_AS(init_params(0, 0.75, 2.0, 1, 1), ConfigError);
}

TEST_CASE("init_params beta mean vanishes and alpha moment matches the Gamma oracle") {
    const int total = 100000;
    std::mt19937_64 rng(99);
    InitLaw law{1};
    double beta_mean = 0.0;
    double alpha_neg = 0.0, alpha_neg_sq = 0.0;
    for (int i = 0; i < total; ++i) {
        const NeuronParams p = law.draw(rng);
        beta_mean += p.beta;
        const double v = std::pow(std::abs(p.alpha), -3.0);  // |alpha|^{-d-2}, d = 1
        alpha_neg += v;
        alpha_neg_sq += v * v;
    }
    beta_mean /= total;
    alpha_neg /= total;
    CHECK(std::abs(beta_mean) <= 0.01);

    // E[G^{-3/2}] = Gamma(1)/Gamma(5/2), frozen closed-form oracle
    const double oracle = 0.7522527780636750;
    const double se = std::sqrt((alpha_neg_sq / total - alpha_neg * alpha_neg) / total);
    CHECK(std::abs(alpha_neg - oracle) <= 3.0 * se);
}

TEST_CASE("validate_init accepts the reference law and flags violations") {
    std::mt19937_64 rng(123);
    InitLaw law{1};
    std::vector<NeuronParams> good;
    for (int i = 0; i < 20000; ++i) good.push_back(law.draw(rng));
    const MomentReport rep = validate_init(good, 1);
    CHECK(rep.all_finite);
    CHECK(rep.beta_symmetry < 0.02);
    CHECK_FALSE(rep.symmetry_flag);
    CHECK_FALSE(rep.divergence_flag);
    CHECK_FALSE(rep.moment_flag);

    // beta == 1: symmetry violation
    std::vector<NeuronParams> skew = good;
    for (auto& p : skew) p.beta = 1.0;
    CHECK(validate_init(skew, 1).symmetry_flag);

    // alpha ~ Uniform(-1,1): E|alpha|^{-3} diverges
    std::vector<NeuronParams> heavy = good;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (auto& p : heavy) {
        double a = unif(rng);
        while (a == 0.0) a = unif(rng);
        p.alpha = a;
    }
    CHECK(validate_init(heavy, 1).divergence_flag);

    CHECK_THROWS_AS(validate_init(std::vector<NeuronParams>(100, good[0]), 1), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    NetworkParams net = init_params(32, 0.8, 3.0, 2, 555);
    const auto path = std::filesystem::temp_directory_path() / "dgflow_ck_test.dgck";
    save_checkpoint(path, net, 555);
    std::uint64_t seed = 0;
    const NetworkParams back = load_checkpoint(path, &seed);
    CHECK(seed == 555);
    CHECK(back.n() == net.n());
    CHECK(back.delta == net.delta);
    CHECK(back.clip_radius == net.clip_radius);
    for (int i = 0; i < net.n(); ++i) {
        CHECK(back.neurons[i].beta == net.neurons[i].beta);
        CHECK(back.neurons[i].alpha == net.neurons[i].alpha);
        CHECK(back.neurons[i].c == net.neurons[i].c);
    }
    std::filesystem::remove(path);
}

TEST_CASE("batch sampler agrees with pointwise evaluation") {
    const BumpActivation act(1);
    const NetworkParams net = init_params(32, 0.75, std::log(32.0), 1, 77);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -6.0, 6.0), 257);
    NetworkField f(net, act);
    const NodeField nf = f.sample(rule, true);
    for (long j = 0; j < rule.size(); j += 13) {
        const auto x = rule.node(j);
        CHECK(nf.values[j] == doctest::Approx(eval(net, act, x)).epsilon(1e-12));
        CHECK(nf.grads(j, 0) == doctest::Approx(spatial_grad(net, act, x)[0]).epsilon(1e-12));
    }
}

TEST_CASE("initial H1 norm scales like n^{1/2-delta}") {
    const BumpActivation act(1);
    const double delta = 0.75;
    const Box box = Box::cube(1, -16.0, 16.0);
    const QuadratureRule rule = QuadratureRule::tensor_grid(box, 2048);
    std::vector<double> logn, lognorm;
    for (int n : {64, 256, 1024}) {
        double acc = 0.0;
        const int inits = 40;
        for (int i = 0; i < inits; ++i) {
            const NetworkParams net = init_params(n, delta, std::log(n), 1, 1000 + 17 * i + n);
            NetworkField f(net, act);
            const NodeField nf = f.sample(rule, true);
            acc += norm(nf, rule, IPMode::H1);
        }
        logn.push_back(std::log(static_cast<double>(n)));
        lognorm.push_back(std::log(acc / inits));
    }
    // two-point slope over the n range
    const double slope = (lognorm.back() - lognorm.front()) / (logn.back() - logn.front());
    CHECK(slope == doctest::Approx(0.5 - delta).epsilon(0.4));
    CHECK(std::abs(slope - (0.5 - delta)) < 0.1);
}
