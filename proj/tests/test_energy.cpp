#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "dgflow/energy.hpp"

using namespace dgflow;

namespace {

// Random network whose raw parameters all sit at least `margin` away from the
// clip bounds, so one-sided indicator values never contaminate the FD check.
NetworkParams interior_net(int n, int dim, double r, double margin, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    NetworkParams net;
    net.delta = 0.75;
    net.clip_radius = r;
    net.dim = dim;
    for (int i = 0; i < n; ++i) {
        NeuronParams p;
        p.beta = (r - 2.0 * margin) * unif(rng);
        const double lo = 1.0 / r + margin, hi = r - margin;
        p.alpha = (unif(rng) > 0 ? 1.0 : -1.0) * (lo + (hi - lo) * std::abs(unif(rng)));
        p.c = Vec(dim);
        for (int k = 0; k < dim; ++k) p.c[k] = (r - 2.0 * margin) * unif(rng);
        net.neurons.push_back(p);
    }
    return net;
}

EnergyContext heat_context(const OperatorSpec& spec, const QuadratureRule& rule,
                           std::shared_ptr<const ScalarField> prev, double h) {
    return make_energy_context(spec, rule, std::move(prev), h);
}

double fd_grad_component(const EnergyContext& ctx, const NetworkParams& net, const BumpActivation& act,
                         int flat_index, double step) {
    Vec flat(net.param_count());
    NetworkParams work = net;
    net.to_flat({flat.data(), static_cast<std::size_t>(flat.size())});
    flat[flat_index] += step;
    work.from_flat({flat.data(), static_cast<std::size_t>(flat.size())});
    const double up = loss(ctx, work, act);
    flat[flat_index] -= 2.0 * step;
    work.from_flat({flat.data(), static_cast<std::size_t>(flat.size())});
    const double down = loss(ctx, work, act);
    return (up - down) / (2.0 * step);
}

}  // namespace

TEST_CASE("loss of the zero network is the constant term") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -3.0, 3.0), 256);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const EnergyContext ctx = heat_context(heat, rule, prev, 0.05);

    NetworkParams zeros = interior_net(4, 1, 2.0, 1e-2, 1);
    for (auto& p : zeros.neurons) p.beta = 0.0;
    const double expected = 0.5 * ctx.prev_l2_sq;
    CHECK(loss(ctx, zeros, act) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss at h = 0 is the pure L2 projection") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -3.0, 3.0), 256);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const EnergyContext ctx = heat_context(heat, rule, prev, 0.0);

    const NetworkParams net = interior_net(3, 1, 2.0, 1e-2, 2);
    NetworkField f(net, act);
    const NodeField nf = f.sample(rule, true);
    double expect = 0.0;
    for (long j = 0; j < rule.size(); ++j) {
        const double diff = nf.values[j] - ctx.prev.values[j];
        expect += 0.5 * rule.weight(j) * diff * diff;
    }
    CHECK(loss(ctx, nf) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("loss at u = U^{k-1} with F = 0 reduces to (h/2) a(u,u)") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -3.0, 3.0), 512);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const double h = 0.07;
    const EnergyContext ctx = heat_context(heat, rule, prev, h);

    const NodeField u = prev->sample(rule, true);
    const double a_uu = bilinear_a(heat, u, u, rule);
    CHECK(loss(ctx, u) == doctest::Approx(0.5 * h * a_uu).epsilon(1e-12));
}

TEST_CASE("cached node values agree with fresh evaluation at random nodes") {
    const BumpActivation act(1);
    const OperatorSpec bs = make_black_scholes(0.4, 0.05);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -3.0, 3.0), 256);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const EnergyContext ctx = heat_context(bs, rule, prev, 0.05);

    std::mt19937_64 rng(8);
    std::uniform_int_distribution<long> pick(0, rule.size() - 1);
    for (int i = 0; i < 10; ++i) {
        const long j = pick(rng);
        const auto x = rule.node(j);
        CHECK(std::abs(ctx.prev.values[j] - prev->value(x)) < 1e-12);
        Vec g(1);
        prev->gradient(x, {g.data(), 1});
        CHECK(std::abs(ctx.prev.grads(j, 0) - g[0]) < 1e-12);
        CHECK(std::abs(ctx.f_prev[j] - apply_F(bs, *prev, x)) < 1e-12);
    }
}

TEST_CASE("frechet pair: linearity, zero argument, and the U^{k-1} identity") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -4.0, 4.0), 256);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const double h = 0.05;
    const EnergyContext ctx = heat_context(heat, rule, prev, h);

    const NetworkParams na = interior_net(4, 1, 2.0, 1e-2, 5);
    const NetworkParams nb = interior_net(4, 1, 2.0, 1e-2, 6);
    NetworkField fa(na, act), fb(nb, act);
    const NodeField v = fa.sample(rule, true);
    const NodeField u1 = fb.sample(rule, true);
    const NodeField pz = prev->sample(rule, true);

    NodeField zero;
    zero.values = Vec::Zero(rule.size());
    zero.grads = Mat::Zero(rule.size(), 1);
    CHECK(frechet_pair(ctx, v, zero) == 0.0);

    // exact linearity in u
    NodeField combo;
    const double a = 0.7, b = -1.3;
    combo.values = a * u1.values + b * pz.values;
    combo.grads = a * u1.grads + b * pz.grads;
    const double lhs = frechet_pair(ctx, v, combo);
    const double rhs = a * frechet_pair(ctx, v, u1) + b * frechet_pair(ctx, v, pz);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    // v = U^{k-1}, F = 0: pair reduces to h a(U^{k-1}, u)
    const double pair = frechet_pair(ctx, pz, u1);
    CHECK(pair == doctest::Approx(h * bilinear_a(heat, pz, u1, rule)).epsilon(1e-10));
}

TEST_CASE("directional derivative of loss converges to frechet_pair at rate tau^2") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -4.0, 4.0), 256);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const EnergyContext ctx = heat_context(heat, rule, prev, 0.05);

    const NetworkParams na = interior_net(4, 1, 2.0, 1e-2, 9);
    const NetworkParams nb = interior_net(4, 1, 2.0, 1e-2, 10);
    NetworkField fa(na, act), fb(nb, act);
    const NodeField v = fa.sample(rule, true);
    const NodeField u = fb.sample(rule, true);
    const double pair = frechet_pair(ctx, v, u);

    auto dir_loss = [&](double tau) {
        NodeField vpu, vmu;
        vpu.values = v.values + tau * u.values;
        vpu.grads = v.grads + tau * u.grads;
        vmu.values = v.values - tau * u.values;
        vmu.grads = v.grads - tau * u.grads;
        return (loss(ctx, vpu) - loss(ctx, vmu)) / (2.0 * tau);
    };
    const double e3 = std::abs(dir_loss(1e-3) - pair);
    const double e4 = std::abs(dir_loss(1e-4) - pair);
    // I^k is quadratic, so central differences are exact up to roundoff
    CHECK(e3 < 1e-10);
    CHECK(e4 < 1e-9);
}

TEST_CASE("loss_grad: masked and zero cases") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -4.0, 4.0), 128);
    auto zero_prev = std::make_shared<ZeroField>(1);
    const EnergyContext ctx = heat_context(heat, rule, zero_prev, 0.05);

    // all beta = 0 and U^{k-1} = 0: global minimum, zero gradient
    NetworkParams net = interior_net(4, 1, 2.0, 1e-2, 11);
    for (auto& p : net.neurons) p.beta = 0.0;
    CHECK(loss_grad(ctx, net, act).norm() == 0.0);

    // clipped-out beta: its gradient block keeps only the (zeroed) mask rows
    NetworkParams clipped = interior_net(1, 1, 2.0, 1e-2, 12);
    clipped.neurons[0].beta = 5.0;  // |beta| > r_n
    const Vec g = loss_grad(ctx, clipped, act);
    CHECK(g[0] == 0.0);
}

TEST_CASE("loss_grad matches central finite differences of loss") {
    std::mt19937_64 rng(2024);
    for (int d : {1, 2}) {
        const BumpActivation act(d);
        const QuadratureRule rule =
            d == 1 ? QuadratureRule::tensor_grid(Box::cube(1, -3.5, 3.5), 200)
                   : QuadratureRule::tensor_grid(Box::cube(2, -2.5, 2.5), 24);
        for (int trial = 0; trial < 4; ++trial) {
            OperatorSpec spec;
            if (trial % 3 == 0) {
                spec = make_heat(0.5 + trial * 0.3, d);
            } else if (d == 1 && trial % 3 == 1) {
                spec = make_black_scholes(0.4, 0.05);
            } else {
                spec = make_heat(1.0, d);
            }
            auto prev = std::make_shared<NetworkField>(
                std::make_shared<const NetworkParams>(interior_net(3, d, 2.0, 1e-2, 40 + trial)), act);
            const EnergyContext ctx = heat_context(spec, rule, prev, 0.05);
            const NetworkParams net = interior_net(2, d, 2.0, 1e-2, 70 + trial);
            const Vec g = loss_grad(ctx, net, act);

            const double gmax = g.cwiseAbs().maxCoeff();
            for (int p = 0; p < net.param_count(); ++p) {
                const double fd = fd_grad_component(ctx, net, act, p, 1e-6);
                const double denom = std::max({std::abs(fd), 1e-3 * gmax, 1e-14});
                CHECK(std::abs(g[p] - fd) / denom < 1e-5);
            }
        }
    }
}

TEST_CASE("quadratic lower bound of the energy holds on random networks") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 512);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const double h = 0.05;
    const EnergyContext ctx = heat_context(heat, rule, prev, h);
    const CoeffField cf = sample_coeffs(heat, rule);

    // empirical lambda_1 over a trial batch
    double lambda1 = std::numeric_limits<double>::infinity();
    std::vector<NetworkParams> nets;
    for (int i = 0; i < 100; ++i) {
        nets.push_back(init_params(16, 0.75, std::log(16.0), 1, 500 + i));
        NetworkField f(nets.back(), act);
        const NodeField nf = f.sample(rule, true);
        const double h1 = inner_product(nf, nf, rule, IPMode::H1);
        if (h1 <= 0.0) continue;
        lambda1 = std::min(lambda1, inner_product(nf, nf, rule, IPMode::AForm, &cf) / h1);
    }
    const double c3 = h * lambda1 / 4.0;

    // C4 from the proof: |h F - U^{k-1}|^2 / (h lambda1) + |U^{k-1}|^2 / 2
    const double c4 = ctx.prev_l2_sq / (h * lambda1) + 0.5 * ctx.prev_l2_sq;
    for (const auto& net : nets) {
        NetworkField f(net, act);
        const NodeField nf = f.sample(rule, true);
        const double h1 = inner_product(nf, nf, rule, IPMode::H1);
        CHECK(loss(ctx, nf) >= c3 * h1 - c4 - 1e-10);
    }
}

TEST_CASE("loss continuity bound with empirical M") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 512);
    auto prev = std::make_shared<BumpField>(act, Vec::Zero(1), 1.0, 1.0);
    const double h = 0.05;
    const EnergyContext ctx = heat_context(heat, rule, prev, h);

    std::vector<NetworkParams> trials;
    for (int i = 0; i < 50; ++i) trials.push_back(init_params(16, 0.75, std::log(16.0), 1, 800 + i));
    const AssumptionConstants con = estimate_constants(heat, trials, act, rule);
    const NodeField pz = prev->sample(rule, true);
    const double prev_h1 = std::sqrt(inner_product(pz, pz, rule, IPMode::H1));

    for (int i = 0; i + 1 < 20; i += 2) {
        NetworkField fa(trials[i], act), fb(trials[i + 1], act);
        const NodeField f = fa.sample(rule, true);
        const NodeField u = fb.sample(rule, true);
        NodeField fpu;
        fpu.values = f.values + u.values;
        fpu.grads = f.grads + u.grads;
        NodeField fmu;
        fmu.values = f.values - u.values;
        fmu.grads = f.grads - u.grads;
        const double lhs = std::abs(loss(ctx, f) - loss(ctx, u));
        const double rhs = (1.0 + h * con.M) *
                           std::sqrt(inner_product(fmu, fmu, rule, IPMode::H1)) *
                           (std::sqrt(inner_product(fpu, fpu, rule, IPMode::H1)) + prev_h1);
        CHECK(lhs <= rhs + 1e-10);
    }
}

TEST_CASE("h-bound is enforced when lambda2 is positive") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -3.0, 3.0), 64);
    auto prev = std::make_shared<ZeroField>(1);
    CHECK_THROWS_AS(make_energy_context(heat, rule, prev, 0.3, 2.0), ConfigError);
    CHECK_NOTHROW(make_energy_context(heat, rule, prev, 0.2, 2.0));
}
