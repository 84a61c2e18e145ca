#include <doctest.h>

#include <cmath>
#include <random>

#include "dgflow/operators.hpp"

using namespace dgflow;

namespace {

std::vector<NetworkParams> random_trials(int count, int n, int dim, std::uint64_t seed) {
    std::vector<NetworkParams> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(init_params(n, 0.75, std::log(static_cast<double>(n)), dim, seed + i));
    }
    return out;
}

}  // namespace

TEST_CASE("heat spec: A = kappa I, r = 0, no drift or jump") {
    const OperatorSpec spec = make_heat(0.7, 2);
    double a[4];
    const Vec x = Vec::Zero(2);
    spec.diffusion({x.data(), 2}, a);
    CHECK(a[0] == 0.7);
    CHECK(a[3] == 0.7);
    CHECK(a[1] == 0.0);
    CHECK(spec.reaction({x.data(), 2}) == 0.0);
    CHECK_FALSE(spec.has_drift());
    CHECK_FALSE(spec.jump.has_value());
    CHECK_THROWS_AS(make_heat(-1.0, 1), ConfigError);
}

TEST_CASE("black-scholes drift coefficient cancels at sigma^2/2 = r") {
    const OperatorSpec spec = make_black_scholes(0.4, 0.08);
    double b = 1.0;
    const double x = 0.5;
    spec.drift({&x, 1}, &b);
    CHECK(b == doctest::Approx(0.0).epsilon(1e-15));

    const OperatorSpec generic = make_black_scholes(0.4, 0.05);
    generic.drift({&x, 1}, &b);
    CHECK(b == doctest::Approx(0.08 - 0.05).epsilon(1e-15));
}

TEST_CASE("heston diffusion matrix matches the model display") {
    const double eta = 0.3, rho = -0.5;
    const OperatorSpec spec = make_heston(0.02, eta, rho, 1.0, 0.2);
    Vec x(2);
    x << 1.4, 0.09;  // (S, V)
    double a[4];
    spec.diffusion({x.data(), 2}, a);
    const double S = x[0], V = x[1];
    CHECK(a[0] == doctest::Approx(0.5 * V * S * S).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(0.5 * V * eta * rho * S).epsilon(1e-14));
    CHECK(a[2] == a[1]);
    CHECK(a[3] == doctest::Approx(0.5 * V * eta * eta).epsilon(1e-14));
}

TEST_CASE("bilinear form: zero argument, symmetry, heat bump oracle") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -1.5, 1.5), 2000);

    BumpField bump(act, Vec::Zero(1), 1.0, 1.0);
    ZeroField zero(1);
    CHECK(bilinear_a(heat, bump, zero, rule) == 0.0);

    // dense-grid oracle of kappa int (w')^2 (200k-node radial reference, frozen)
    const double oracle = 2.0777456683667414;
    CHECK(bilinear_a(heat, bump, bump, rule) == doctest::Approx(oracle).epsilon(1e-4));

    // symmetry on random networks
    const auto trials = random_trials(2, 16, 1, 900);
    NetworkField u(trials[0], act), v(trials[1], act);
    const QuadratureRule r2 = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 600);
    const double auv = bilinear_a(heat, u, v, r2);
    const double avu = bilinear_a(heat, v, u, r2);
    CHECK(std::abs(auv - avu) < 1e-12);
}

TEST_CASE("apply_F: drift-only operators evaluate b . grad u") {
    const BumpActivation act(1);
    const OperatorSpec heat = make_heat(1.0, 1);
    BumpField bump(act, Vec::Zero(1), 1.0, 1.0);
    const double x = 0.2;
    CHECK(apply_F(heat, bump, {&x, 1}) == 0.0);

    const OperatorSpec bs = make_black_scholes(0.4, 0.05);
    Vec g(1);
    bump.gradient({&x, 1}, {g.data(), 1});
    CHECK(apply_F(bs, bump, {&x, 1}) == doctest::Approx((0.08 - 0.05) * g[0]).epsilon(1e-14));
}

TEST_CASE("merton jump integral: monte carlo matches dense quadrature") {
    const BumpActivation act(1);
    const OperatorSpec merton = make_merton(0.3, 0.02, Vec::Zero(1), 0.5);
    BumpField bump(act, Vec::Zero(1), 1.0, 1.0);
    const double x = 0.5;

    const long count = 1000000;
    const Mat z = merton.jump->sample(count, 31);
    double mean = 0.0, sq = 0.0;
    const double ux = bump.value({&x, 1});
    for (long j = 0; j < count; ++j) {
        const double y = x * std::exp(z(j, 0));
        const double v = bump.value({&y, 1}) - ux;
        mean += v;
        sq += v * v;
    }
    mean /= count;
    const double se = std::sqrt((sq / count - mean * mean) / count);
    const double mc = -merton.jump->lambda * mean;

    const double dense = -jump_integral_quadrature(merton, bump, {&x, 1});
    CHECK(std::abs(mc - dense) <= 3.0 * merton.jump->lambda * se + 1e-10);

    // apply_F wires the jump term with the same frozen samples (drift is zero)
    const double f = apply_F(merton, bump, {&x, 1}, &z);
    CHECK(f == doctest::Approx(mc).epsilon(1e-12));

    CHECK_THROWS_AS(apply_F(merton, bump, {&x, 1}, nullptr), NumericalError);
}

TEST_CASE("apply_F is zero for constants under the jump operator") {
    class ConstField : public ScalarField {
    public:
        int dim() const override { return 1; }
        double value(std::span<const double>) const override { return 3.0; }
        void gradient(std::span<const double>, std::span<double> g) const override { g[0] = 0.0; }
    };
    const OperatorSpec merton = make_merton(0.3, 0.02, Vec::Zero(1), 0.5);
    const Mat z = merton.jump->sample(2000, 5);
    ConstField cf;
    const double x = 0.4;
    CHECK(apply_F(merton, cf, {&x, 1}, &z) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("allen-cahn splits the double well into the explicit part") {
    const OperatorSpec ac = make_allen_cahn(0.5, 1);
    double a[1];
    const double x = 0.1;
    ac.diffusion({&x, 1}, a);
    CHECK(a[0] == 1.0);
    CHECK(ac.reaction({&x, 1}) == 0.0);
    REQUIRE(ac.nonlinearity.has_value());
    // W'(u)/eps^2 at u = 2: (8 - 2)/0.25
    CHECK((*ac.nonlinearity)(2.0) == doctest::Approx(24.0).epsilon(1e-14));
}

TEST_CASE("estimate_constants: heat coercivity ratio lies in (0, kappa]") {
    const BumpActivation act(1);
    const double kappa = 1.0;
    const OperatorSpec heat = make_heat(kappa, 1);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 512);
    const auto trials = random_trials(50, 24, 1, 7000);
    const AssumptionConstants con = estimate_constants(heat, trials, act, rule);
    CHECK(con.lambda1 > 0.0);
    CHECK(con.lambda1 <= kappa + 1e-12);
    CHECK(con.lambda2 == 0.0);
    CHECK(con.M > 0.0);
    CHECK(std::isfinite(con.M));
}

TEST_CASE("estimate_constants: black-scholes continuity bound from the appendix") {
    const BumpActivation act(1);
    const double sigma = 0.4, rate = 0.05;
    const OperatorSpec bs = make_black_scholes(sigma, rate);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 512);
    const auto trials = random_trials(50, 24, 1, 8000);
    const AssumptionConstants con = estimate_constants(bs, trials, act, rule);
    CHECK(con.M <= 0.5 * sigma * sigma + rate + 1e-3);
    CHECK(con.lambda1 > 0.0);
}

TEST_CASE("garding inequality holds on held-out networks with estimated constants") {
    const BumpActivation act(1);
    const OperatorSpec bs = make_black_scholes(0.4, 0.05);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 512);
    const auto trials = random_trials(50, 24, 1, 8000);
    const AssumptionConstants con = estimate_constants(bs, trials, act, rule);

    const auto held_out = random_trials(25, 24, 1, 12000);
    const CoeffField cf = sample_coeffs(bs, rule);
    for (const auto& net : held_out) {
        NetworkField f(net, act);
        const NodeField nf = f.sample(rule, true);
        const double auu = inner_product(nf, nf, rule, IPMode::AForm, &cf);
        const double h1 = inner_product(nf, nf, rule, IPMode::H1);
        const double l2 = inner_product(nf, nf, rule, IPMode::L2);
        CHECK(auu >= con.lambda1 * h1 - con.lambda2 * l2 - 1e-10);
    }
}

TEST_CASE("merton appendix bound: |F_nu(u)|^2 <= 2 lambda (e+1) |u|_H1^2") {
    const BumpActivation act(1);
    const double lambda = 0.5;
    const OperatorSpec merton = make_merton(0.3, 0.02, Vec::Zero(1), lambda);
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(1, -12.0, 12.0), 256);

    const auto trials = random_trials(20, 12, 1, 31000);
    int violations = 0;
    for (const auto& net : trials) {
        NetworkField f(net, act);
        double fnorm = 0.0;
        for (long j = 0; j < rule.size(); ++j) {
            const double v = jump_integral_quadrature(merton, f, rule.node(j), 400, 8.0);
            fnorm += rule.weight(j) * v * v;
        }
        const NodeField nf = f.sample(rule, true);
        const double h1 = inner_product(nf, nf, rule, IPMode::H1);
        if (fnorm > 2.0 * lambda * (std::exp(1.0) + 1.0) * h1) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("jump sampler is deterministic per seed") {
    const JumpSpec js{0.5, 2};
    const Mat a = js.sample(100, 77);
    const Mat b = js.sample(100, 77);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("sample_coeffs verifies pointwise symmetry of A") {
    OperatorSpec bad = make_heat(1.0, 2);
    bad.diffusion = [](std::span<const double>, double* a) {
        a[0] = 1.0;
        a[1] = 0.2;
        a[2] = 0.1;
        a[3] = 1.0;
    };
    const QuadratureRule rule = QuadratureRule::tensor_grid(Box::cube(2, -1.0, 1.0), 4);
    CHECK_THROWS_AS(sample_coeffs(bad, rule), NumericalError);
}
