#include "dgflow/shallow_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace dgflow {

namespace {

double clamp_abs(double v, double lo, double hi) {
    // (hi ^ v) v lo on the magnitude, preserving sign handled by caller
    return std::max(lo, std::min(hi, v));
}

}  // namespace

NeuronParams clip(const NeuronParams& p, double r_n) {
    if (p.alpha == 0.0) throw NumericalError("clip: alpha = 0 has no sign branch");
    if (!(r_n > 1.0)) throw ConfigError("clip: requires r_n > 1");
    NeuronParams q = p;
    q.beta = clamp_abs(p.beta, -r_n, r_n);
    if (p.alpha > 0.0) {
        q.alpha = std::max(1.0 / r_n, std::min(r_n, p.alpha));
    } else {
        q.alpha = std::min(-1.0 / r_n, std::max(-r_n, p.alpha));
    }
    for (int k = 0; k < p.c.size(); ++k) q.c[k] = clamp_abs(p.c[k], -r_n, r_n);
    return q;
}

namespace detail {

ClippedNeuron make_clipped(const NeuronParams& p, double r_n) {
    ClippedNeuron cn;
    const NeuronParams q = clip(p, r_n);
    cn.beta = q.beta;
    cn.alpha = q.alpha;
    cn.c = q.c;
    cn.beta_active = std::abs(p.beta) <= r_n;
    cn.alpha_active = std::abs(p.alpha) >= 1.0 / r_n && std::abs(p.alpha) <= r_n;
    cn.c_active.resize(p.c.size());
    for (int k = 0; k < p.c.size(); ++k) cn.c_active[k] = std::abs(p.c[k]) <= r_n;
    return cn;
}

}  // namespace detail

void NetworkParams::validate() const {
    if (neurons.empty()) throw ConfigError("NetworkParams: need n >= 1");
    if (!(delta > 0.5 && delta < 1.0)) throw ConfigError("NetworkParams: delta must lie in (1/2, 1)");
    const double logn = std::log(static_cast<double>(n()));
    if (clip_radius > logn + 1e-12) {
        throw ConfigError("NetworkParams: clip_radius must satisfy r_n <= log n");
    }
    if (!(clip_radius > 1.0)) throw ConfigError("NetworkParams: clip_radius must exceed 1");
    for (const auto& p : neurons) {
        if (p.alpha == 0.0) throw ConfigError("NetworkParams: alpha must be nonzero");
        if (p.c.size() != dim) throw ConfigError("NetworkParams: shift dimension mismatch");
    }
}

void NetworkParams::to_flat(std::span<double> out) const {
    const int stride = 2 + dim;
    for (int i = 0; i < n(); ++i) {
        out[i * stride + 0] = neurons[i].beta;
        out[i * stride + 1] = neurons[i].alpha;
        for (int k = 0; k < dim; ++k) out[i * stride + 2 + k] = neurons[i].c[k];
    }
}

void NetworkParams::from_flat(std::span<const double> in) {
    const int stride = 2 + dim;
    for (int i = 0; i < n(); ++i) {
        neurons[i].beta = in[i * stride + 0];
        neurons[i].alpha = in[i * stride + 1];
        for (int k = 0; k < dim; ++k) neurons[i].c[k] = in[i * stride + 2 + k];
    }
}

double eval(const NetworkParams& net, const BumpActivation& act, std::span<const double> x) {
    const int d = net.dim;
    double z[8];
    double acc = 0.0;
    for (const auto& p : net.neurons) {
        const NeuronParams q = clip(p, net.clip_radius);
        for (int k = 0; k < d; ++k) z[k] = q.alpha * x[k] + q.c[k];
        acc += q.beta * act.jet(z, nullptr, nullptr);
    }
    return net.scale() * acc;
}

Vec spatial_grad(const NetworkParams& net, const BumpActivation& act, std::span<const double> x) {
    const int d = net.dim;
    double z[8];
    double g[8];
    Vec acc = Vec::Zero(d);
    for (const auto& p : net.neurons) {
        const NeuronParams q = clip(p, net.clip_radius);
        for (int k = 0; k < d; ++k) z[k] = q.alpha * x[k] + q.c[k];
        act.jet(z, g, nullptr);
        for (int k = 0; k < d; ++k) acc[k] += q.beta * q.alpha * g[k];
    }
    return net.scale() * acc;
}

ParamGradient param_grad(const NetworkParams& net, const BumpActivation& act, std::span<const double> x,
                         int neuron) {
    const int d = net.dim;
    const auto cn = detail::make_clipped(net.neurons[neuron], net.clip_radius);
    double z[8];
    double g[8];
    for (int k = 0; k < d; ++k) z[k] = cn.alpha * x[k] + cn.c[k];
    const double w = act.jet(z, g, nullptr);

    ParamGradient pg;
    pg.beta_active = cn.beta_active;
    pg.alpha_active = cn.alpha_active;
    pg.c_active = cn.c_active;
    pg.d_beta = cn.beta_active ? w : 0.0;
    double xg = 0.0;
    for (int k = 0; k < d; ++k) xg += x[k] * g[k];
    pg.d_alpha = cn.alpha_active ? cn.beta * xg : 0.0;
    pg.d_c = Vec::Zero(d);
    for (int k = 0; k < d; ++k) {
        if (cn.c_active[k]) pg.d_c[k] = cn.beta * g[k];
    }
    return pg;
}

Mat param_grad_spatial(const NetworkParams& net, const BumpActivation& act, std::span<const double> x,
                       int neuron) {
    const int d = net.dim;
    const auto cn = detail::make_clipped(net.neurons[neuron], net.clip_radius);
    double z[8];
    double g[8];
    double h[64];
    for (int k = 0; k < d; ++k) z[k] = cn.alpha * x[k] + cn.c[k];
    act.jet(z, g, h);

    Mat out = Mat::Zero(2 + d, d);
    if (cn.beta_active) {
        for (int k = 0; k < d; ++k) out(0, k) = cn.alpha * g[k];
    }
    if (cn.alpha_active) {
        // grad_x [beta x . grad w(z)] = beta (grad w(z) + alpha H(z) x)
        for (int k = 0; k < d; ++k) {
            double hx = 0.0;
            for (int l = 0; l < d; ++l) hx += h[k * d + l] * x[l];
            out(1, k) = cn.beta * (g[k] + cn.alpha * hx);
        }
    }
    for (int r = 0; r < d; ++r) {
        if (!cn.c_active[r]) continue;
        for (int k = 0; k < d; ++k) out(2 + r, k) = cn.beta * cn.alpha * h[r * d + k];
    }
    return out;
}

NeuronParams InitLaw::draw(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::gamma_distribution<double> gamma((dim + 4) / 2.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    NeuronParams p;
    p.beta = unif(rng);
    const double sign = unif(rng) < 0.0 ? -1.0 : 1.0;
    double g = gamma(rng);
    while (g == 0.0) g = gamma(rng);
    p.alpha = sign * std::sqrt(g);
    p.c.resize(dim);
    for (int k = 0; k < dim; ++k) p.c[k] = normal(rng);
    return p;
}

NetworkParams init_params(int n, double delta, double r_n, int dim, std::uint64_t seed) {
    if (n < 1) throw ConfigError("init_params: n must be >= 1");
    if (!(delta > 0.5 && delta < 1.0)) throw ConfigError("init_params: delta must lie in (1/2, 1)");
    if (r_n > std::log(static_cast<double>(n)) + 1e-12) {
        throw ConfigError("init_params: r_n must satisfy r_n <= log n");
    }
    NetworkParams net;
    net.delta = delta;
    net.clip_radius = r_n;
    net.dim = dim;
    net.neurons.reserve(n);
    std::mt19937_64 rng(seed);
    InitLaw law{dim};
    for (int i = 0; i < n; ++i) net.neurons.push_back(law.draw(rng));
    return net;
}

MomentReport validate_init(const std::vector<NeuronParams>& samples, int dim) {
    const long m = static_cast<long>(samples.size());
    if (m < 10000) throw ConfigError("validate_init: need at least 10^4 samples");

    MomentReport rep;
    rep.sample_count = m;
    double beta_mean = 0.0, beta_sq = 0.0;
    double a_pos = 0.0, a_neg = 0.0, c_pos = 0.0;
    const double p_pos = dim + 7.0;
    const double p_neg = dim + 2.0;
    for (const auto& s : samples) {
        beta_mean += s.beta;
        beta_sq += s.beta * s.beta;
        const double aa = std::abs(s.alpha);
        a_pos += std::pow(aa, p_pos);
        a_neg += std::pow(aa, -p_neg);
        c_pos += std::pow(s.c.norm(), p_pos);
    }
    beta_mean /= m;
    rep.beta_sq = beta_sq / m;
    rep.alpha_pos = a_pos / m;
    rep.alpha_neg = a_neg / m;
    rep.c_pos = c_pos / m;
    const double beta_var = std::max(rep.beta_sq - beta_mean * beta_mean, 0.0);
    rep.beta_symmetry = beta_var > 0.0 ? std::abs(beta_mean) / std::sqrt(beta_var)
                                       : std::numeric_limits<double>::infinity();

    // Analytic moments of the reference law (Uniform beta, signed sqrt-Gamma
    // alpha with shape (d+4)/2, standard normal c).
    const double shape = (dim + 4.0) / 2.0;
    rep.beta_sq_analytic = 1.0 / 3.0;
    rep.alpha_pos_analytic = std::exp(std::lgamma(shape + p_pos / 2.0) - std::lgamma(shape));
    rep.alpha_neg_analytic = std::exp(std::lgamma(shape - p_neg / 2.0) - std::lgamma(shape));
    // |c| is chi(d): E|c|^k = 2^{k/2} Gamma((d+k)/2) / Gamma(d/2)
    rep.c_pos_analytic =
        std::pow(2.0, p_pos / 2.0) * std::exp(std::lgamma((dim + p_pos) / 2.0) - std::lgamma(dim / 2.0));

    rep.all_finite = std::isfinite(rep.beta_sq) && std::isfinite(rep.alpha_pos) &&
                     std::isfinite(rep.alpha_neg) && std::isfinite(rep.c_pos);
    rep.symmetry_flag = !(rep.beta_symmetry < 0.05);
    rep.moment_flag = rep.beta_sq > 10.0 * rep.beta_sq_analytic ||
                      rep.alpha_pos > 10.0 * rep.alpha_pos_analytic ||
                      rep.alpha_neg > 10.0 * rep.alpha_neg_analytic ||
                      rep.c_pos > 10.0 * rep.c_pos_analytic || !rep.all_finite;

    // Divergence probe for E|alpha|^{-d-2}: nested prefix estimates that keep
    // growing indicate a non-integrable density near alpha = 0.
    double prev = 0.0;
    int growth_steps = 0;
    for (long size = m / 8; size <= m; size *= 2) {
        double acc = 0.0;
        for (long j = 0; j < size; ++j) acc += std::pow(std::abs(samples[j].alpha), -p_neg);
        const double est = acc / size;
        if (prev > 0.0 && est > 1.5 * prev) ++growth_steps;
        prev = est;
    }
    rep.divergence_flag = growth_steps >= 2 || rep.alpha_neg > 10.0 * rep.alpha_neg_analytic;
    return rep;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& net, std::uint64_t seed) {
    nlohmann::json header;
    header["n"] = net.n();
    header["d"] = net.dim;
    header["delta"] = net.delta;
    header["r_n"] = net.clip_radius;
    header["seed"] = seed;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("save_checkpoint: cannot open " + path.string());
    const char magic[8] = {'D', 'G', 'F', 'L', 'O', 'W', 'C', 'K'};
    out.write(magic, 8);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(htext.data(), static_cast<std::streamsize>(hlen));
    std::vector<double> flat(net.param_count());
    net.to_flat(flat);
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * 8));
    if (!out) throw NumericalError("save_checkpoint: write failed for " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NumericalError("load_checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "DGFLOWCK", 8) != 0) {
        throw NumericalError("load_checkpoint: bad magic in " + path.string());
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    const auto header = nlohmann::json::parse(htext);

    NetworkParams net;
    const int n = header.at("n").get<int>();
    net.dim = header.at("d").get<int>();
    net.delta = header.at("delta").get<double>();
    net.clip_radius = header.at("r_n").get<double>();
    if (seed_out) *seed_out = header.at("seed").get<std::uint64_t>();
    net.neurons.assign(n, NeuronParams{0.0, 1.0, Vec::Zero(net.dim)});
    std::vector<double> flat(net.param_count());
    in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * 8));
    if (!in) throw NumericalError("load_checkpoint: truncated payload in " + path.string());
    net.from_flat(flat);
    return net;
}

void NetworkField::gradient(std::span<const double> x, std::span<double> out) const {
    const Vec g = spatial_grad(*net_, *act_, x);
    for (int k = 0; k < net_->dim; ++k) out[k] = g[k];
}

NodeField NetworkField::sample(const QuadratureRule& rule, bool with_grads) const {
    const long m = rule.size();
    const int d = rule.dim();
    NodeField f;
    f.values = Vec::Zero(m);
    if (with_grads) f.grads = Mat::Zero(m, d);
    const double scale = net_->scale();
    for (const auto& p : net_->neurons) {
        const auto cn = detail::make_clipped(p, net_->clip_radius);
        detail::for_each_support_node(
            rule, cn, *act_, with_grads, false,
            [&](long j, const double*, double w, const double* g, const double*) {
                f.values[j] += scale * cn.beta * w;
                if (with_grads) {
                    for (int k = 0; k < d; ++k) f.grads(j, k) += scale * cn.beta * cn.alpha * g[k];
                }
            });
    }
    return f;
}

}  // namespace dgflow
