#include "dgflow/config.hpp"

#include <cctype>
#include <set>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dgflow/csv.hpp"

namespace dgflow {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

class KeyReader {
public:
    explicit KeyReader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        mark(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }
    double num(const std::string& key, double fallback) {
        mark(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
        }
    }
    long integer(const std::string& key, long fallback) {
        mark(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not an integer: " + it->second);
        }
    }
    bool boolean(const std::string& key, bool fallback) {
        mark(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config: key '" + key + "' is not a boolean: " + it->second);
    }
    std::vector<double> num_list(const std::string& key, std::vector<double> fallback) {
        mark(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        std::vector<double> out;
        for (const auto& tok : split_list(it->second)) out.push_back(std::stod(tok));
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }
    std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
        mark(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        std::vector<int> out;
        for (const auto& tok : split_list(it->second)) out.push_back(std::stoi(tok));
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }

    void check_unknown() const {
        for (const auto& [k, v] : kv_) {
            if (!seen_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
        }
    }

private:
    void mark(const std::string& key) { seen_.insert(key); }
    const std::map<std::string, std::string>& kv_;
    std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
    if (!(network.delta > 0.5 && network.delta < 1.0)) {
        throw ConfigError("config: network.delta = " + std::to_string(network.delta) +
                          " rejected; delta must lie in (1/2, 1)");
    }
    if (network.n < 1) throw ConfigError("config: network.n must be >= 1");
    const double logn = std::log(static_cast<double>(network.n));
    if (network.clip_radius > 0.0 && network.clip_radius > logn + 1e-12) {
        throw ConfigError("config: network.clip_radius violates r_n <= log n");
    }
    if (resolved_clip() <= 1.0) {
        throw ConfigError("config: clip radius must exceed 1 (n too small for r_n = log n)");
    }
    timestep.validate();
    if (quadrature.kind != "tensor" && quadrature.kind != "monte_carlo") {
        throw ConfigError("config: quadrature.kind must be tensor or monte_carlo");
    }
    if (problem.u0_kind != "bump" && problem.u0_kind != "bump_sum" && problem.u0_kind != "zero") {
        throw ConfigError("config: problem.u0 must be bump, bump_sum or zero");
    }
    if (problem.box_lower && problem.box_upper && !(*problem.box_lower < *problem.box_upper)) {
        throw ConfigError("config: problem.box_lower must be below problem.box_upper");
    }
    // h-bound against the catalog lambda_2 (0 for every shipped operator,
    // so this guards future reactive terms).
    const OperatorSpec spec = make_operator();
    if (spec.nominal_lambda2 > 0.0 && !(timestep.h() < 1.0 / (2.0 * spec.nominal_lambda2))) {
        throw ConfigError("config: h >= 1/(2 lambda_2) for operator " + spec.name);
    }
}

OperatorSpec RunConfig::make_operator() const {
    const auto& p = problem;
    if (p.operator_name == "heat") return make_heat(p.kappa, network.dim);
    if (p.operator_name == "black_scholes") return make_black_scholes(p.sigma, p.rate);
    if (p.operator_name == "heston")
        return make_heston(p.rate, p.heston_eta, p.heston_rho, p.heston_kappa_v, p.heston_theta);
    if (p.operator_name == "merton") {
        return make_merton(p.sigma, p.rate, Vec::Constant(network.dim, p.merton_drift), p.merton_lambda);
    }
    if (p.operator_name == "allen_cahn") return make_allen_cahn(p.allen_cahn_epsilon, network.dim);
    throw ConfigError("config: unknown operator '" + p.operator_name + "'");
}

Box RunConfig::resolved_box() const {
    const int d = network.dim;
    if (problem.box_lower && problem.box_upper) {
        return Box::cube(d, *problem.box_lower, *problem.box_upper);
    }
    const double r = resolved_clip();
    const double half = r * (1.0 + r) + 1.0;
    return Box::cube(d, -half, half);
}

QuadratureRule RunConfig::make_rule(std::uint64_t quad_seed) const {
    const Box box = resolved_box();
    if (quadrature.kind == "tensor") return QuadratureRule::tensor_grid(box, quadrature.points_per_axis);
    return QuadratureRule::monte_carlo(box, quadrature.samples, quad_seed);
}

double RunConfig::eta_n() const {
    return std::pow(static_cast<double>(network.n), 2.0 * network.delta - 1.0);
}

RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    const std::string trimmed = trim(text);
    if (!trimmed.empty() && trimmed.front() == '{') {
        const auto manifest = nlohmann::json::parse(trimmed);
        const auto& cfg = manifest.contains("config") ? manifest.at("config") : manifest;
        for (auto it = cfg.begin(); it != cfg.end(); ++it) {
            kv[it.key()] = it.value().is_string() ? it.value().get<std::string>() : it.value().dump();
        }
    } else {
        std::stringstream ss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
            kv[key] = value;
        }
    }

    KeyReader r(kv);
    RunConfig cfg;
    cfg.raw = kv;

    cfg.problem.operator_name = r.str("problem.operator", "heat");
    cfg.problem.kappa = r.num("problem.kappa", 1.0);
    cfg.problem.sigma = r.num("problem.sigma", 0.4);
    cfg.problem.rate = r.num("problem.rate", 0.05);
    cfg.problem.heston_eta = r.num("problem.heston_eta", 0.3);
    cfg.problem.heston_rho = r.num("problem.heston_rho", -0.5);
    cfg.problem.heston_kappa_v = r.num("problem.heston_kappa_v", 1.0);
    cfg.problem.heston_theta = r.num("problem.heston_theta", 0.2);
    cfg.problem.merton_lambda = r.num("problem.merton_lambda", 0.5);
    cfg.problem.merton_drift = r.num("problem.merton_drift", 0.0);
    cfg.problem.allen_cahn_epsilon = r.num("problem.allen_cahn_epsilon", 1.0);
    cfg.problem.jump_samples = r.integer("problem.jump_samples", 2000);
    cfg.problem.u0_kind = r.str("problem.u0", "bump");
    cfg.problem.u0_centers = r.num_list("problem.u0_centers", {0.0});
    cfg.problem.u0_widths = r.num_list("problem.u0_widths", {1.0});
    cfg.problem.u0_amplitudes = r.num_list("problem.u0_amplitudes", {1.0});
    if (r.has("problem.box_lower")) cfg.problem.box_lower = r.num("problem.box_lower", 0.0);
    if (r.has("problem.box_upper")) cfg.problem.box_upper = r.num("problem.box_upper", 0.0);

    cfg.network.n = static_cast<int>(r.integer("network.n", 256));
    cfg.network.delta = r.num("network.delta", 0.75);
    cfg.network.clip_radius = r.num("network.clip_radius", 0.0);
    cfg.network.dim = static_cast<int>(r.integer("network.dim", 1));

    cfg.quadrature.kind = r.str("quadrature.kind", "tensor");
    cfg.quadrature.points_per_axis = static_cast<int>(r.integer("quadrature.points_per_axis", 512));
    cfg.quadrature.samples = r.integer("quadrature.samples", 100000);

    cfg.timestep.T = r.num("timestep.T", 0.1);
    cfg.timestep.K = static_cast<int>(r.integer("timestep.K", 4));
    cfg.timestep.warm_start = r.boolean("timestep.warm_start", false);
    cfg.timestep.flow.dt = r.num("flow.dt", 0.05);
    cfg.timestep.flow.t_end = r.num("flow.t_end", 500.0);
    cfg.timestep.flow.grad_tol = r.num("flow.grad_tol", 1e-6);
    cfg.timestep.flow.backoff = r.num("flow.backoff", 0.5);
    cfg.timestep.flow.max_backoffs = static_cast<int>(r.integer("flow.max_backoffs", 60));
    cfg.timestep.flow.record_every = static_cast<int>(r.integer("flow.record_every", 25));
    cfg.timestep.flow.max_steps = r.integer("flow.max_steps", 2000000);
    const std::string policy = r.str("flow.policy", "adaptive");
    if (policy == "adaptive") {
        cfg.timestep.flow.policy = StepPolicy::Adaptive;
    } else if (policy == "fixed") {
        cfg.timestep.flow.policy = StepPolicy::Fixed;
    } else {
        throw ConfigError("config: flow.policy must be adaptive or fixed");
    }

    cfg.experiment.n_list = r.int_list("experiment.n_list", {64, 256, 1024});
    cfg.experiment.t_probe = r.num_list("experiment.t_probe", {0.0, 0.5, 1.0, 2.0});
    cfg.experiment.trials = static_cast<int>(r.integer("experiment.trials", 5));
    cfg.experiment.k_list = r.int_list("experiment.k_list", {4, 8, 16});
    cfg.experiment.kernel_samples = r.integer("experiment.kernel_samples", 100000);
    cfg.experiment.grid_points = static_cast<int>(r.integer("experiment.grid_points", 32));
    cfg.experiment.compare_dt = r.num("experiment.compare_dt", 0.02);
    cfg.experiment.constant_trials = static_cast<int>(r.integer("experiment.constant_trials", 60));

    cfg.output_dir = r.str("output.dir", "out");
    cfg.seed = static_cast<std::uint64_t>(r.integer("seed", 12345));

    r.check_unknown();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg, const std::string& subcommand,
                    const std::vector<std::string>& outputs) {
    nlohmann::json m;
    m["tool"] = "dgflow";
    m["version"] = "0.1.0";
    m["subcommand"] = subcommand;

    nlohmann::json config;
    // Canonical resolved values: a rerun from this manifest sees exactly the
    // same configuration even if the original file relied on defaults.
    config["problem.operator"] = cfg.problem.operator_name;
    config["problem.kappa"] = format_double(cfg.problem.kappa);
    config["problem.sigma"] = format_double(cfg.problem.sigma);
    config["problem.rate"] = format_double(cfg.problem.rate);
    config["problem.heston_eta"] = format_double(cfg.problem.heston_eta);
    config["problem.heston_rho"] = format_double(cfg.problem.heston_rho);
    config["problem.heston_kappa_v"] = format_double(cfg.problem.heston_kappa_v);
    config["problem.heston_theta"] = format_double(cfg.problem.heston_theta);
    config["problem.merton_lambda"] = format_double(cfg.problem.merton_lambda);
    config["problem.merton_drift"] = format_double(cfg.problem.merton_drift);
    config["problem.allen_cahn_epsilon"] = format_double(cfg.problem.allen_cahn_epsilon);
    config["problem.jump_samples"] = std::to_string(cfg.problem.jump_samples);
    config["problem.u0"] = cfg.problem.u0_kind;
    auto join = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, double>) {
                s += format_double(v[i]);
            } else {
                s += std::to_string(v[i]);
            }
        }
        return s;
    };
    config["problem.u0_centers"] = join(cfg.problem.u0_centers);
    config["problem.u0_widths"] = join(cfg.problem.u0_widths);
    config["problem.u0_amplitudes"] = join(cfg.problem.u0_amplitudes);
    const Box box = cfg.resolved_box();
    config["problem.box_lower"] = format_double(box.lower[0]);
    config["problem.box_upper"] = format_double(box.upper[0]);
    config["network.n"] = std::to_string(cfg.network.n);
    config["network.delta"] = format_double(cfg.network.delta);
    config["network.clip_radius"] = format_double(cfg.resolved_clip());
    config["network.dim"] = std::to_string(cfg.network.dim);
    config["quadrature.kind"] = cfg.quadrature.kind;
    config["quadrature.points_per_axis"] = std::to_string(cfg.quadrature.points_per_axis);
    config["quadrature.samples"] = std::to_string(cfg.quadrature.samples);
    config["timestep.T"] = format_double(cfg.timestep.T);
    config["timestep.K"] = std::to_string(cfg.timestep.K);
    config["timestep.warm_start"] = cfg.timestep.warm_start ? "true" : "false";
    config["flow.dt"] = format_double(cfg.timestep.flow.dt);
    config["flow.t_end"] = format_double(cfg.timestep.flow.t_end);
    config["flow.grad_tol"] = format_double(cfg.timestep.flow.grad_tol);
    config["flow.backoff"] = format_double(cfg.timestep.flow.backoff);
    config["flow.max_backoffs"] = std::to_string(cfg.timestep.flow.max_backoffs);
    config["flow.record_every"] = std::to_string(cfg.timestep.flow.record_every);
    config["flow.max_steps"] = std::to_string(cfg.timestep.flow.max_steps);
    config["flow.policy"] = cfg.timestep.flow.policy == StepPolicy::Adaptive ? "adaptive" : "fixed";
    config["experiment.n_list"] = join(cfg.experiment.n_list);
    config["experiment.t_probe"] = join(cfg.experiment.t_probe);
    config["experiment.trials"] = std::to_string(cfg.experiment.trials);
    config["experiment.k_list"] = join(cfg.experiment.k_list);
    config["experiment.kernel_samples"] = std::to_string(cfg.experiment.kernel_samples);
    config["experiment.grid_points"] = std::to_string(cfg.experiment.grid_points);
    config["experiment.compare_dt"] = format_double(cfg.experiment.compare_dt);
    config["experiment.constant_trials"] = std::to_string(cfg.experiment.constant_trials);
    config["output.dir"] = cfg.output_dir;
    config["seed"] = std::to_string(cfg.seed);
    m["config"] = config;

    nlohmann::json derived;
    derived["h"] = cfg.timestep.h();
    derived["eta_n"] = cfg.eta_n();
    derived["r_n"] = cfg.resolved_clip();
    derived["box"] = {box.lower[0], box.upper[0]};
    m["derived"] = derived;

    nlohmann::json seeds;
    seeds["network_init.k1"] = seed_for(cfg.seed, SeedStage::NetworkInit, 1);
    seeds["quadrature"] = seed_for(cfg.seed, SeedStage::Quadrature);
    seeds["jump_samples.k1"] = seed_for(cfg.seed, SeedStage::JumpSamples, 1);
    seeds["kernel"] = seed_for(cfg.seed, SeedStage::Kernel);
    m["stage_seeds"] = seeds;
    m["outputs"] = outputs;

    std::ofstream out(path);
    if (!out) throw NumericalError("write_manifest: cannot open " + path.string());
    out << m.dump(2) << "\n";
}

}  // namespace dgflow
