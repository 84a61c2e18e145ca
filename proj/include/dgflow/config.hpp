#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgflow/common.hpp"
#include "dgflow/operators.hpp"
#include "dgflow/quadrature.hpp"
#include "dgflow/training.hpp"

namespace dgflow {

struct ProblemConfig {
    std::string operator_name = "heat";
    double kappa = 1.0;
    double sigma = 0.4;
    double rate = 0.05;
    double heston_eta = 0.3;
    double heston_rho = -0.5;
    double heston_kappa_v = 1.0;
    double heston_theta = 0.2;
    double merton_lambda = 0.5;
    double merton_drift = 0.0;
    double allen_cahn_epsilon = 1.0;
    long jump_samples = 2000;

    std::string u0_kind = "bump";  // bump | bump_sum | zero
    std::vector<double> u0_centers{0.0};
    std::vector<double> u0_widths{1.0};
    std::vector<double> u0_amplitudes{1.0};

    std::optional<double> box_lower;
    std::optional<double> box_upper;
};

struct QuadratureConfig {
    std::string kind = "tensor";  // tensor | monte_carlo
    int points_per_axis = 512;
    long samples = 100000;
};

struct ExperimentConfig {
    std::vector<int> n_list{64, 256, 1024};
    std::vector<double> t_probe{0.0, 0.5, 1.0, 2.0};
    int trials = 5;
    std::vector<int> k_list{4, 8, 16};
    long kernel_samples = 100000;
    int grid_points = 32;
    double compare_dt = 0.02;
    int constant_trials = 60;
};

struct RunConfig {
    ProblemConfig problem;
    NetworkHyper network;
    QuadratureConfig quadrature;
    TimeStepConfig timestep;
    ExperimentConfig experiment;
    std::string output_dir = "out";
    std::uint64_t seed = 12345;

    // raw key-value view, kept for the manifest
    std::map<std::string, std::string> raw;

    void validate() const;
    OperatorSpec make_operator() const;
    /// Truncation box: explicit bounds when configured, otherwise the
    /// r_n-dependent default [-(r(1+r)+1), r(1+r)+1]^d.
    Box resolved_box() const;
    QuadratureRule make_rule(std::uint64_t quad_seed) const;
    double resolved_clip() const { return network.resolved_clip(network.n); }
    double eta_n() const;
};

/// Flat key-value document (# comments, key = value) or a previously written
/// manifest JSON (detected by a leading '{'); defaults filled, every
/// invariant revalidated.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

/// Resolved config + derived quantities + per-stage seeds + output index.
/// Rerunning a subcommand from its manifest reproduces all CSVs byte-exactly.
void write_manifest(const std::filesystem::path& path, const RunConfig& cfg, const std::string& subcommand,
                    const std::vector<std::string>& outputs);

}  // namespace dgflow
