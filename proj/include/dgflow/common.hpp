#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dgflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised on malformed or inconsistent run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised on numerical failure: non-finite values, stalled descent,
/// singular systems (CLI exit code 3).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed stage identifiers for seed derivation. Appending new stages at the
// end never perturbs the randomness of existing ones.
enum class SeedStage : std::uint64_t {
    NetworkInit = 1,
    Quadrature = 2,
    JumpSamples = 3,
    Kernel = 4,
    TrialNetworks = 5,
    Experiment = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-stage seed derived from the master seed. `index` distinguishes
/// repeated uses within a stage (time step k, trial number, sweep point).
inline std::uint64_t seed_for(std::uint64_t master, SeedStage stage, std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(master ^ (0x517cc1b727220a95ULL * static_cast<std::uint64_t>(stage)));
    return splitmix64(s ^ (0x2545f4914f6cdd1dULL * (index + 1)));
}

}  // namespace dgflow
