#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dgflow/config.hpp"
#include "dgflow/reference.hpp"
#include "dgflow/widelimit.hpp"

namespace dgflow {

/// Builds the configured initial condition over the configured activation.
std::shared_ptr<const ScalarField> make_u0(const RunConfig& cfg, const BumpActivation& act);

/// Subcommand drivers. Each writes its artifacts plus manifest.json under
/// out_dir and returns the number of files written. Reruns from the manifest
/// reproduce every CSV byte-exactly.
int run_solve(const RunConfig& cfg, const std::filesystem::path& out_dir);
int run_flow(const RunConfig& cfg, const std::filesystem::path& out_dir);
int run_kernel(const RunConfig& cfg, const std::filesystem::path& out_dir);
int run_spectra(const RunConfig& cfg, const std::filesystem::path& out_dir);
int run_converge(const RunConfig& cfg, const std::filesystem::path& out_dir);
int run_check_assumptions(const RunConfig& cfg, const std::filesystem::path& out_dir);

int run_subcommand(const std::string& name, const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace dgflow
