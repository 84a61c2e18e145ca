#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dgflow/harness.hpp"

namespace {

void report_error(const std::string& kind, const std::string& message) {
    nlohmann::json rec;
    rec["error"] = kind;
    rec["message"] = message;
    std::cerr << rec.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dgflow: deep gradient flow solver for parabolic PDEs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool has_seed = false;

    const std::vector<std::string> names = {"solve", "flow", "kernel", "spectra", "converge",
                                            "check-assumptions"};
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config and DGFLOW_OUT)");
        sub->add_option("--seed", seed_override, "master seed override")->each([&](const std::string&) {
            has_seed = true;
        });
    }

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        dgflow::RunConfig cfg = dgflow::load_config(config_path);
        if (has_seed) cfg.seed = seed_override;
        std::string dir = cfg.output_dir;
        if (const char* env = std::getenv("DGFLOW_OUT")) dir = env;
        if (!out_dir.empty()) dir = out_dir;
        cfg.output_dir = dir;
        dgflow::run_subcommand(sub, cfg, dir);
        return 0;
    } catch (const dgflow::ConfigError& e) {
        report_error("config", e.what());
        return 2;
    } catch (const dgflow::NumericalError& e) {
        report_error("numerical", e.what());
        return 3;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return 3;
    }
}
