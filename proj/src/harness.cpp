#include "dgflow/harness.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dgflow/csv.hpp"

namespace dgflow {

namespace fs = std::filesystem;

std::shared_ptr<const ScalarField> make_u0(const RunConfig& cfg, const BumpActivation& act) {
    const int d = cfg.network.dim;
    if (cfg.problem.u0_kind == "zero") return std::make_shared<ZeroField>(d);
    std::vector<Vec> centers;
    for (double c : cfg.problem.u0_centers) centers.push_back(Vec::Constant(d, c));
    std::vector<double> widths = cfg.problem.u0_widths;
    std::vector<double> amps = cfg.problem.u0_amplitudes;
    while (widths.size() < centers.size()) widths.push_back(widths.back());
    while (amps.size() < centers.size()) amps.push_back(amps.back());
    if (cfg.problem.u0_kind == "bump") {
        return std::make_shared<BumpField>(act, centers.at(0), widths.at(0), amps.at(0));
    }
    return std::make_shared<BumpSumField>(act, centers, widths, amps);
}

namespace {

std::unique_ptr<ExactSolution> make_exact(const RunConfig& cfg, std::shared_ptr<const ScalarField> u0) {
    // Oracle support box: the initial condition's own support.
    double lo = cfg.problem.u0_centers[0], hi = lo;
    for (std::size_t i = 0; i < cfg.problem.u0_centers.size(); ++i) {
        const double w = cfg.problem.u0_widths[std::min(i, cfg.problem.u0_widths.size() - 1)];
        lo = std::min(lo, cfg.problem.u0_centers[i] - w);
        hi = std::max(hi, cfg.problem.u0_centers[i] + w);
    }
    const Box support = Box::cube(cfg.network.dim, lo, hi);
    if (cfg.problem.operator_name == "heat") {
        return std::make_unique<HeatExact>(std::move(u0), support, cfg.problem.kappa);
    }
    if (cfg.problem.operator_name == "black_scholes") {
        return std::make_unique<BlackScholesExact>(std::move(u0), support, cfg.problem.sigma,
                                                   cfg.problem.rate);
    }
    return nullptr;
}

void write_error_csv(const fs::path& path, const ErrorReport& rep) {
    CsvWriter csv(path);
    csv.header({"k [step] (reference.error_report)", "t_k [time] (reference.error_report)",
                "l2_error [L2 norm] (reference.error_report)",
                "h1_error [H1 norm] (reference.error_report)"});
    for (const auto& row : rep.rows) {
        csv.field(row.k);
        csv.field(row.t);
        csv.field(row.l2_error);
        csv.field(row.h1_error);
        csv.end_row();
    }
}

SolveResult solve_from_config(const RunConfig& cfg, const BumpActivation& act,
                              std::shared_ptr<const ScalarField> u0, const QuadratureRule& rule,
                              const TimeStepConfig& tcfg) {
    const OperatorSpec spec = cfg.make_operator();
    return solve_pde(spec, std::move(u0), rule, tcfg, cfg.network, act, cfg.seed, 0.0,
                     cfg.problem.jump_samples);
}

}  // namespace

int run_solve(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    auto u0 = make_u0(cfg, act);
    const QuadratureRule rule = cfg.make_rule(seed_for(cfg.seed, SeedStage::Quadrature));

    const SolveResult result = solve_from_config(cfg, act, u0, rule, cfg.timestep);

    std::vector<std::string> outputs;
    std::ofstream steps(out_dir / "steps.jsonl");
    for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
        const auto& diag = result.diagnostics[i];
        const std::string ck_name = "checkpoint_" + std::to_string(diag.k) + ".dgck";
        save_checkpoint(out_dir / ck_name, result.checkpoints[i], cfg.seed);
        outputs.push_back(ck_name);
        nlohmann::json rec;
        rec["k"] = diag.k;
        rec["final_loss"] = diag.final_loss;
        rec["grad_norm"] = diag.grad_norm;
        rec["wall_time"] = diag.wall_time;
        rec["checkpoint_path"] = ck_name;
        steps << rec.dump() << "\n";
    }
    outputs.push_back("steps.jsonl");

    if (auto exact = make_exact(cfg, u0)) {
        std::vector<const ScalarField*> fields;
        std::vector<std::unique_ptr<NetworkField>> holders;
        std::vector<double> times;
        const double h = cfg.timestep.h();
        for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
            holders.push_back(std::make_unique<NetworkField>(result.checkpoints[i], act));
            fields.push_back(holders.back().get());
            times.push_back((i + 1) * h);
        }
        const ErrorReport rep = error_report(fields, *exact, rule, times);
        write_error_csv(out_dir / "errors.csv", rep);
        outputs.push_back("errors.csv");
    }

    write_manifest(out_dir / "manifest.json", cfg, "solve", outputs);
    return static_cast<int>(outputs.size()) + 1;
}

int run_flow(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    auto u0 = make_u0(cfg, act);
    const QuadratureRule rule = cfg.make_rule(seed_for(cfg.seed, SeedStage::Quadrature));
    const OperatorSpec spec = cfg.make_operator();

    EnergyContext ctx = make_energy_context(spec, rule, u0, cfg.timestep.h(), 0.0,
                                            cfg.problem.jump_samples,
                                            seed_for(cfg.seed, SeedStage::JumpSamples, 1));
    const NetworkParams init = init_params(cfg.network.n, cfg.network.delta, cfg.resolved_clip(),
                                           cfg.network.dim, seed_for(cfg.seed, SeedStage::NetworkInit, 1));
    const TrainResult tr = train(ctx, init, act, cfg.timestep.flow);

    CsvWriter csv(out_dir / "trace.csv");
    csv.header({"t [flow time] (training.train)", "loss [I^k] (energy.loss)",
                "grad_norm [l2] (energy.loss_grad)", "dt [flow time] (training.train)"});
    for (const auto& e : tr.trace.entries) {
        csv.field(e.t);
        csv.field(e.loss);
        csv.field(e.grad_norm);
        csv.field(e.dt_used);
        csv.end_row();
    }
    write_manifest(out_dir / "manifest.json", cfg, "flow", {"trace.csv"});
    return 2;
}

namespace {

QuadratureRule experiment_grid(const RunConfig& cfg) {
    return QuadratureRule::tensor_grid(cfg.resolved_box(), cfg.experiment.grid_points);
}

}  // namespace

int run_kernel(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    const QuadratureRule grid = experiment_grid(cfg);
    const InitLaw law{cfg.network.dim};
    const KernelEstimate est = empirical_kernel(grid, cfg.experiment.kernel_samples,
                                                seed_for(cfg.seed, SeedStage::Kernel), act, law);

    CsvWriter csv(out_dir / "kernel.csv");
    csv.header({"i [node] (widelimit.empirical_kernel)", "j [node] (widelimit.empirical_kernel)",
                "z [kernel value] (widelimit.empirical_kernel)"});
    for (long i = 0; i < est.Z.rows(); ++i) {
        for (long j = 0; j < est.Z.cols(); ++j) {
            csv.field(i);
            csv.field(j);
            csv.field(est.Z(i, j));
            csv.end_row();
        }
    }
    CsvWriter nodes(out_dir / "kernel_nodes.csv");
    nodes.header({"i [node] (widelimit.empirical_kernel)", "x [coordinate] (quadrature.tensor_grid)"});
    for (long i = 0; i < grid.size(); ++i) {
        nodes.field(i);
        nodes.field(grid.node(i)[0]);
        nodes.end_row();
    }
    write_manifest(out_dir / "manifest.json", cfg, "kernel", {"kernel.csv", "kernel_nodes.csv"});
    return 3;
}

int run_spectra(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    auto u0 = make_u0(cfg, act);
    const QuadratureRule grid = experiment_grid(cfg);
    const OperatorSpec spec = cfg.make_operator();

    EnergyContext ctx = make_energy_context(spec, grid, u0, cfg.timestep.h(), 0.0,
                                            cfg.problem.jump_samples,
                                            seed_for(cfg.seed, SeedStage::JumpSamples, 1));
    const GridContext gctx = make_grid_context(ctx);
    const Vec w_star = grid_minimizer(ctx, gctx);
    const InitLaw law{cfg.network.dim};
    const KernelEstimate est = empirical_kernel(grid, cfg.experiment.kernel_samples,
                                                seed_for(cfg.seed, SeedStage::Kernel), act, law);
    const TtildeOp op = build_Ttilde(est, gctx);
    const SpectralFlow flow(op, Vec::Zero(grid.size()), w_star);

    CsvWriter csv(out_dir / "spectra.csv");
    csv.header({"i [mode] (widelimit.spectral_flow)", "gamma_i [decay rate] (widelimit.spectral_flow)",
                "h0_i [Htilde coefficient] (widelimit.spectral_flow)"});
    for (long i = 0; i < flow.gammas().size(); ++i) {
        csv.field(i);
        csv.field(flow.gammas()[i]);
        csv.field(flow.h0()[i]);
        csv.end_row();
    }
    write_manifest(out_dir / "manifest.json", cfg, "spectra", {"spectra.csv"});
    return 2;
}

int run_converge(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    auto u0 = make_u0(cfg, act);
    const QuadratureRule rule = cfg.make_rule(seed_for(cfg.seed, SeedStage::Quadrature));
    auto exact = make_exact(cfg, u0);
    if (!exact) throw ConfigError("converge: operator has no exact-solution oracle (use heat or black_scholes)");

    std::vector<double> errs, hs;
    for (int K : cfg.experiment.k_list) {
        TimeStepConfig tcfg = cfg.timestep;
        tcfg.K = K;
        const SolveResult result = solve_from_config(cfg, act, u0, rule, tcfg);
        std::vector<const ScalarField*> fields;
        std::vector<std::unique_ptr<NetworkField>> holders;
        std::vector<double> times;
        for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
            holders.push_back(std::make_unique<NetworkField>(result.checkpoints[i], act));
            fields.push_back(holders.back().get());
            times.push_back((i + 1) * tcfg.h());
        }
        const ErrorReport rep = error_report(fields, *exact, rule, times);
        errs.push_back(rep.max_l2);
        hs.push_back(tcfg.h());
    }

    // least-squares slope of log2(err) against log2(h)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int npts = static_cast<int>(errs.size());
    for (int i = 0; i < npts; ++i) {
        const double x = std::log2(hs[i]);
        const double y = std::log2(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double fitted = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);

    CsvWriter csv(out_dir / "rates.csv");
    csv.header({"K [steps] (training.solve_pde)", "h [time] (training.solve_pde)",
                "max_l2_error [L2 norm] (reference.error_report)",
                "pair_rate [log2 ratio] (harness.converge)", "fitted_rate [log2 slope] (harness.converge)"});
    for (int i = 0; i < npts; ++i) {
        csv.field(cfg.experiment.k_list[i]);
        csv.field(hs[i]);
        csv.field(errs[i]);
        if (i == 0) {
            csv.field(std::string(""));
        } else {
            csv.field(std::log2(errs[i - 1] / errs[i]));
        }
        csv.field(fitted);
        csv.end_row();
    }
    write_manifest(out_dir / "manifest.json", cfg, "converge", {"rates.csv"});
    return 2;
}

int run_check_assumptions(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const BumpActivation act(cfg.network.dim);
    const QuadratureRule rule = cfg.make_rule(seed_for(cfg.seed, SeedStage::Quadrature));
    const OperatorSpec spec = cfg.make_operator();

    std::vector<NetworkParams> trials;
    for (int i = 0; i < cfg.experiment.constant_trials; ++i) {
        trials.push_back(init_params(std::max(cfg.network.n, 8), cfg.network.delta, cfg.resolved_clip(),
                                     cfg.network.dim, seed_for(cfg.seed, SeedStage::TrialNetworks, i)));
    }
    const AssumptionConstants con = estimate_constants(spec, trials, act, rule);

    CsvWriter csv(out_dir / "assumptions.csv");
    csv.header({"operator [name] (operators.estimate_constants)",
                "M [continuity] (operators.estimate_constants)",
                "lambda1 [coercivity] (operators.estimate_constants)",
                "lambda2 [L2 shift] (operators.estimate_constants)",
                "appendix_lambda1 [sigma^2/2 + r] (operators.estimate_constants)",
                "lambda1_discrepancy_flag [bool] (operators.estimate_constants)"});
    csv.field(spec.name);
    csv.field(con.M);
    csv.field(con.lambda1);
    csv.field(con.lambda2);
    if (spec.name == "black_scholes") {
        // The appendix states lambda_1 = sigma^2/2 + r; the elementary bound
        // gives min(sigma^2/2, r). We report the empirical value and flag the
        // discrepancy instead of asserting either.
        const double appendix = 0.5 * cfg.problem.sigma * cfg.problem.sigma + cfg.problem.rate;
        csv.field(appendix);
        csv.field(static_cast<long>(con.lambda1 < appendix - 1e-9 ? 1 : 0));
    } else {
        csv.field(std::string(""));
        csv.field(0L);
    }
    csv.end_row();
    write_manifest(out_dir / "manifest.json", cfg, "check-assumptions", {"assumptions.csv"});
    return 2;
}

int run_subcommand(const std::string& name, const RunConfig& cfg, const fs::path& out_dir) {
    if (name == "solve") return run_solve(cfg, out_dir);
    if (name == "flow") return run_flow(cfg, out_dir);
    if (name == "kernel") return run_kernel(cfg, out_dir);
    if (name == "spectra") return run_spectra(cfg, out_dir);
    if (name == "converge") return run_converge(cfg, out_dir);
    if (name == "check-assumptions") return run_check_assumptions(cfg, out_dir);
    throw ConfigError("unknown subcommand: " + name);
}

}  // namespace dgflow
