#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hapfv/config.hpp"
#include "hapfv/io.hpp"
#include "hapfv/weakcheck.hpp"

namespace hapfv {

// Exit code contract shared by every subcommand.
inline constexpr int kExitPass = 0;
inline constexpr int kExitVerdictFail = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRunAbort = 3;

namespace detail {

struct CliOptions {
    std::string config_path;
    std::string out_dir; // overrides output.dir when nonempty
    int threads = 1;
    bool quiet = false;
};

inline void say(const CliOptions& opt, const std::string& msg) {
    if (!opt.quiet) std::fputs((msg + "\n").c_str(), stdout);
}

inline AppConfig load(const CliOptions& opt) {
    AppConfig cfg = load_config(opt.config_path);
    if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
    return cfg;
}

inline int cmd_run(const CliOptions& opt) {
    const AppConfig cfg = load(opt);
    const ScenarioRun run = run_scenario(cfg.scenario);
    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    write_trajectory(dir, run.traj);
    write_diagnostics_csv(dir / "diagnostics.csv", run.series);
    std::vector<std::pair<std::string, std::string>> extra = {
        {"scenario", cfg.scenario.name},
        {"verdict", run.verdict.pass ? "pass" : "fail"},
    };
    for (const std::string& f : run.verdict.failures) extra.emplace_back("failure", f);
    write_run_report(dir / "report.txt", run.traj.report, extra);
    if (run.traj.report.aborted) {
        say(opt, "run aborted: " + run.traj.report.abort_reason);
        return kExitRunAbort;
    }
    say(opt, std::string("verdicts: ") + (run.verdict.pass ? "pass" : "fail"));
    for (const std::string& f : run.verdict.failures) say(opt, "  " + f);
    return run.verdict.pass ? kExitPass : kExitVerdictFail;
}

inline int cmd_study(const CliOptions& opt) {
    const AppConfig cfg = load(opt);
    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    if (cfg.study.kind == "epsilon") {
        if (cfg.study.eps_list.size() < 2)
            throw ConfigError("epsilon study needs study.eps_list with at least two levels");
        const EpsilonStudy st = epsilon_study(cfg.scenario, cfg.study.eps_list,
                                              cfg.study.metric_p, opt.threads);
        write_epsilon_csv(dir / "epsilon_study.csv", st);
        if (st.aborted) {
            say(opt, "study aborted: " + st.note);
            return kExitRunAbort;
        }
        say(opt, "epsilon study: " + std::string(st.pass ? "pass" : "fail") +
                     " (violations = " + std::to_string(st.violations) + ")");
        return st.pass ? kExitPass : kExitVerdictFail;
    }
    if (cfg.study.kind == "refinement") {
        if (cfg.study.levels.size() < 3)
            throw ConfigError("refinement study needs study.levels with at least three levels");
        const RefinementStudy st =
            refinement_study(cfg.scenario, cfg.study.levels, opt.threads, cfg.study.min_order);
        write_refinement_csv(dir / "refinement_study.csv", st);
        if (!st.note.empty() && !st.pass && !st.roundoff && st.errors.empty()) {
            say(opt, "study aborted: " + st.note);
            return kExitRunAbort;
        }
        say(opt, "refinement study: " + std::string(st.pass ? "pass" : "fail") +
                     (st.roundoff ? " (converged to rounding level)"
                                  : " (observed order = " + fmt_g(st.observed_order) + ")"));
        return st.pass ? kExitPass : kExitVerdictFail;
    }
    throw ConfigError("study.kind must be 'epsilon' or 'refinement'");
}

inline int cmd_weakcheck(const CliOptions& opt, const std::string& traj_dir) {
    const AppConfig cfg = load(opt);
    const Scenario& sc = cfg.scenario;
    const Grid grid = build_grid(sc.nx, sc.ny, sc.domain);
    const TensorField D = make_run_tensor(sc, grid);
    const Trajectory traj = load_trajectory(traj_dir, grid);
    const auto library = default_library(sc.domain, sc.params.T, cfg.weakcheck.k, sc.seed);
    const AuditSystem audit =
        cfg.weakcheck.audit == "target" ? AuditSystem::Target : AuditSystem::Generating;
    const WeakCheckResult res = weak_residuals(traj, D, sc.params, library, audit);

    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    write_residuals_csv(dir / "residuals.csv", res, sc.nx);
    const double worst = std::max(res.max_normalized_u, res.max_normalized_w);
    say(opt, "max normalized residual: u = " + fmt_g(res.max_normalized_u) +
                 ", w = " + fmt_g(res.max_normalized_w) +
                 ", threshold = " + fmt_g(cfg.weakcheck.threshold));
    return worst <= cfg.weakcheck.threshold ? kExitPass : kExitVerdictFail;
}

inline int cmd_diagnose(const CliOptions& opt, const std::string& traj_dir) {
    const AppConfig cfg = load(opt);
    const Scenario& sc = cfg.scenario;
    const Grid grid = build_grid(sc.nx, sc.ny, sc.domain);
    const TensorField D = make_run_tensor(sc, grid);
    const Trajectory traj = load_trajectory(traj_dir, grid);

    DiagnosticsMonitor mon(D, sc.params);
    for (const State& s : traj.frames) mon(s, grid);
    const auto series = mon.series();
    const DiagnosticsVerdict v = verdicts(traj, series, sc.params);

    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    write_diagnostics_csv(dir / "diagnostics.csv", series);
    say(opt, std::string("verdicts: ") + (v.pass ? "pass" : "fail"));
    for (const std::string& f : v.failures) say(opt, "  " + f);
    return v.pass ? kExitPass : kExitVerdictFail;
}

inline int cmd_fit_tensor(const CliOptions& opt) {
    const AppConfig cfg = load(opt);
    const Scenario& sc = cfg.scenario;
    const Grid grid = build_grid(sc.nx, sc.ny, sc.domain);
    const TensorField D = make_run_tensor(sc, grid);
    const PsdReport psd = validate_psd(D);
    if (!psd.pass)
        throw ConfigError("tensor is not positive semidefinite: min eigenvalue " +
                          fmt_g(psd.min_eig) + " at (" + fmt_g(psd.where.x) + ", " +
                          fmt_g(psd.where.y) + ")");
    const auto battery = make_default_battery(grid, cfg.fit.fields, sc.seed);
    const DivergenceEstimateFit fit = fit_divergence_estimate(D, sc.beta, battery, grid);

    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    write_fit_csv(dir / "fit.csv", fit);
    say(opt, "fitted constant C = " + fmt_g(fit.constant) + " at beta = " + fmt_g(fit.beta) +
                 " (argmax field: " + fit.argmax + ")");
    return fit.finite ? kExitPass : kExitVerdictFail;
}

} // namespace detail

// Entry point behind main(); returns the process exit code.
inline int cli_main(std::vector<std::string> args) {
    CLI::App app{"finite-volume simulator and verification harness for a degenerate "
                 "anisotropic taxis-diffusion system"};
    app.require_subcommand(1);

    detail::CliOptions opt;
    std::string traj_dir;
    auto add_common = [&](CLI::App* sub, bool needs_traj) {
        sub->add_option("--config", opt.config_path, "key=value config file")->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides output.dir)");
        sub->add_option("--threads", opt.threads, "worker threads for study members");
        sub->add_flag("--quiet", opt.quiet, "suppress progress output");
        if (needs_traj)
            sub->add_option("--trajectory", traj_dir, "directory written by a prior run")
                ->required();
    };
    CLI::App* c_run = app.add_subcommand("run", "integrate a scenario and write a trajectory");
    CLI::App* c_study = app.add_subcommand("study", "multi-run epsilon or refinement study");
    CLI::App* c_weak = app.add_subcommand("weakcheck", "audit a stored trajectory against the "
                                                       "weak-solution identities");
    CLI::App* c_diag = app.add_subcommand("diagnose", "recompute diagnostics for a stored "
                                                      "trajectory");
    CLI::App* c_fit = app.add_subcommand("fit-tensor", "fit the divergence-estimate constant "
                                                       "over a seeded field battery");
    add_common(c_run, false);
    add_common(c_study, false);
    add_common(c_weak, true);
    add_common(c_diag, true);
    add_common(c_fit, false);

    // CLI11 wants argv-style reversed input without the program name.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::puts(app.help().c_str());
            return kExitPass;
        }
        std::fputs((std::string("argument error: ") + e.what() + "\n").c_str(), stderr);
        return kExitConfigError;
    }

    try {
        if (c_run->parsed()) return detail::cmd_run(opt);
        if (c_study->parsed()) return detail::cmd_study(opt);
        if (c_weak->parsed()) return detail::cmd_weakcheck(opt, traj_dir);
        if (c_diag->parsed()) return detail::cmd_diagnose(opt, traj_dir);
        if (c_fit->parsed()) return detail::cmd_fit_tensor(opt);
    } catch (const ConfigError& e) {
        std::fputs((std::string("config error: ") + e.what() + "\n").c_str(), stderr);
        return kExitConfigError;
    } catch (const RunAbort& e) {
        std::fputs((std::string("run abort: ") + e.what() + "\n").c_str(), stderr);
        return kExitRunAbort;
    }
    return kExitConfigError;
}

} // namespace hapfv
