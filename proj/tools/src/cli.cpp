#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "stwave/mateq_direct.hpp"
#include "stwave_app/app.hpp"

namespace stwave::app {

int run_cli(int argc, const char* const* argv)
{
    CLI::App cli{"Space-time Petrov-Galerkin solvers for the wave equation"};
    cli.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory, overrides the config");
        sub->add_option("--seed", seed, "random seed, overrides the config");
        sub->add_flag("-v,--verbose", verbose, "debug logging");
    };

    CLI::App* solve = cli.add_subcommand("solve", "solve each refinement and write one CSV row per solve");
    common(solve);

    CLI::App* study = cli.add_subcommand("study", "conditioning, inf-sup and 1D convergence studies");
    std::string study_kind;
    study->add_option("kind", study_kind, "conditioning, infsup or ode1d")
        ->required()
        ->check(CLI::IsMember({"conditioning", "infsup", "ode1d"}));
    common(study);

    CLI::App* compare = cli.add_subcommand("compare", "space-time solver against time stepping");
    std::string compare_kind;
    compare->add_option("kind", compare_kind, "cn")->required()->check(CLI::IsMember({"cn"}));
    common(compare);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        RunConfig cfg = load_config(config_path);
        if (out_dir)
            cfg.output = *out_dir;
        if (seed)
            cfg.seed = *seed;
        RunOutcome out;
        if (solve->parsed())
            out = run_solve(cfg);
        else if (study->parsed())
            out = run_study(cfg, study_kind);
        else
            out = run_compare_cn(cfg);
        if (out.exit_code != kExitOk)
            spdlog::error("{}; partial results in {}", out.message, out.csv.string());
        else
            spdlog::info("wrote {}", out.csv.string());
        return out.exit_code;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfigError;
    } catch (const NumericalError& e) {
        spdlog::error("{}", e.what());
        return kExitSolverFailure;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitIoError;
    }
}

}  // namespace stwave::app
