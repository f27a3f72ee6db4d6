#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "amdp/errors.hpp"
#include "commands.hpp"
#include "log.hpp"

namespace {

void add_common_flags(CLI::App* cmd, amdp::cli::CommonFlags& flags, bool config_required) {
    auto* config = cmd->add_option("--config", flags.config, "JSON experiment config");
    if (config_required) config->required();
    std::uint64_t seed_value = 0;
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&flags](std::uint64_t v) { flags.seed = v; }, "Override the config seed(s)");
    (void)seed_value;
    cmd->add_option_function<std::string>(
        "--out", [&flags](const std::string& v) { flags.out = v; }, "Output directory");
    cmd->add_option("--workers", flags.workers, "Parallel seed replicas")->default_val(1);
    cmd->add_flag("--force", flags.force, "Overwrite existing outputs");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Average-reward policy mirror descent and inverse-RL experiment harness"};
    app.require_subcommand(1);

    amdp::cli::CommonFlags gen_flags, solve_flags, irl_flags, verify_flags;
    auto* gen = app.add_subcommand("gen-env", "Generate a benchmark AMDP as JSON");
    add_common_flags(gen, gen_flags, true);
    auto* solve = app.add_subcommand("solve", "Run the mirror-descent solver over a seed list");
    add_common_flags(solve, solve_flags, true);
    auto* irl = app.add_subcommand("irl", "Run the inverse-RL dual loop");
    add_common_flags(irl, irl_flags, true);
    auto* verify = app.add_subcommand("verify", "Run the invariant battery");
    add_common_flags(verify, verify_flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return amdp::cli::kExitConfig;
    }

    try {
        if (gen->parsed()) return amdp::cli::cmd_gen_env(gen_flags);
        if (solve->parsed()) return amdp::cli::cmd_solve(solve_flags);
        if (irl->parsed()) return amdp::cli::cmd_irl(irl_flags);
        if (verify->parsed()) return amdp::cli::cmd_verify(verify_flags);
    } catch (const amdp::ConfigError& e) {
        amdp::cli::log_error(e.what());
        return amdp::cli::kExitConfig;
    } catch (const amdp::DataError& e) {
        amdp::cli::log_error(e.what());
        return amdp::cli::kExitData;
    } catch (const amdp::Error& e) {
        amdp::cli::log_error(e.what());
        return amdp::cli::kExitSolver;
    } catch (const std::exception& e) {
        amdp::cli::log_error(e.what());
        return amdp::cli::kExitSolver;
    }
    return amdp::cli::kExitConfig;
}
