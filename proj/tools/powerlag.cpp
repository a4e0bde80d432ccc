#include "powerlag/commands.hpp"
#include "powerlag/version.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
    CLI::App app{"powerlag: sample size, power, and bias approximations for matched "
                 "case-control / case-crossover designs with error-prone lagged exposures"};
    app.set_version_flag("--version", std::string("powerlag ") + powerlag::kVersion);
    app.require_subcommand(1);

    powerlag::commands::Options opt;
    app.add_option("--scenario", opt.scenario_path, "Scenario file path")->required(false);
    std::uint64_t seed_value = 0;
    auto *seed_flag = app.add_option("--seed", seed_value, "Master seed override");
    app.add_option("--out", opt.out_dir, "Output directory override");
    app.add_option("--threads", opt.threads, "Worker threads (0 = auto)");

    auto *cmd_samplesize =
        app.add_subcommand("samplesize", "Sample-size table across the configured sweeps");
    auto *cmd_power = app.add_subcommand("power-curve", "Calculated (and empirical) power curve");
    auto *cmd_bias = app.add_subcommand("bias", "Per-lag biased-effect approximations");
    auto *cmd_sim = app.add_subcommand("simulate", "Monte Carlo replicates and summary");
    auto *cmd_validate = app.add_subcommand("validate-config", "Parse and validate the scenario");

    CLI11_PARSE(app, argc, argv);
    if (*seed_flag) {
        opt.seed = seed_value;
    }

    if (cmd_samplesize->parsed()) {
        return powerlag::commands::samplesize(opt, std::cout, std::cerr);
    }
    if (cmd_power->parsed()) {
        return powerlag::commands::power_curve(opt, std::cout, std::cerr);
    }
    if (cmd_bias->parsed()) {
        return powerlag::commands::bias(opt, std::cout, std::cerr);
    }
    if (cmd_sim->parsed()) {
        return powerlag::commands::simulate(opt, std::cout, std::cerr);
    }
    if (cmd_validate->parsed()) {
        return powerlag::commands::validate_config(opt, std::cout, std::cerr);
    }
    std::cerr << "no subcommand\n";
    return 2;
}
