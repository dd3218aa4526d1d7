#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "gridtune/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"gridtune: H2 performance, tuning and delay robustness of inverter-controlled power networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    bool plot = false;
    std::uint64_t seed = 0;
    bool seed_given = false;

    for (const auto& name : gridtune::command_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " command");
        sub->add_option("--config", config_path, "configuration file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_flag("--plot", plot, "also write an SVG plot");
        sub->add_option("--seed", seed, "override analysis.sim.seed")->each([&](const std::string&) {
            seed_given = true;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gridtune::kExitValidation;
    }

    gridtune::CommandOptions opt;
    opt.out_dir = out_dir;
    opt.plot = plot;
    if (seed_given) opt.seed = seed;
    const std::string command = app.get_subcommands().front()->get_name();
    return gridtune::run_cli(command, config_path, opt);
}
