#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spme/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Stochastic porous media and fast diffusion laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", spme::kVersion);

    spme::RunOptions opt;
    std::string config, out;
    std::size_t paths = 0;
    int threads = 0;
    std::uint64_t seed = 0;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"path", "one stochastic trajectory"},
        {"det", "deterministic trajectory (noise off)"},
        {"rescaled", "direct against rescaled scheme for constant noise"},
        {"ensemble", "Monte Carlo ensemble with extinction statistics"},
        {"converge", "coupled ladder study in lambda, nu or dt"},
        {"gamma", "discrete embedding constant"},
        {"report", "re-analyze stored outputs"},
    };
    bool check = false;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "run configuration (JSON)")->required();
        sub->add_option("--out", out, "output directory (overrides output_dir)");
        sub->add_option("--paths", paths, "number of paths");
        sub->add_option("--threads", threads, "worker threads (fallback: SPME_THREADS)");
        sub->add_option("--seed", seed, "noise seed_base");
        if (name == "report") sub->add_flag("--check", check, "exit 4 unless every check passes");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : spme::exit_config;
    }

    opt.subcommand = app.get_subcommands().front()->get_name();
    const auto* sub = app.get_subcommands().front();
    opt.config_path = config;
    if (!out.empty()) opt.out = out;
    if (sub->count("--paths")) opt.paths = paths;
    if (sub->count("--threads")) opt.threads = threads;
    if (sub->count("--seed")) opt.seed = seed;
    opt.check = check;
    return spme::run_command(opt, std::cout, std::cerr);
}
