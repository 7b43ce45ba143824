#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "novsemi/cli_runner.hpp"
#include "novsemi/errors.hpp"
#include "novsemi/ode_flow.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    std::size_t threads = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Args& a) {
    cmd->add_option("config", a.config, "key=value scenario file")->required();
    cmd->add_option("--out", a.out, "output directory (overrides output_dir)");
    cmd->add_option("--threads", a.threads, "concurrent pipeline runs (overrides threads)");
    cmd->add_option("--override", a.overrides, "extra key=value setting, applied last")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conservative solutions of the two-component Novikov system"};
    app.require_subcommand(1);
    Args args;
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const novsemi::ScenarioConfig&, std::ostream&);
    };
    const Command commands[] = {
        {"simulate", "run the flow and write CSV and trajectory outputs", novsemi::run_simulate},
        {"validate", "oracle, conservation and residual checks", novsemi::run_validate},
        {"semigroup", "identity and composition discrepancies at two resolutions", novsemi::run_semigroup},
        {"continuity", "data-to-solution gaps for shrinking perturbations", novsemi::run_continuity},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        subs.push_back(app.add_subcommand(c.name, c.help));
        add_common(subs.back(), args);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : novsemi::kExitConfig;
    }

    novsemi::ScenarioConfig cfg;
    try {
        cfg = novsemi::load_config(args.config);
        if (!args.out.empty()) cfg.output_dir = args.out;
        if (args.threads) cfg.threads = args.threads;
        for (const auto& o : args.overrides) novsemi::apply_override(cfg, o);
        cfg.validate();
    } catch (const novsemi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return novsemi::kExitConfig;
    }

    for (std::size_t k = 0; k < subs.size(); ++k) {
        if (!subs[k]->parsed()) continue;
        try {
            return commands[k].run(cfg, std::cout);
        } catch (const novsemi::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return novsemi::kExitConfig;
        } catch (const novsemi::ParseError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return novsemi::kExitConfig;
        } catch (const novsemi::MonitorViolation& e) {
            std::cerr << "monitor violation: " << e.what() << '\n';
            return novsemi::kExitMonitor;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 1;
}
