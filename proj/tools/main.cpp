#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mdhw/config.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/scenarios.hpp"

int main(int argc, char** argv) {
    using namespace mdhw;
    CLI::App app{"Moving-domain Helmholtz-Weyl decomposition and time-periodic Galerkin runs"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    long long seed = -1;
    bool strict = false;
    for (const std::string& name : scenario_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "overrides the seed key")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out_dir, "overrides output.dir");
        sub->add_flag("--strict", strict, "reject non-solenoidal input in decompose");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    const std::string scenario = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        std::ifstream in(config_path);
        std::stringstream text;
        text << in.rdbuf();
        cfg = parse_config(text.str(), scenario);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
    } catch (const ValidationError& e) {
        std::cerr << config_path << ": invalid configuration\n";
        for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << config_path << ": " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        const ScenarioOutcome out = run_scenario(cfg, strict);
        for (const auto& f : out.artifacts) std::cout << cfg.output_dir << "/" << f << "\n";
        if (out.status == kExitNoConvergence) std::cerr << scenario << ": NoConvergence (report written)\n";
        if (out.status == kExitChecksFailed) std::cerr << scenario << ": some checks failed, see report.json\n";
        return out.status;
    } catch (const ScenarioFailure& e) {
        std::cerr << scenario << ": " << e.what() << "\n";
        return kExitModuleError;
    } catch (const Error& e) {
        std::cerr << scenario << ": " << e.what() << "\n";
        return kExitModuleError;
    }
}
