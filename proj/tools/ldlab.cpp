#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ld/harness.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_unconverged = 3;

struct Overrides {
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 0;
    bool dump = false;
    double scale = 0.0;
    bool quiet = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--threads", o.threads, "OpenMP threads")->check(CLI::PositiveNumber);
    sub->add_flag("--dump-fields", o.dump, "write binary field dumps");
    sub->add_option("--resolution-scale", o.scale, "multiply every grid spacing")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", o.quiet, "no progress output");
}

ld::ExperimentConfig build_config(const std::string& mode, const Overrides& o, const CLI::App& sub) {
    std::ifstream f(o.config, std::ios::binary);
    if (!f) throw ld::ConfigError("", "cannot open " + o.config);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error&) {
        // Re-parse through the loader for a line and column.
        ld::load_config(o.config);
        throw;
    }
    if (!j.is_object()) throw ld::ConfigError("", "config must be a JSON object");
    j["mode"] = mode;
    if (sub.count("--out")) j["out"] = o.out;
    if (sub.count("--seed")) j["seed"] = o.seed;
    if (sub.count("--threads")) j["threads"] = o.threads;
    if (o.dump) j["dump_fields"] = true;
    if (sub.count("--resolution-scale")) j["resolution_scale"] = o.scale;
    return ld::parse_config(j);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lawrence-Doniach layered superconductor laboratory"};
    app.require_subcommand(1);
    Overrides o;
    const char* modes[][2] = {{"minimize-ld", "minimize the layered energy"},
                              {"minimize-limit", "minimize the limit functional"},
                              {"recover", "build the recovery sequence state for a smooth field"},
                              {"gamma-sweep", "run the schedule and write sweep.csv"},
                              {"diagnose", "recompute observables from a state dump"},
                              {"approx-check", "mollification and reflection checks"}};
    for (auto& m : modes) add_common(app.add_subcommand(m[0], m[1]), o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    const CLI::App* sub = app.get_subcommands().front();

    ld::ExperimentConfig cfg;
    try {
        cfg = build_config(sub->get_name(), o, *sub);
    } catch (const ld::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }

    ld::Logger log;
    if (!o.quiet) log = [](const std::string& s) { std::cerr << s << std::endl; };
    try {
        ld::RunOutcome r = ld::run_experiment(cfg, log);
        if (!r.converged) {
            std::cerr << "solver did not converge; outputs in " << cfg.out_dir.string() << "\n";
            return exit_unconverged;
        }
    } catch (const ld::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
