#include "fedar/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::string seed;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "config file (key=value lines)");
    cmd->add_option("--out", f.out, "output directory (overrides config)");
    cmd->add_option("--seed", f.seed, "master seed (overrides config)");
    cmd->add_flag("--verbose", f.verbose, "per-cell progress lines");
}

fedar::ExperimentSettings resolve(const CommonFlags& f) {
    fedar::Config cfg;
    if (!f.config.empty())
        cfg = fedar::Config::parse_file(f.config);
    if (!f.out.empty())
        cfg.set("out", f.out);
    if (!f.seed.empty())
        cfg.set("seed", f.seed);
    if (f.verbose)
        cfg.set("verbose", "true");
    return fedar::settings_from_config(cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated appliance recognition from smart-plug power traces"};
    app.require_subcommand(1);

    CommonFlags extract_flags, synth_flags, run_flags, compare_flags;
    std::string trace_dir;

    auto* extract = app.add_subcommand("extract", "turn trace CSVs into a footprint dataset");
    add_common(extract, extract_flags);
    extract->add_option("--traces", trace_dir, "directory of <class>__*.csv traces");

    auto* synth = app.add_subcommand("synth", "generate seeded synthetic traces");
    add_common(synth, synth_flags);

    auto* run = app.add_subcommand("run", "noise sweep: federation per (rho, variant) cell");
    add_common(run, run_flags);

    auto* compare = app.add_subcommand("compare", "iid/non-iid x mean/fedavg table at rho=0");
    add_common(compare, compare_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) {
            auto s = resolve(extract_flags);
            if (!trace_dir.empty())
                s.trace_dir = trace_dir;
            return fedar::cmd_extract(s);
        }
        if (synth->parsed())
            return fedar::cmd_synth(resolve(synth_flags));
        if (run->parsed())
            return fedar::cmd_run(resolve(run_flags));
        return fedar::cmd_compare(resolve(compare_flags));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
