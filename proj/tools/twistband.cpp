#include <cstdio>
#include <exception>

#include "CLI11.hpp"
#include "twistband/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Twisted waveguide threshold and resolvent experiments"};
    std::string config_path, scenario, out;
    int threads = 0;
    long long seed = -1;
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--scenario", scenario, "critical_lengths, virtual_level, lemma31, aux_problem, theorem21, "
                                           "theorem22 or all");
    app.add_option("--out", out, "output directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for randomized checks")->check(CLI::NonNegativeNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        twistband::RunConfig cfg = twistband::parse_config(config_path);
        if (!scenario.empty()) cfg.scenario = twistband::parse_scenario(scenario);
        if (!out.empty()) cfg.out = out;
        if (threads > 0) cfg.threads = threads;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        const twistband::ReportBundle bundle = twistband::run_scenario(cfg);
        twistband::write_bundle(bundle, cfg, cfg.out);
        int failed = 0;
        for (const auto& g : bundle.gates) {
            std::printf("%s %s value=%.6g %s %.6g\n", g.pass ? "PASS" : "FAIL", g.name.c_str(), g.value,
                        g.relation.c_str(), g.threshold);
            failed += g.pass ? 0 : 1;
        }
        std::printf("%zu gates, %d failed; report in %s\n", bundle.gates.size(), failed, cfg.out.c_str());
        return failed == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "twistband: %s\n", e.what());
        return 1;
    }
}
