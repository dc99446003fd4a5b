// Experiment front end: one subcommand per experiment kind, configured from a
// JSON file with flag overrides. Exit codes: 0 success, 1 configuration
// error, 2 runtime failure. RQE_OUT in the environment overrides the output
// directory last.

#include "rqe/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"Risk-averse quantal response equilibrium experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    int n_threads = 0;

    std::vector<CLI::App*> subs;
    for (rqe::ExperimentKind kind :
         {rqe::ExperimentKind::Certify, rqe::ExperimentKind::NormalFormDynamics,
          rqe::ExperimentKind::ValueIteration, rqe::ExperimentKind::TwoTimescale,
          rqe::ExperimentKind::Maac, rqe::ExperimentKind::LipschitzProbe}) {
        CLI::App* sub = app.add_subcommand(rqe::to_string(kind),
                                           "run a " + rqe::to_string(kind) + " experiment");
        sub->add_option("--config", config_path, "JSON config or manifest file");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seeds", seeds, "seed list")->delimiter(',');
        sub->add_option("--threads", n_threads, "parallel seed workers");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        rqe::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = rqe::ExperimentConfig::from_json_file(config_path);
        }

        const std::string sub_name = app.get_subcommands().front()->get_name();
        const rqe::ExperimentKind sub_kind = rqe::experiment_kind_from_string(sub_name);
        if (cfg.kind_specified && cfg.kind != sub_kind) {
            // A config written for another kind is almost certainly a mistake.
            throw rqe::ConfigError("config kind '" + rqe::to_string(cfg.kind) +
                                   "' conflicts with subcommand '" + sub_name + "'");
        }
        cfg.kind = sub_kind;
        cfg.kind_specified = true;

        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!seeds.empty()) cfg.seeds = seeds;
        if (n_threads > 0) cfg.n_threads = n_threads;

        rqe::ExperimentOutcome outcome = rqe::run_experiment(cfg);
        if (!outcome.message.empty()) {
            (outcome.status == 0 ? std::cout : std::cerr) << outcome.message << "\n";
        }
        return outcome.status;
    } catch (const rqe::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
