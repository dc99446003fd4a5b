#pragma once

#include "rqe/environments.hpp"
#include "rqe/maac.hpp"
#include "rqe/monotonicity.hpp"
#include "rqe/two_timescale.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rqe {

/** Raised for malformed or inconsistent configuration; maps to exit code 1. */
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind {
    Certify,
    NormalFormDynamics,
    ValueIteration,
    TwoTimescale,
    Maac,
    LipschitzProbe,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

/**
 * Fully resolved run description. Parsed from a JSON text file (or from a
 * previously written manifest); every field has a default so the manifest
 * alone reproduces a run.
 */
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Certify;
    bool kind_specified = false;  ///< true when the parsed document named a kind

    // environment
    std::string environment = "inspection";  ///< inspection | gridworld | random
    double gamma = 0.3;
    int n_states = 3;
    std::array<int, 2> n_actions{2, 2};
    std::uint64_t env_seed = 0;

    // risk profile; lambda resolved from the certificate interval when auto
    RiskProfile profile{};
    bool auto_lambda = true;
    bool risk_neutral = false;

    StepSchedule sched{};

    // iteration controls
    double eta = 0.05;            ///< normal-form solver step size
    double tol = 1e-8;            ///< normal-form solver stopping tolerance
    long max_iter = 100000;       ///< normal-form solver iteration cap
    long n_iter = 10000;          ///< two-timescale iterations
    double vi_tol = 1e-6;         ///< value-iteration residual tolerance
    long max_sweeps = 10000;      ///< value-iteration sweep cap
    int samples_per_update = 64;  ///< MAAC K
    long n_episodes = 1000;       ///< MAAC T
    std::string maac_mode = "on_policy";  ///< on_policy | off_policy
    bool oracle = true;           ///< solve for a fixed-point oracle first
    double delta = 0.01;          ///< lipschitz_probe perturbation magnitude
    int n_trials = 20;            ///< lipschitz_probe perturbations
    int n_samples = 500;          ///< certify eigenvalue samples
    std::vector<double> tau_list; ///< normal_form_dynamics sweep; empty → profile tau
    bool risk_neutral_baseline = true;  ///< add the unregularized dynamics variant

    // run control
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "out";
    int n_threads = 1;
    bool emit_plot_script = true;

    /** Parse a config or manifest document; unknown keys are rejected. */
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);

    /** Every field materialized, suitable for the manifest. */
    std::string resolved_json() const;

    void validate() const;
};

struct ExperimentOutcome {
    int status = 0;  ///< 0 success, 1 config error, 2 runtime failure
    std::string message;
    std::vector<std::string> files;  ///< artifacts written, relative to out_dir
};

/**
 * Execute the configured pipeline: one trajectory CSV per seed (workers run
 * in parallel), then a summary CSV with per-seed finals and cross-seed
 * median/IQR, a gnuplot script, and a manifest.json holding the resolved
 * configuration and library version. On runtime failure partial outputs are
 * kept and a FAILED marker file records the reason.
 */
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/**
 * Recompute per-seed finals, tail moving averages, and cross-seed
 * median/IQR from the trajectory CSVs themselves and render summary.csv.
 * run_experiment calls this on the files it just wrote, so every summary
 * number is recoverable from the raw artifacts; a file that fails to parse
 * raises an error naming the file and line.
 */
std::string summarize_files(const ExperimentConfig& cfg, const std::string& out_dir,
                            const std::vector<std::string>& files);

// ── summary helpers (exposed for reuse and direct testing) ──────────────────

/** %.17g — lossless text round-trip for binary64. */
std::string format_sig17(double v);

/** Linear-interpolation quantile on a copy of x; q in [0,1]. */
double quantile(std::vector<double> x, double q);

/** quantile(0.75) − quantile(0.25). */
double interquartile_range(const std::vector<double>& x);

struct TailAverage {
    double value = 0.0;
    bool clipped = false;  ///< fewer rows than the window
};

/** Mean of the trailing `window` entries, clipped to what exists. */
TailAverage tail_moving_average(const std::vector<double>& x, int window);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;  ///< non-numeric cells parse as NaN

    int column(const std::string& name) const;  ///< −1 when absent
    std::vector<double> values(const std::string& name) const;
};

/** Parse a comma-separated file; malformed rows raise naming file and line. */
CsvTable read_csv(const std::string& path);

}  // namespace rqe
