#include "rqe/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace rqe {

namespace fs = std::filesystem;
using nlohmann::json;

// ── kind names ───────────────────────────────────────────────────────────────

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Certify: return "certify";
        case ExperimentKind::NormalFormDynamics: return "normal_form_dynamics";
        case ExperimentKind::ValueIteration: return "value_iteration";
        case ExperimentKind::TwoTimescale: return "two_timescale";
        case ExperimentKind::Maac: return "maac";
        case ExperimentKind::LipschitzProbe: return "lipschitz_probe";
    }
    throw std::logic_error("to_string: unhandled ExperimentKind");
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::Certify, ExperimentKind::NormalFormDynamics,
          ExperimentKind::ValueIteration, ExperimentKind::TwoTimescale,
          ExperimentKind::Maac, ExperimentKind::LipschitzProbe}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown experiment kind '" + name + "'");
}

// ── small numeric helpers ────────────────────────────────────────────────────

std::string format_sig17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0,1]");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[hi] - x[lo]);
}

double interquartile_range(const std::vector<double>& x) {
    return quantile(x, 0.75) - quantile(x, 0.25);
}

TailAverage tail_moving_average(const std::vector<double>& x, int window) {
    if (x.empty()) throw std::invalid_argument("tail_moving_average: empty series");
    if (window < 1) throw std::invalid_argument("tail_moving_average: window must be ≥ 1");
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(window),
                                                   x.size());
    double sum = 0.0;
    for (std::size_t k = x.size() - take; k < x.size(); ++k) sum += x[k];
    return TailAverage{sum / static_cast<double>(take),
                       take < static_cast<std::size_t>(window)};
}

// ── CSV I/O ──────────────────────────────────────────────────────────────────

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) return static_cast<int>(c);
    }
    return -1;
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw std::invalid_argument("CsvTable: no column named '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[static_cast<std::size_t>(c)]);
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    CsvTable table;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (line_no == 1) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw std::runtime_error("read_csv: " + path + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(table.header.size()) +
                                     " cells, found " + std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size(),
                                std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].empty()) continue;
            try {
                std::size_t pos = 0;
                double v = std::stod(cells[c], &pos);
                if (pos == cells[c].size()) row[c] = v;
            } catch (const std::exception&) {
                // Non-numeric cell (labels such as mode) stays NaN.
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) {
        throw std::runtime_error("read_csv: " + path + ":1: missing header row");
    }
    return table;
}

// ── configuration ────────────────────────────────────────────────────────────

namespace {

NuKind nu_from_string(const std::string& s) {
    if (s == "log_barrier") return NuKind::LogBarrier;
    if (s == "negative_entropy") return NuKind::NegativeEntropy;
    throw ConfigError("unknown nu regularizer '" + s + "'");
}

std::string nu_to_string(NuKind k) {
    return k == NuKind::LogBarrier ? "log_barrier" : "negative_entropy";
}

DKind d_from_string(const std::string& s) {
    if (s == "kl") return DKind::KL;
    if (s == "reverse_kl") return DKind::ReverseKL;
    throw ConfigError("unknown divergence '" + s + "'");
}

std::string d_to_string(DKind k) { return k == DKind::KL ? "kl" : "reverse_kl"; }

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "kind",           "environment",        "gamma",
        "n_states",       "n_actions",          "env_seed",
        "tau",            "eps",                "nu",
        "d",              "lambda",             "risk_neutral",
        "schedule",       "eta",                "tol",
        "max_iter",
        "n_iter",         "vi_tol",             "max_sweeps",
        "samples_per_update", "n_episodes",     "maac_mode",
        "oracle",         "delta",              "n_trials",
        "n_samples",      "tau_list",           "risk_neutral_baseline",
        "seeds",          "out_dir",            "n_threads",
        "emit_plot_script"};
    return keys;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    // A manifest wraps the configuration; accept it directly for re-runs.
    if (j.is_object() && j.contains("config") && j.contains("library_version")) {
        j = j.at("config");
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    for (const auto& item : j.items()) {
        const auto& keys = known_keys();
        if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
            throw ConfigError("unknown config key '" + item.key() + "'");
        }
    }

    ExperimentConfig cfg;
    try {
        if (j.contains("kind")) {
            cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
            cfg.kind_specified = true;
        }
        if (j.contains("environment")) cfg.environment = j.at("environment");
        if (j.contains("gamma")) cfg.gamma = j.at("gamma");
        if (j.contains("n_states")) cfg.n_states = j.at("n_states");
        if (j.contains("n_actions")) {
            cfg.n_actions = {j.at("n_actions").at(0).get<int>(),
                             j.at("n_actions").at(1).get<int>()};
        }
        if (j.contains("env_seed")) cfg.env_seed = j.at("env_seed").get<std::uint64_t>();
        if (j.contains("tau")) {
            cfg.profile.tau = {j.at("tau").at(0).get<double>(),
                               j.at("tau").at(1).get<double>()};
        }
        if (j.contains("eps")) {
            cfg.profile.eps = {j.at("eps").at(0).get<double>(),
                               j.at("eps").at(1).get<double>()};
        }
        if (j.contains("nu")) cfg.profile.kind.nu = nu_from_string(j.at("nu"));
        if (j.contains("d")) cfg.profile.kind.d = d_from_string(j.at("d"));
        if (j.contains("lambda")) {
            cfg.profile.lambda = {j.at("lambda").at(0).get<double>(),
                                  j.at("lambda").at(1).get<double>()};
            cfg.auto_lambda = false;
        }
        if (j.contains("risk_neutral")) cfg.risk_neutral = j.at("risk_neutral");
        if (j.contains("schedule")) {
            const json& s = j.at("schedule");
            for (const auto& item : s.items()) {
                if (item.key() != "kind" && item.key() != "alpha" &&
                    item.key() != "beta" && item.key() != "h") {
                    throw ConfigError("unknown schedule key '" + item.key() + "'");
                }
            }
            if (s.contains("kind")) {
                const std::string k = s.at("kind");
                if (k == "constant") cfg.sched.kind = StepSchedule::Kind::Constant;
                else if (k == "diminishing") cfg.sched.kind = StepSchedule::Kind::Diminishing;
                else throw ConfigError("unknown schedule kind '" + k + "'");
            }
            if (s.contains("alpha")) cfg.sched.alpha = s.at("alpha");
            if (s.contains("beta")) cfg.sched.beta = s.at("beta");
            if (s.contains("h")) cfg.sched.h = s.at("h").get<long>();
        }
        if (j.contains("eta")) cfg.eta = j.at("eta");
        if (j.contains("tol")) cfg.tol = j.at("tol");
        if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<long>();
        if (j.contains("n_iter")) cfg.n_iter = j.at("n_iter").get<long>();
        if (j.contains("vi_tol")) cfg.vi_tol = j.at("vi_tol");
        if (j.contains("max_sweeps")) cfg.max_sweeps = j.at("max_sweeps").get<long>();
        if (j.contains("samples_per_update")) {
            cfg.samples_per_update = j.at("samples_per_update");
        }
        if (j.contains("n_episodes")) cfg.n_episodes = j.at("n_episodes").get<long>();
        if (j.contains("maac_mode")) cfg.maac_mode = j.at("maac_mode");
        if (j.contains("oracle")) cfg.oracle = j.at("oracle");
        if (j.contains("delta")) cfg.delta = j.at("delta");
        if (j.contains("n_trials")) cfg.n_trials = j.at("n_trials");
        if (j.contains("n_samples")) cfg.n_samples = j.at("n_samples");
        if (j.contains("tau_list")) {
            cfg.tau_list = j.at("tau_list").get<std::vector<double>>();
        }
        if (j.contains("risk_neutral_baseline")) {
            cfg.risk_neutral_baseline = j.at("risk_neutral_baseline");
        }
        if (j.contains("seeds")) {
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir");
        if (j.contains("n_threads")) cfg.n_threads = j.at("n_threads");
        if (j.contains("emit_plot_script")) cfg.emit_plot_script = j.at("emit_plot_script");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return from_json_text(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string ExperimentConfig::resolved_json() const {
    json j;
    j["kind"] = to_string(kind);
    j["environment"] = environment;
    j["gamma"] = gamma;
    j["n_states"] = n_states;
    j["n_actions"] = {n_actions[0], n_actions[1]};
    j["env_seed"] = env_seed;
    j["tau"] = {profile.tau[0], profile.tau[1]};
    j["eps"] = {profile.eps[0], profile.eps[1]};
    j["nu"] = nu_to_string(profile.kind.nu);
    j["d"] = d_to_string(profile.kind.d);
    if (!auto_lambda) j["lambda"] = {profile.lambda.lambda1, profile.lambda.lambda2};
    j["risk_neutral"] = risk_neutral;
    j["schedule"] = {
        {"kind", sched.kind == StepSchedule::Kind::Constant ? "constant" : "diminishing"},
        {"alpha", sched.alpha},
        {"beta", sched.beta},
        {"h", sched.h}};
    j["eta"] = eta;
    j["tol"] = tol;
    j["max_iter"] = max_iter;
    j["n_iter"] = n_iter;
    j["vi_tol"] = vi_tol;
    j["max_sweeps"] = max_sweeps;
    j["samples_per_update"] = samples_per_update;
    j["n_episodes"] = n_episodes;
    j["maac_mode"] = maac_mode;
    j["oracle"] = oracle;
    j["delta"] = delta;
    j["n_trials"] = n_trials;
    j["n_samples"] = n_samples;
    j["tau_list"] = tau_list;
    j["risk_neutral_baseline"] = risk_neutral_baseline;
    j["seeds"] = seeds;
    j["out_dir"] = out_dir;
    j["n_threads"] = n_threads;
    j["emit_plot_script"] = emit_plot_script;
    return j.dump(2);
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
    if (n_threads < 1) throw ConfigError("n_threads must be at least 1");
    try {
        profile.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("risk profile: ") + e.what());
    }
    if (kind == ExperimentKind::TwoTimescale || kind == ExperimentKind::Maac) {
        try {
            sched.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("schedule: ") + e.what());
        }
    }
    const bool needs_mg = kind == ExperimentKind::ValueIteration ||
                          kind == ExperimentKind::TwoTimescale ||
                          kind == ExperimentKind::Maac;
    if (needs_mg) {
        if (environment != "inspection" && environment != "gridworld" &&
            environment != "random") {
            throw ConfigError("unknown environment '" + environment + "'");
        }
        if (!(gamma >= 0.0) || gamma >= 1.0) throw ConfigError("gamma must lie in [0,1)");
        if (environment == "random" && n_states < 1) {
            throw ConfigError("n_states must be positive");
        }
    }
    if ((kind == ExperimentKind::NormalFormDynamics ||
         kind == ExperimentKind::LipschitzProbe) &&
        environment != "inspection") {
        throw ConfigError("kind '" + to_string(kind) + "' requires environment 'inspection'");
    }
    if (kind == ExperimentKind::Maac) {
        if (maac_mode != "on_policy" && maac_mode != "off_policy") {
            throw ConfigError("maac_mode must be on_policy or off_policy");
        }
        if (samples_per_update < 1) throw ConfigError("samples_per_update must be ≥ 1");
        if (n_episodes < 1) throw ConfigError("n_episodes must be ≥ 1");
    }
    if (kind == ExperimentKind::TwoTimescale && n_iter < 1) {
        throw ConfigError("n_iter must be ≥ 1");
    }
    if (kind == ExperimentKind::ValueIteration &&
        (!(vi_tol > 0.0) || max_sweeps < 1)) {
        throw ConfigError("value_iteration needs vi_tol > 0 and max_sweeps ≥ 1");
    }
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (kind == ExperimentKind::NormalFormDynamics) {
        if (!(tol > 0.0) || max_iter < 1) {
            throw ConfigError("normal_form_dynamics needs tol > 0 and max_iter ≥ 1");
        }
        for (double t : tau_list) {
            if (!(t > 0.0)) throw ConfigError("tau_list entries must be positive");
        }
    }
    if (kind == ExperimentKind::LipschitzProbe &&
        (!(delta >= 1e-6) || n_trials < 1)) {
        throw ConfigError("lipschitz_probe needs delta ≥ 1e-6 and n_trials ≥ 1");
    }
    if (kind == ExperimentKind::Certify &&
        (n_samples < 1 || n_actions[0] < 2 || n_actions[1] < 2)) {
        throw ConfigError("certify needs n_samples ≥ 1 and n_actions ≥ 2");
    }
}

// ── run orchestration ────────────────────────────────────────────────────────

namespace {

struct MetricRow {
    std::string metric;
    std::string scope;
    double value;
};

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string trajectory_header(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Certify:
            return "seed,product,evidence,is_strict,is_strong,mu,min_eigenvalue,"
                   "lambda1,lambda2";
        case ExperimentKind::NormalFormDynamics: return "iter,step_norm,distance";
        case ExperimentKind::ValueIteration: return "sweep,residual";
        case ExperimentKind::TwoTimescale:
            return "iter,alpha_t,beta_t,q_residual,z_distance";
        case ExperimentKind::Maac:
            return "episode,z_distance,q_distance,mean_reward,mode,seed";
        case ExperimentKind::LipschitzProbe:
            return "seed,mu,bound,max_observed_ratio,holds";
    }
    throw std::logic_error("trajectory_header: unhandled kind");
}

/** NaN renders as an empty cell so optional columns stay optional. */
std::string cell(double v) { return std::isnan(v) ? std::string() : format_sig17(v); }

std::string tau_label(double tau) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", tau);
    return std::string("tau") + buf;
}

RiskProfile resolve_lambda(const ExperimentConfig& cfg) {
    RiskProfile profile = cfg.profile;
    if (cfg.auto_lambda) {
        if (closed_form_test(profile)) {
            profile.lambda = WeightVector{1.0, lambda_interval(profile).ratio};
        } else {
            profile.lambda = WeightVector{1.0, 1.0};
        }
    }
    return profile;
}

MarkovGame make_markov_game(const ExperimentConfig& cfg) {
    if (cfg.environment == "inspection") return inspection_mg(cfg.gamma);
    if (cfg.environment == "gridworld") return gridworld_mg(cfg.gamma);
    if (cfg.environment == "random") {
        return random_mg(cfg.n_states, cfg.n_actions, cfg.gamma, cfg.env_seed);
    }
    throw ConfigError("unknown environment '" + cfg.environment + "'");
}

// One worker per seed; returns the files written. All per-seed summary
// numbers are later recovered from these files by summarize_files, so the
// CSVs are the single source of truth.
std::vector<std::string> run_seed(const ExperimentConfig& cfg, const RiskProfile& profile,
                                  const fs::path& out, std::uint64_t seed,
                                  const FixedPointOracle* mg_oracle, const MarkovGame* mg) {
    std::vector<std::string> files;
    const std::string stag = "seed" + std::to_string(seed);

    switch (cfg.kind) {
        case ExperimentKind::Certify: {
            MonotonicityCertificate cert =
                certify(profile, cfg.n_actions, 1e-3, cfg.n_samples, seed);
            const double product = 16.0 * profile.eps[0] * profile.eps[1] *
                                   profile.tau[0] * profile.tau[1];
            std::ostringstream os;
            os << trajectory_header(cfg.kind) << "\n";
            os << seed << ',' << format_sig17(product) << ','
               << (cert.evidence == Evidence::ClosedForm ? "ClosedForm" : "Sampled")
               << ',' << (cert.is_strict ? 1 : 0) << ',' << (cert.is_strong ? 1 : 0)
               << ',' << format_sig17(cert.mu) << ','
               << format_sig17(cert.min_eigenvalue) << ','
               << format_sig17(cert.lambda.lambda1) << ','
               << format_sig17(cert.lambda.lambda2) << "\n";
            const std::string name = "certify_" + stag + ".csv";
            write_text_file(out / name, os.str());
            files.push_back(name);
            break;
        }

        case ExperimentKind::NormalFormDynamics: {
            const PayoffPair R = inspection_game();
            struct Variant {
                std::string label;
                double tau;
                bool risk_neutral;
            };
            std::vector<Variant> variants;
            if (cfg.tau_list.empty()) {
                variants.push_back({tau_label(profile.tau[0]), profile.tau[0], false});
            } else {
                for (double t : cfg.tau_list) variants.push_back({tau_label(t), t, false});
            }
            if (cfg.risk_neutral_baseline || cfg.risk_neutral) {
                variants.push_back({"risk_neutral", profile.tau[0], true});
            }
            for (const Variant& v : variants) {
                RiskProfile p = profile;
                p.tau = {v.tau, v.tau};
                if (cfg.auto_lambda && !v.risk_neutral && closed_form_test(p)) {
                    p.lambda = WeightVector{1.0, lambda_interval(p).ratio};
                }
                SolveOptions so;
                so.eta = cfg.eta;
                so.tol = cfg.tol;
                so.max_iter = cfg.max_iter;
                so.risk_neutral = v.risk_neutral;
                so.record_trajectory = true;
                if (cfg.oracle && !v.risk_neutral) {
                    SolveOptions pre = so;
                    pre.record_trajectory = false;
                    SolveReport ref = solve(R, p, pre);
                    if (ref.converged) so.oracle = ref.z_star;
                }
                SolveReport rep = solve(R, p, so);
                std::ostringstream os;
                os << trajectory_header(cfg.kind) << "\n";
                for (const TrajectoryRow& row : rep.trajectory) {
                    os << row.iteration << ',' << format_sig17(row.step_norm) << ','
                       << cell(row.distance_to_oracle) << "\n";
                }
                const std::string name = "dynamics_" + v.label + "_" + stag + ".csv";
                write_text_file(out / name, os.str());
                files.push_back(name);
            }
            break;
        }

        case ExperimentKind::ValueIteration: {
            ValueIterationOptions vio;
            vio.tol = cfg.vi_tol;
            vio.max_sweeps = cfg.max_sweeps;
            ValueIterationResult vi = value_iteration(*mg, profile, vio);
            std::ostringstream os;
            os << trajectory_header(cfg.kind) << "\n";
            for (std::size_t t = 0; t < vi.residuals.size(); ++t) {
                os << t << ',' << format_sig17(vi.residuals[t]) << "\n";
            }
            const std::string name = "vi_" + stag + ".csv";
            write_text_file(out / name, os.str());
            files.push_back(name);
            break;
        }

        case ExperimentKind::TwoTimescale: {
            TwoTimescaleResult tt = run_two_timescale(*mg, profile, cfg.sched,
                                                      cfg.n_iter, mg_oracle, 1);
            std::ostringstream os;
            os << trajectory_header(cfg.kind) << "\n";
            for (const TwoTimescaleRow& row : tt.rows) {
                os << row.iter << ',' << format_sig17(row.alpha_t) << ','
                   << format_sig17(row.beta_t) << ',' << format_sig17(row.q_residual)
                   << ',' << cell(row.z_distance) << "\n";
            }
            const std::string name = "two_timescale_" + stag + ".csv";
            write_text_file(out / name, os.str());
            files.push_back(name);
            break;
        }

        case ExperimentKind::Maac: {
            MaacConfig mc;
            mc.sched = cfg.sched;
            mc.samples_per_update = cfg.samples_per_update;
            mc.n_episodes = cfg.n_episodes;
            mc.mode = cfg.maac_mode == "off_policy" ? SamplingMode::OffPolicy
                                                    : SamplingMode::OnPolicy;
            if (mc.mode == SamplingMode::OffPolicy) {
                mc.reference = PolicyTable::uniform(*mg);
            }
            mc.seed = seed;
            mc.risk_neutral = cfg.risk_neutral;
            MaacResult res = train(*mg, profile, mc, mg_oracle);
            std::ostringstream os;
            os << trajectory_header(cfg.kind) << "\n";
            for (const MaacRow& row : res.rows) {
                os << row.episode << ',' << cell(row.z_distance) << ','
                   << cell(row.q_distance) << ',' << format_sig17(row.mean_reward)
                   << ',' << cfg.maac_mode << ',' << seed << "\n";
            }
            const std::string name = "maac_" + stag + ".csv";
            write_text_file(out / name, os.str());
            files.push_back(name);
            break;
        }

        case ExperimentKind::LipschitzProbe: {
            const PayoffPair R = inspection_game();
            MonotonicityCertificate cert =
                certify(profile, {R.n1(), R.n2()}, 1e-3, cfg.n_samples, seed);
            if (!(cert.mu > 0.0)) {
                throw std::runtime_error(
                    "lipschitz_probe: certificate has no positive mu for seed " +
                    std::to_string(seed));
            }
            LipschitzProbe probe =
                lipschitz_probe(R, cfg.delta, cfg.n_trials, profile, cert.mu, seed);
            std::ostringstream os;
            os << trajectory_header(cfg.kind) << "\n";
            os << seed << ',' << format_sig17(cert.mu) << ','
               << format_sig17(probe.bound) << ','
               << format_sig17(probe.max_observed_ratio) << ','
               << (probe.holds ? 1 : 0) << "\n";
            const std::string name = "lipschitz_" + stag + ".csv";
            write_text_file(out / name, os.str());
            files.push_back(name);
            break;
        }
    }
    return files;
}

std::string plot_script(const ExperimentConfig& cfg,
                        const std::vector<std::string>& files) {
    std::ostringstream os;
    os << "set datafile separator \",\"\n";
    os << "set key outside\n";
    os << "set xlabel \"iteration\"\n";
    switch (cfg.kind) {
        case ExperimentKind::NormalFormDynamics:
            os << "set logscale y\nset ylabel \"step norm\"\n";
            break;
        case ExperimentKind::ValueIteration:
            os << "set logscale y\nset ylabel \"residual\"\n";
            break;
        case ExperimentKind::TwoTimescale:
            os << "set logscale y\nset ylabel \"distance to fixed point\"\n";
            break;
        case ExperimentKind::Maac:
            os << "set xlabel \"episode\"\nset ylabel \"mean reward\"\n";
            break;
        default:
            break;
    }
    os << "plot \\\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
        int col = 2;
        if (cfg.kind == ExperimentKind::TwoTimescale) col = 5;
        if (cfg.kind == ExperimentKind::Maac) col = 4;
        os << "  \"" << files[i] << "\" skip 1 using 1:" << col << " with lines title \""
           << files[i] << "\"";
        os << (i + 1 < files.size() ? ", \\\n" : "\n");
    }
    return os.str();
}

std::string summary_csv(const std::vector<MetricRow>& metrics) {
    // Cross-seed aggregates appended per metric, preserving first-seen order.
    std::vector<std::string> order;
    for (const MetricRow& m : metrics) {
        if (std::find(order.begin(), order.end(), m.metric) == order.end()) {
            order.push_back(m.metric);
        }
    }
    std::ostringstream os;
    os << "metric,scope,value\n";
    for (const std::string& name : order) {
        std::vector<double> values;
        for (const MetricRow& m : metrics) {
            if (m.metric != name) continue;
            os << m.metric << ',' << m.scope << ',' << format_sig17(m.value) << "\n";
            values.push_back(m.value);
        }
        os << name << ",median," << format_sig17(quantile(values, 0.5)) << "\n";
        os << name << ",iqr," << format_sig17(interquartile_range(values)) << "\n";
    }
    return os.str();
}

std::uint64_t seed_from_filename(const std::string& name) {
    const std::string tag = "_seed";
    const auto pos = name.rfind(tag);
    const auto dot = name.rfind(".csv");
    if (pos == std::string::npos || dot == std::string::npos ||
        dot <= pos + tag.size()) {
        throw std::runtime_error("summarize: cannot parse seed from file name " + name);
    }
    return std::stoull(name.substr(pos + tag.size(), dot - pos - tag.size()));
}

double last_value(const CsvTable& t, const std::string& col, const std::string& file) {
    const int c = t.column(col);
    if (c < 0 || t.rows.empty()) {
        throw std::runtime_error("summarize: " + file + " lacks column '" + col + "'");
    }
    return t.rows.back()[static_cast<std::size_t>(c)];
}

}  // namespace

std::string summarize_files(const ExperimentConfig& cfg, const std::string& out_dir,
                            const std::vector<std::string>& files) {
    std::vector<MetricRow> metrics;
    for (const std::string& name : files) {
        const CsvTable t = read_csv((fs::path(out_dir) / name).string());
        const std::string scope = "seed:" + std::to_string(seed_from_filename(name));
        auto add = [&](const std::string& metric, double v) {
            metrics.push_back({metric, scope, v});
        };
        switch (cfg.kind) {
            case ExperimentKind::Certify:
                add("mu", last_value(t, "mu", name));
                add("min_eigenvalue", last_value(t, "min_eigenvalue", name));
                add("is_strict", last_value(t, "is_strict", name));
                add("is_strong", last_value(t, "is_strong", name));
                break;
            case ExperimentKind::NormalFormDynamics: {
                const std::string prefix = "dynamics_";
                const auto pos = name.rfind("_seed");
                const std::string label = name.substr(prefix.size(), pos - prefix.size());
                // Row t records the displacement of iteration t, so the count
                // is last index + 1; the stopping rule makes convergence
                // recoverable from the final displacement alone.
                add("iterations[" + label + "]", last_value(t, "iter", name) + 1.0);
                add("converged[" + label + "]",
                    last_value(t, "step_norm", name) <= cfg.tol ? 1.0 : 0.0);
                break;
            }
            case ExperimentKind::ValueIteration:
                add("sweeps", last_value(t, "sweep", name) + 1.0);
                add("final_residual", last_value(t, "residual", name));
                break;
            case ExperimentKind::TwoTimescale: {
                add("final_q_residual", last_value(t, "q_residual", name));
                const double zd = last_value(t, "z_distance", name);
                if (!std::isnan(zd)) add("final_z_distance", zd);
                break;
            }
            case ExperimentKind::Maac: {
                const double zd = last_value(t, "z_distance", name);
                const double qd = last_value(t, "q_distance", name);
                if (!std::isnan(zd)) add("final_z_distance", zd);
                if (!std::isnan(qd)) add("final_q_distance", qd);
                add("final_mean_reward", last_value(t, "mean_reward", name));
                const TailAverage ma = tail_moving_average(t.values("mean_reward"), 100);
                add("final_mean_reward_ma100", ma.value);
                add("ma100_clipped", ma.clipped ? 1.0 : 0.0);
                break;
            }
            case ExperimentKind::LipschitzProbe:
                add("mu", last_value(t, "mu", name));
                add("bound", last_value(t, "bound", name));
                add("max_observed_ratio", last_value(t, "max_observed_ratio", name));
                add("holds", last_value(t, "holds", name));
                break;
        }
    }
    return summary_csv(metrics);
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg_in) {
    ExperimentOutcome outcome;
    ExperimentConfig cfg = cfg_in;
    if (const char* env_out = std::getenv("RQE_OUT");
        env_out != nullptr && *env_out != '\0') {
        cfg.out_dir = env_out;
    }

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        outcome.status = 1;
        outcome.message = e.what();
        return outcome;
    }

    const fs::path out(cfg.out_dir);
    try {
        fs::create_directories(out);

        // Resolve the preconditioner before freezing the manifest so a manifest
        // re-run reproduces the exact run even if the resolution rule evolves.
        cfg.profile = resolve_lambda(cfg);
        cfg.auto_lambda = false;

        json manifest;
        manifest["library_version"] = RQE_VERSION;
        manifest["config"] = json::parse(cfg.resolved_json());
        write_text_file(out / "manifest.json", manifest.dump(2));
        outcome.files.push_back("manifest.json");
    } catch (const std::exception& e) {
        outcome.status = 2;
        outcome.message = std::string("cannot prepare output directory: ") + e.what();
        return outcome;
    }

    try {
        // Shared (seed-independent) setup: environment and oracle fixed point.
        MarkovGame mg;
        FixedPointOracle oracle;
        bool has_mg = cfg.kind == ExperimentKind::ValueIteration ||
                      cfg.kind == ExperimentKind::TwoTimescale ||
                      cfg.kind == ExperimentKind::Maac;
        bool has_oracle = false;
        if (has_mg) {
            mg = make_markov_game(cfg);
            if (cfg.oracle && (cfg.kind == ExperimentKind::TwoTimescale ||
                               cfg.kind == ExperimentKind::Maac)) {
                ValueIterationOptions vio;
                vio.tol = cfg.vi_tol;
                vio.max_sweeps = cfg.max_sweeps;
                vio.record_residuals = false;
                vio.n_threads = cfg.n_threads;
                ValueIterationResult vi = value_iteration(mg, cfg.profile, vio);
                oracle = FixedPointOracle{std::move(vi.q), std::move(vi.policy)};
                has_oracle = true;
            }
        }

        std::vector<std::vector<std::string>> per_seed(cfg.seeds.size());
        parallel_for(static_cast<int>(cfg.seeds.size()), cfg.n_threads, [&](int w) {
            per_seed[static_cast<std::size_t>(w)] =
                run_seed(cfg, cfg.profile, out, cfg.seeds[static_cast<std::size_t>(w)],
                         has_oracle ? &oracle : nullptr, has_mg ? &mg : nullptr);
        });

        std::vector<std::string> trajectory_files;
        for (const std::vector<std::string>& art : per_seed) {
            for (const std::string& f : art) {
                outcome.files.push_back(f);
                trajectory_files.push_back(f);
            }
        }

        write_text_file(out / "summary.csv",
                        summarize_files(cfg, cfg.out_dir, trajectory_files));
        outcome.files.push_back("summary.csv");

        if (cfg.emit_plot_script && (cfg.kind == ExperimentKind::NormalFormDynamics ||
                                     cfg.kind == ExperimentKind::ValueIteration ||
                                     cfg.kind == ExperimentKind::TwoTimescale ||
                                     cfg.kind == ExperimentKind::Maac)) {
            write_text_file(out / "plot.gp", plot_script(cfg, trajectory_files));
            outcome.files.push_back("plot.gp");
        }

        std::ostringstream msg;
        msg << to_string(cfg.kind) << ": " << cfg.seeds.size() << " seed(s) -> "
            << cfg.out_dir;
        if (cfg.kind == ExperimentKind::Certify) {
            const double product = 16.0 * cfg.profile.eps[0] * cfg.profile.eps[1] *
                                   cfg.profile.tau[0] * cfg.profile.tau[1];
            msg << "\ncertificate: product 16*eps1*eps2*tau1*tau2 = "
                << format_sig17(product)
                << (closed_form_test(cfg.profile) ? " (ClosedForm)" : " (Sampled)");
        }
        outcome.message = msg.str();
        return outcome;
    } catch (const std::exception& e) {
        outcome.status = 2;
        outcome.message = e.what();
        try {
            write_text_file(out / "FAILED", std::string(e.what()) + "\n");
            outcome.files.push_back("FAILED");
        } catch (const std::exception&) {
            // Nothing more we can do; the failure is already reported.
        }
        return outcome;
    }
}

}  // namespace rqe
