#include "rqe/markov_game.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace rqe {

// ── game container ──────────────────────────────────────────────────────────

void MarkovGame::validate() const {
    if (n_states < 1 || n_actions[0] < 1 || n_actions[1] < 1) {
        throw std::invalid_argument("MarkovGame: n_states and n_actions must be positive");
    }
    if (!(gamma >= 0.0) || gamma >= 1.0) {
        throw std::invalid_argument("MarkovGame: gamma must lie in [0, 1)");
    }
    const long sa = n_pairs();
    if (r1.size() != sa || r2.size() != sa) {
        throw std::invalid_argument("MarkovGame: reward tables have wrong length");
    }
    if (transition.rows() != sa || transition.cols() != n_states) {
        throw std::invalid_argument("MarkovGame: transition matrix has wrong shape");
    }
    if (rho0.size() != n_states) {
        throw std::invalid_argument("MarkovGame: rho0 has wrong length");
    }
    require_finite(r1, "MarkovGame reward r1");
    require_finite(r2, "MarkovGame reward r2");
    require_finite(transition, "MarkovGame transition");
    if (!is_on_simplex(rho0, 0.0, 1e-9)) {
        throw std::invalid_argument("MarkovGame: rho0 is not a distribution");
    }
    for (long row = 0; row < sa; ++row) {
        if (transition.row(row).minCoeff() < -1e-12 ||
            std::abs(transition.row(row).sum() - 1.0) > 1e-9) {
            throw std::invalid_argument("MarkovGame: transition row " +
                                        std::to_string(row) + " is not a distribution");
        }
    }
}

// ── serialization ───────────────────────────────────────────────────────────

std::string to_json_string(const MarkovGame& mg) {
    mg.validate();
    nlohmann::json j;
    j["format"] = "rqe-markov-game";
    j["version"] = 1;
    j["n_states"] = mg.n_states;
    j["n_actions"] = {mg.n_actions[0], mg.n_actions[1]};
    j["gamma"] = mg.gamma;
    j["rho0"] = std::vector<double>(mg.rho0.data(), mg.rho0.data() + mg.rho0.size());

    nlohmann::json reward = nlohmann::json::array();
    nlohmann::json transition = nlohmann::json::array();
    for (int s = 0; s < mg.n_states; ++s) {
        nlohmann::json rs = nlohmann::json::array();
        nlohmann::json ts = nlohmann::json::array();
        for (int a1 = 0; a1 < mg.n_actions[0]; ++a1) {
            nlohmann::json ra = nlohmann::json::array();
            nlohmann::json ta = nlohmann::json::array();
            for (int a2 = 0; a2 < mg.n_actions[1]; ++a2) {
                long k = mg.idx(s, a1, a2);
                ra.push_back({mg.r1(k), mg.r2(k)});
                std::vector<double> row(mg.transition.cols());
                for (int sp = 0; sp < mg.n_states; ++sp) row[sp] = mg.transition(k, sp);
                ta.push_back(row);
            }
            rs.push_back(std::move(ra));
            ts.push_back(std::move(ta));
        }
        reward.push_back(std::move(rs));
        transition.push_back(std::move(ts));
    }
    j["reward"] = std::move(reward);
    j["transition"] = std::move(transition);
    return j.dump(2);
}

MarkovGame markov_game_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("markov_game_from_json: parse error: ") +
                                    e.what());
    }
    MarkovGame mg;
    try {
        if (j.at("format").get<std::string>() != "rqe-markov-game") {
            throw std::invalid_argument("markov_game_from_json: unrecognized format tag");
        }
        if (j.at("version").get<int>() != 1) {
            throw std::invalid_argument("markov_game_from_json: unsupported version");
        }
        mg.n_states = j.at("n_states").get<int>();
        mg.n_actions[0] = j.at("n_actions").at(0).get<int>();
        mg.n_actions[1] = j.at("n_actions").at(1).get<int>();
        mg.gamma = j.at("gamma").get<double>();

        auto rho = j.at("rho0").get<std::vector<double>>();
        mg.rho0 = Eigen::Map<const Vec>(rho.data(), static_cast<long>(rho.size()));

        const long sa = mg.n_pairs();
        mg.r1.resize(sa);
        mg.r2.resize(sa);
        mg.transition.resize(sa, mg.n_states);
        const auto& reward = j.at("reward");
        const auto& transition = j.at("transition");
        for (int s = 0; s < mg.n_states; ++s) {
            for (int a1 = 0; a1 < mg.n_actions[0]; ++a1) {
                for (int a2 = 0; a2 < mg.n_actions[1]; ++a2) {
                    long k = mg.idx(s, a1, a2);
                    const auto& pair = reward.at(s).at(a1).at(a2);
                    mg.r1(k) = pair.at(0).get<double>();
                    mg.r2(k) = pair.at(1).get<double>();
                    const auto& row = transition.at(s).at(a1).at(a2);
                    for (int sp = 0; sp < mg.n_states; ++sp) {
                        mg.transition(k, sp) = row.at(sp).get<double>();
                    }
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("markov_game_from_json: bad document: ") +
                                    e.what());
    }
    mg.validate();
    return mg;
}

// ── policies and Q tables ───────────────────────────────────────────────────

PolicyTable PolicyTable::uniform(const MarkovGame& mg) {
    PolicyTable table;
    table.z.assign(static_cast<std::size_t>(mg.n_states),
                   JointProfile::uniform(mg.n_actions[0], mg.n_actions[1]));
    return table;
}

double PolicyTable::distance(const PolicyTable& other) const {
    if (z.size() != other.z.size()) {
        throw std::invalid_argument("PolicyTable::distance: state counts differ");
    }
    double d = 0.0;
    for (std::size_t s = 0; s < z.size(); ++s) {
        d = std::max(d, z[s].distance(other.z[s]));
    }
    return d;
}

PayoffPair stage_game(const QPair& q, const MarkovGame& mg, int s) {
    if (s < 0 || s >= mg.n_states) {
        throw std::invalid_argument("stage_game: state out of range");
    }
    PayoffPair R;
    R.R1.resize(mg.n_actions[0], mg.n_actions[1]);
    R.R2.resize(mg.n_actions[0], mg.n_actions[1]);
    for (int a1 = 0; a1 < mg.n_actions[0]; ++a1) {
        for (int a2 = 0; a2 < mg.n_actions[1]; ++a2) {
            long k = mg.idx(s, a1, a2);
            R.R1(a1, a2) = -q.q1(k);
            R.R2(a1, a2) = -q.q2(k);
        }
    }
    return R;
}

Mat stage_values(const QPair& q, const PolicyTable& policy, const MarkovGame& mg,
                 const RiskProfile& profile) {
    if (static_cast<int>(policy.z.size()) != mg.n_states) {
        throw std::invalid_argument("stage_values: policy table has wrong state count");
    }
    Mat v(mg.n_states, 2);
    for (int s = 0; s < mg.n_states; ++s) {
        PayoffPair R = stage_game(q, mg, s);
        v(s, 0) = objective_J(0, policy.z[s], R, profile);
        v(s, 1) = objective_J(1, policy.z[s], R, profile);
    }
    return v;
}

// ── Bellman operators ───────────────────────────────────────────────────────

QPair bellman_evaluate(const QPair& q, const PolicyTable& policy, const MarkovGame& mg,
                       const RiskProfile& profile) {
    Mat v = stage_values(q, policy, mg, profile);
    QPair out;
    out.q1 = -mg.r1 + mg.gamma * (mg.transition * v.col(0));
    out.q2 = -mg.r2 + mg.gamma * (mg.transition * v.col(1));
    return out;
}

BellmanResult bellman_optimality(const QPair& q, const MarkovGame& mg,
                                 const RiskProfile& profile, double stage_tol,
                                 const PolicyTable* warm, int n_threads) {
    if (warm != nullptr && static_cast<int>(warm->z.size()) != mg.n_states) {
        throw std::invalid_argument("bellman_optimality: warm table has wrong state count");
    }
    BellmanResult result;
    result.policy.z.resize(static_cast<std::size_t>(mg.n_states));
    parallel_for(mg.n_states, n_threads, [&](int s) {
        PayoffPair R = stage_game(q, mg, s);
        SolveOptions so;
        so.tol = stage_tol;
        so.max_iter = 200000;
        if (warm != nullptr) so.z0 = warm->z[s];
        // Large |Q| makes the stage game payoff-dominated, which defeats the
        // plain iteration; solve_robust falls back to best-response sweeps
        // and extragradient for exactly that regime.
        SolveReport rep = solve_robust(R, profile, so);
        if (!rep.converged) {
            throw std::runtime_error("bellman_optimality: stage solve at state " +
                                     std::to_string(s) + " stalled at step norm " +
                                     std::to_string(rep.final_step_norm));
        }
        result.policy.z[static_cast<std::size_t>(s)] = rep.z_star;
    });
    result.q = bellman_evaluate(q, result.policy, mg, profile);
    return result;
}

ValueIterationResult value_iteration(const MarkovGame& mg, const RiskProfile& profile,
                                     const ValueIterationOptions& opt) {
    mg.validate();
    profile.validate();
    opt.schedule.validate();
    if (!(opt.tol > 0.0)) {
        throw std::invalid_argument("value_iteration: tol must be positive");
    }
    const double stage_tol =
        opt.stage_tol > 0.0 ? opt.stage_tol : std::max(opt.tol * 0.1, 1e-10);

    ValueIterationResult result;
    QPair q = QPair::zeros(mg);
    PolicyTable warm = PolicyTable::uniform(mg);
    bool converged = false;
    for (long t = 0; t < opt.max_sweeps; ++t) {
        BellmanResult br = bellman_optimality(q, mg, profile, stage_tol, &warm,
                                              opt.n_threads);
        const double alpha = opt.schedule.alpha_at(t);
        QPair next{(1.0 - alpha) * q.q1 + alpha * br.q.q1,
                   (1.0 - alpha) * q.q2 + alpha * br.q.q2};
        const double residual = next.distance_max(q);
        warm = std::move(br.policy);
        q = std::move(next);
        result.sweeps = t + 1;
        result.final_residual = residual;
        if (opt.record_residuals) result.residuals.push_back(residual);
        if (residual <= opt.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw std::runtime_error("value_iteration: no convergence after " +
                                 std::to_string(opt.max_sweeps) +
                                 " sweeps; last residual " +
                                 std::to_string(result.final_residual));
    }
    // Re-equilibrate once so the returned policy matches the returned tables.
    BellmanResult final_br = bellman_optimality(q, mg, profile, stage_tol, &warm,
                                                opt.n_threads);
    result.q = std::move(q);
    result.policy = std::move(final_br.policy);
    return result;
}

// ── fixed-point envelopes ───────────────────────────────────────────────────

QBounds q_bounds(const MarkovGame& mg, const RiskProfile& profile, double floor) {
    profile.validate();
    if (!(floor > 0.0)) {
        throw std::invalid_argument("q_bounds: floor must be positive");
    }
    const int max_n = std::max(mg.n_actions[0], mg.n_actions[1]);
    if (floor * max_n >= 1.0) {
        throw std::invalid_argument("q_bounds: floor leaves the simplex empty");
    }

    QBounds b;
    for (int i = 0; i < 2; ++i) {
        const int n_own = mg.n_actions[i];
        const int n_opp = mg.n_actions[1 - i];
        const double pmax_own = 1.0 - (n_own - 1) * floor;
        const double pmax_opp = 1.0 - (n_opp - 1) * floor;

        double l_nu, nu_min;
        if (profile.kind.nu == NuKind::LogBarrier) {
            l_nu = std::sqrt(static_cast<double>(n_own)) / floor;
            nu_min = n_own * std::log(static_cast<double>(n_own));
        } else {  // NegativeEntropy: |ν| is the Shannon entropy
            double g = std::max(std::abs(std::log(floor) + 1.0),
                                std::abs(std::log(pmax_own) + 1.0));
            l_nu = std::sqrt(static_cast<double>(n_own)) * g;
            nu_min = -pmax_own * std::log(pmax_own) - (n_own - 1) * floor * std::log(floor);
        }

        double l_d;
        if (profile.kind.d == DKind::KL) {
            double g = std::max(std::abs(std::log(floor / pmax_opp) + 1.0),
                                std::abs(std::log(pmax_opp / floor) + 1.0));
            l_d = std::sqrt(static_cast<double>(n_opp)) * g;
        } else {  // ReverseKL: |∇_pD| = π/p ≤ pmax/floor coordinatewise
            l_d = std::sqrt(static_cast<double>(n_opp)) * pmax_opp / floor;
        }

        b.l_nu = std::max(b.l_nu, l_nu);
        b.l_d = std::max(b.l_d, l_d);
        b.nu_min = std::max(b.nu_min, nu_min);
    }

    const double tau_min = std::min(profile.tau[0], profile.tau[1]);
    const double eps_max = std::max(profile.eps[0], profile.eps[1]);
    const double g = mg.gamma;
    const double root2 = std::sqrt(2.0);
    b.q_span = (1.0 / (1.0 - g)) *
               (1.0 + g * (2.0 * root2 * b.l_d / tau_min + root2 * eps_max * b.l_nu));
    b.q_max = 1.0 / (1.0 - g) +
              (g / (1.0 - g)) * (2.0 * root2 * b.l_d / tau_min +
                                 eps_max * (b.nu_min + root2 * b.l_nu));
    return b;
}

// ── nested minimax evaluation ───────────────────────────────────────────────

namespace {

/** Projected first-order loop shared by both orderings of the stage objective.
 *  `sign` is −1 for descent (min over π) and +1 for ascent (max over p). */
template <typename Value, typename Grad>
Vec danskin_loop(Vec x, double floor, double sign, double tol, long max_iter,
                 const Value& value_of, const Grad& grad_of, const char* what) {
    double step = 1.0;
    double value = value_of(x);
    double residual = 0.0;
    long stalled = 0;
    for (long it = 0; it < max_iter; ++it) {
        Vec g = grad_of(x);
        residual = (x - project_simplex(x + sign * g, floor)).norm();
        if (residual <= tol) return x;
        Vec x_next;
        double value_next;
        for (;;) {
            x_next = project_simplex(x + sign * step * g, floor);
            Vec d = x_next - x;
            value_next = value_of(x_next);
            bool ok = sign > 0 ? value_next >= value + 0.25 * g.dot(d)
                               : value_next <= value + 0.25 * g.dot(d);
            if (ok) break;
            if (d.norm() <= 1e-16 || step < 1e-18) {
                // The line search froze: value differences at this distance
                // from the optimum sit below double-precision noise, so no
                // value comparison can place the iterate better. The value
                // itself is already accurate to ~residual², far inside the
                // 1e-6 minimax-equality contract, so a small residual is
                // accepted; a large one is a genuine stall.
                if (residual <= 1e-6) return x;
                throw std::runtime_error(std::string(what) +
                                         ": line search froze at residual " +
                                         std::to_string(residual));
            }
            step *= 0.5;
        }
        // The Armijo test can also accept a zero-length move: when the
        // gradient components are equal to within noise the projection
        // removes the whole step, value_next == value, and the loop spins
        // in place with the residual pinned at the noise floor. Persistent
        // non-movement is the same situation as a frozen line search.
        if ((x_next - x).norm() <= 1e-14) {
            if (++stalled >= 50) {
                if (residual <= 1e-6) return x;
                throw std::runtime_error(std::string(what) +
                                         ": iterate stalled at residual " +
                                         std::to_string(residual));
            }
        } else {
            stalled = 0;
        }
        x = x_next;
        value = value_next;
        step = std::min(step * 2.0, 1e6);
    }
    if (residual <= 1e-6) return x;
    throw std::runtime_error(std::string(what) + ": outer loop missed tolerance");
}

}  // namespace

MinimaxCheck minimax_check(const QPair& q, const MarkovGame& mg, int s, int i,
                           const Vec& pi_other, const RiskProfile& profile,
                           double inner_tol, double outer_tol) {
    if (i != 0 && i != 1) {
        throw std::invalid_argument("minimax_check: player index must be 0 or 1");
    }
    PayoffPair R = stage_game(q, mg, s);
    if (pi_other.size() != (i == 0 ? R.n2() : R.n1())) {
        throw std::invalid_argument("minimax_check: pi_other has wrong length");
    }
    PolicyFloors floors =
        operating_floors(profile, R.span(), {mg.n_actions[0], mg.n_actions[1]});
    const double pi_floor = floors.pi_floor[i];
    const double p_floor = floors.p_floor[i];
    // The outer residual bottoms out at roughly |A| times the inner solve
    // error, so the inner problems are solved well below the outer tolerance
    // or the outer loop can stall just above it.
    inner_tol = std::max(std::min(inner_tol, outer_tol * 1e-4), 1e-13);
    const Mat A = i == 0 ? R.R1 : Mat(R.R2.transpose());
    const double tau = profile.tau[i];
    const double eps = profile.eps[i];
    const int n_own = static_cast<int>(A.rows());
    const int n_opp = static_cast<int>(A.cols());

    MinimaxCheck out;

    // min over π of sup_p: Danskin descent with the inner sup warm-started.
    {
        Vec p_warm;
        auto value_of = [&](const Vec& pi) {
            InnerSupResult inner =
                best_response_p(i, pi, pi_other, R, profile, p_floor, inner_tol, 100000,
                                p_warm.size() == n_opp ? &p_warm : nullptr);
            p_warm = inner.p_star;
            return inner.value + eps * nu_value(profile.kind.nu, pi);
        };
        auto grad_of = [&](const Vec& pi) -> Vec {
            InnerSupResult inner =
                best_response_p(i, pi, pi_other, R, profile, p_floor, inner_tol, 100000,
                                p_warm.size() == n_opp ? &p_warm : nullptr);
            p_warm = inner.p_star;
            return -A * inner.p_star + eps * nu_grad(profile.kind.nu, pi);
        };
        Vec pi0 = project_simplex(Vec::Constant(n_own, 1.0 / n_own), pi_floor);
        Vec pi_star = danskin_loop(pi0, pi_floor, -1.0, outer_tol, 100000, value_of,
                                   grad_of, "minimax_check (min-max)");
        out.minimax = value_of(pi_star);
    }

    // max over p of min_π: Danskin ascent with the inner min warm-started.
    {
        Vec pi_warm;
        auto value_of = [&](const Vec& p) {
            InnerSupResult inner =
                best_response_pi(i, p, R, profile, pi_floor, inner_tol, 100000,
                                 pi_warm.size() == n_own ? &pi_warm : nullptr);
            pi_warm = inner.p_star;
            return inner.value - d_value(profile.kind.d, p, pi_other) / tau;
        };
        auto grad_of = [&](const Vec& p) -> Vec {
            InnerSupResult inner =
                best_response_pi(i, p, R, profile, pi_floor, inner_tol, 100000,
                                 pi_warm.size() == n_own ? &pi_warm : nullptr);
            pi_warm = inner.p_star;
            return -A.transpose() * inner.p_star -
                   d_grad_p(profile.kind.d, p, pi_other) / tau;
        };
        Vec p0 = project_simplex(pi_other, p_floor);
        Vec p_star = danskin_loop(p0, p_floor, 1.0, outer_tol, 100000, value_of, grad_of,
                                  "minimax_check (max-min)");
        out.maximin = value_of(p_star);
    }
    return out;
}

}  // namespace rqe
