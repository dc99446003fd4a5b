#pragma once

#include "rqe/normal_form.hpp"
#include "rqe/schedule.hpp"
#include "rqe/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rqe {

/**
 * Two-player discounted Markov game with finite states and per-player finite
 * action sets. Rewards and transitions are stored flat over (s, a1, a2) with
 * a2 fastest; transitions form a dense (S·|A1|·|A2|) × S row-stochastic
 * matrix so expected continuation values are single mat-vecs.
 */
struct MarkovGame {
    int n_states = 0;
    std::array<int, 2> n_actions{0, 0};
    double gamma = 0.0;
    Vec rho0;        ///< initial state distribution, length n_states
    Vec r1, r2;      ///< rewards, length n_states·|A1|·|A2|
    Mat transition;  ///< rows indexed like rewards, columns are next states

    long n_pairs() const {
        return static_cast<long>(n_states) * n_actions[0] * n_actions[1];
    }
    long idx(int s, int a1, int a2) const {
        return (static_cast<long>(s) * n_actions[0] + a1) * n_actions[1] + a2;
    }

    /** Shapes, stochasticity of rho0 and every transition row, gamma ∈ [0,1). */
    void validate() const;
};

/** Versioned JSON text encoding; parse(serialize(g)) reproduces g exactly. */
std::string to_json_string(const MarkovGame& mg);
MarkovGame markov_game_from_json(const std::string& text);

/** Per-player action-value tables, flat over (s, a1, a2) like rewards. */
struct QPair {
    Vec q1, q2;

    static QPair zeros(const MarkovGame& mg) {
        return QPair{Vec::Zero(mg.n_pairs()), Vec::Zero(mg.n_pairs())};
    }
    double max_norm() const {
        return std::max(q1.cwiseAbs().maxCoeff(), q2.cwiseAbs().maxCoeff());
    }
    /** max over players of (max − min) of that player's table. */
    double span() const {
        return std::max(q1.maxCoeff() - q1.minCoeff(), q2.maxCoeff() - q2.minCoeff());
    }
    double distance_max(const QPair& other) const {
        return std::max((q1 - other.q1).cwiseAbs().maxCoeff(),
                        (q2 - other.q2).cwiseAbs().maxCoeff());
    }
};

/** One joint profile per state. */
struct PolicyTable {
    std::vector<JointProfile> z;

    static PolicyTable uniform(const MarkovGame& mg);
    /** max over states of the stacked euclidean distance. */
    double distance(const PolicyTable& other) const;
};

/**
 * Stage game at state s for tables Q: each player's cost matrix is the
 * negated Q-slice, so stage equilibria price risk on the continuation values.
 */
PayoffPair stage_game(const QPair& q, const MarkovGame& mg, int s);

/**
 * Risk-adjusted stage value J_i(z(s); stage_game(Q, s)) for every state;
 * column i of the returned matrix is player i's state-value vector.
 */
Mat stage_values(const QPair& q, const PolicyTable& policy, const MarkovGame& mg,
                 const RiskProfile& profile);

/**
 * Policy-evaluation operator T_z: (T_zQ)_i(s,a) = −r_i(s,a) + γ·E_{s'}[v_i(s')]
 * with v_i the risk-adjusted stage value of the given per-state profiles.
 */
QPair bellman_evaluate(const QPair& q, const PolicyTable& policy, const MarkovGame& mg,
                       const RiskProfile& profile);

struct BellmanResult {
    QPair q;
    PolicyTable policy;  ///< the per-state stage equilibria that attain it
};

/**
 * Optimality operator T: solves the stage equilibrium in every state (warm
 * started from `warm` when given) and backs up the equilibrium values. A
 * stage solve that misses stage_tol raises an error naming the state.
 */
BellmanResult bellman_optimality(const QPair& q, const MarkovGame& mg,
                                 const RiskProfile& profile, double stage_tol = 1e-10,
                                 const PolicyTable* warm = nullptr, int n_threads = 1);

struct ValueIterationOptions {
    double tol = 1e-6;         ///< stop when ‖Q_{t+1} − Q_t‖_max ≤ tol
    long max_sweeps = 10000;
    double stage_tol = -1.0;   ///< < 0 → tol / 10, capped at 1e-10 from below
    StepSchedule schedule{};   ///< only α_t is used; default is the full step α = 1
    int n_threads = 1;
    bool record_residuals = true;
};

struct ValueIterationResult {
    QPair q;
    PolicyTable policy;
    long sweeps = 0;
    double final_residual = 0.0;
    std::vector<double> residuals;
};

/**
 * Damped value iteration Q_{t+1} = (1−α_t)Q_t + α_t·TQ_t from Q_0 = 0.
 * Throws (reporting the last residual) if max_sweeps is exhausted.
 */
ValueIterationResult value_iteration(const MarkovGame& mg, const RiskProfile& profile,
                                     const ValueIterationOptions& opt = {});

struct QBounds {
    double q_span = 0.0;  ///< bound on max − min of any fixed-point Q_i
    double q_max = 0.0;   ///< bound on ‖Q_i‖_∞ at the fixed point
    double l_d = 0.0;     ///< sup‖∇_pD‖₂ over the floored simplex, worst player
    double l_nu = 0.0;    ///< sup‖∇ν‖₂ over the floored simplex, worst player
    double nu_min = 0.0;  ///< min |ν| over the floored simplex, worst player
};

/**
 * A-priori envelopes for the fixed point of T under rewards in [0,1], from
 * the Lipschitz moduli of the regularizers on the floored simplex. Both
 * collapse to 1 when gamma = 0.
 */
QBounds q_bounds(const MarkovGame& mg, const RiskProfile& profile, double floor = 1e-6);

struct MinimaxCheck {
    double minimax = 0.0;  ///< min_π sup_p [−πᵀAp − D/τ] + εν(π)
    double maximin = 0.0;  ///< max_p [min_π (−πᵀAp + εν(π))] − D/τ
};

/**
 * Nested evaluation of both orderings of player i's stage objective at
 * state s with the opponent policy pinned (it enters only through D). Under
 * the convex-concave structure the two values coincide.
 */
MinimaxCheck minimax_check(const QPair& q, const MarkovGame& mg, int s, int i,
                           const Vec& pi_other, const RiskProfile& profile,
                           double inner_tol = 1e-10, double outer_tol = 1e-8);

}  // namespace rqe
