#pragma once

#include "rqe/monotonicity.hpp"

#include <optional>

namespace rqe {

struct SolveOptions {
    double eta = 0.05;        // initial step size; halved on divergence
    double tol = 1e-8;        // stop when ‖z_{t+1} − z_t‖₂ ≤ tol
    long max_iter = 100000;
    double floor = -1.0;      // < 0: derive operating floors from the payoff span
    bool risk_neutral = false;
    bool record_trajectory = false;
    std::optional<JointProfile> z0;      // default: uniform
    std::optional<JointProfile> oracle;  // when set, trajectory records distance to it
};

struct TrajectoryRow {
    long iteration = 0;
    double step_norm = 0.0;
    double distance_to_oracle = std::numeric_limits<double>::quiet_NaN();
};

struct SolveReport {
    JointProfile z_star;
    long iterations = 0;
    double final_step_norm = 0.0;
    bool converged = false;
    double eta_final = 0.0;
    PolicyFloors floors;
    std::vector<TrajectoryRow> trajectory;
};

/**
 * One projected preconditioned step z ← Proj(z − η·Λ·F(z)) on the floored
 * simplex product. This single kernel is the solver iteration, the
 * two-timescale actor step and the sample-based learner's actor step.
 *
 * risk_neutral drops the regularizer and penalty terms and pins the
 * adversaries to the opponent policies after the policy update.
 */
JointProfile projected_step(const JointProfile& z, const PayoffPair& R,
                            const RiskProfile& profile, double eta,
                            const PolicyFloors& floors, bool risk_neutral = false);

/**
 * Computes the RQE candidate by iterating projected_step from z0.
 *
 * Convergence is iterate displacement ≤ tol. Exhausting max_iter returns
 * converged = false rather than throwing — persistent cycling is the
 * expected outcome for the risk-neutral baseline.
 */
SolveReport solve(const PayoffPair& R, const RiskProfile& profile,
                  const SolveOptions& opts = {});

/**
 * Stage-oracle variant of solve for payoff-dominated games (|R| ≫ 1/τ, ε),
 * where the explicit iteration needs a step size below its stiffness bound
 * and then millions of iterations. Runs solve first and returns its report
 * verbatim when it converges. Otherwise restarts from uniform with two
 * recovery phases — damped exact best-response sweeps (near-pure equilibria
 * collapse in a few sweeps) and adaptive-step extragradient (stable at
 * step ~ 1/L instead of ~ μ/L² for the stiff rotational games) — accepting
 * a candidate only when one plain projected step at opts.eta displaces it
 * by at most max(tol, 1e-13), the same fixed-point criterion solve uses at
 * an unhalved step. The recovery phases do not record trajectory rows; the
 * returned iterations field counts plain steps plus recovery sweeps/steps.
 *
 * risk_neutral requests are returned from solve untouched: that mode is a
 * diagnostic baseline whose persistent cycling is the expected outcome.
 */
SolveReport solve_robust(const PayoffPair& R, const RiskProfile& profile,
                         const SolveOptions& opts = {});

/**
 * Ground-truth oracle for 2×2 games: grid search over (π₁, π₂) on the
 * floored simplex with the inner adversary problems solved to 1e-10 and
 * best responses taken over the same grid. Returns the grid point
 * minimizing the larger of the two unilateral improvements; accurate to
 * O(grid_step) under a strict certificate.
 *
 * Throws std::invalid_argument for action counts other than 2×2.
 */
JointProfile brute_force_rqe(const PayoffPair& R, const RiskProfile& profile,
                             double grid_step = 1e-2);

/**
 * Measures equilibrium sensitivity to payoff perturbations against the
 * analytic bound 2‖λ‖_∞(√|A₁|+√|A₂|)/μ on ‖z*−z†‖₂/‖R−R'‖_max.
 */
struct LipschitzProbe {
    double max_observed_ratio = 0.0;
    double bound = 0.0;
    bool holds = false;
};

LipschitzProbe lipschitz_probe(const PayoffPair& R, double delta, int n_trials,
                               const RiskProfile& profile, double mu,
                               std::uint64_t seed = 0);

}  // namespace rqe
