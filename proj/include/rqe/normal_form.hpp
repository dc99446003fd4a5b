#pragma once

#include "rqe/regularizers.hpp"

namespace rqe {

/**
 * Bimatrix payoffs. Both matrices are |A₁|×|A₂| with rows indexed by player
 * 1's actions; entry (a₁, a₂) is the payoff to the respective player under
 * that joint action. Player 2's expected payoff vector against a
 * distribution q over A₁ is R2ᵀq.
 */
struct PayoffPair {
    Mat R1;
    Mat R2;

    int n1() const { return static_cast<int>(R1.rows()); }
    int n2() const { return static_cast<int>(R1.cols()); }
    BlockLayout layout() const { return BlockLayout{n1(), n2()}; }

    /** max over both matrices of (max entry − min entry). */
    double span() const { return std::max(span_of(R1), span_of(R2)); }

    void validate() const {
        require_finite(R1, "PayoffPair.R1");
        require_finite(R2, "PayoffPair.R2");
        if (R1.rows() != R2.rows() || R1.cols() != R2.cols()) {
            throw std::invalid_argument("PayoffPair: R1 and R2 must share shape");
        }
        if (R1.size() == 0) throw std::invalid_argument("PayoffPair: empty matrices");
    }
};

/**
 * The 4-player decision variable z = (π₁, π₂, p₁, p₂). p₁ is player 1's
 * pessimistic model of player 2 (a distribution over A₂); p₂ symmetrically
 * lives on A₁.
 */
struct JointProfile {
    Vec pi1, pi2, p1, p2;

    static JointProfile uniform(int n1, int n2);

    /** Stacks (π₁, π₂, p₁, p₂) in block order. */
    Vec stack() const;
    static JointProfile unstack(const Vec& v, const BlockLayout& layout);

    double distance(const JointProfile& other) const;

    /** Renormalizes small drift, throws on real violations or ≥-floor failure. */
    void validate(double floor = 0.0) const;
};

/**
 * Player i's risk-adjusted objective
 *   J_i = −π_iᵀ R_i p_i − D_i(p_i, π_{-i})/τ_i + ε_i ν_i(π_i).
 * The adversary objective is exactly −J_i and has no separate code path.
 */
double objective_J(int i, const JointProfile& z, const PayoffPair& R,
                   const RiskProfile& profile);

/**
 * The 4-player gradient field, stacked in block order (π₁, π₂, p₁, p₂):
 *   F_{π₁} = −R₁p₁ + ε₁∇ν₁(π₁)        F_{π₂} = −R₂ᵀp₂ + ε₂∇ν₂(π₂)
 *   F_{p₁} = R₁ᵀπ₁ + ∇_p D₁(p₁,π₂)/τ₁  F_{p₂} = R₂π₂ + ∇_p D₂(p₂,π₁)/τ₂
 */
Vec gradient_operator(const JointProfile& z, const PayoffPair& R,
                      const RiskProfile& profile);

/**
 * Risk-neutral comparison field: the bilinear terms only, with adversaries
 * pinned to the opponent policies (p₁=π₂, p₂=π₁ maintained by the caller).
 * The p-blocks are zero.
 */
Vec gradient_operator_risk_neutral(const JointProfile& z, const PayoffPair& R);

/**
 * Inner adversary problem: maximize −π_iᵀR_i p − D_i(p, π_other)/τ_i over
 * the floored simplex. Concave in p; solved by projected gradient ascent
 * with backtracking to fixed-point residual `tol`.
 *
 * Throws std::runtime_error with the residual if max_iter is exhausted
 * before reaching tol.
 */
struct InnerSupResult {
    Vec p_star;
    double value = 0.0;  // sup value of the reward+penalty terms (no ε·ν)
    long iterations = 0;
};

InnerSupResult best_response_p(int i, const Vec& pi_own, const Vec& pi_other,
                               const PayoffPair& R, const RiskProfile& profile,
                               double floor, double tol = 1e-10,
                               long max_iter = 100000,
                               const Vec* warm_start = nullptr);

/**
 * f_i(π_i, π_{-i}) = sup_{p_i} [−π_iᵀR_ip_i − D_i/τ_i] + ε_iν_i(π_i),
 * the objective whose mutual minimizers define the equilibrium.
 */
double f_value(int i, const Vec& pi_own, const Vec& pi_other, const PayoffPair& R,
               const RiskProfile& profile, double floor, double tol = 1e-10);

/**
 * Inner policy problem: minimize −πᵀR_i p + ε_iν_i(π) over the floored
 * simplex for a fixed adversary p. Convex in π; same projected-gradient
 * scheme as best_response_p. `value` is the attained minimum of those two
 * terms (no D contribution).
 */
InnerSupResult best_response_pi(int i, const Vec& p_own, const PayoffPair& R,
                                const RiskProfile& profile, double floor,
                                double tol = 1e-10, long max_iter = 100000,
                                const Vec* warm_start = nullptr);

/**
 * Equilibrium gap at z: max over players and n_probe random floored
 * deviations π' of f_i(π_i, π_{-i}) − f_i(π', π_{-i}). Non-positive (up to
 * solver tolerance) exactly when no sampled deviation improves on z.
 */
double rqe_gap(const JointProfile& z, const PayoffPair& R, const RiskProfile& profile,
               int n_probe = 64, std::uint64_t seed = 0);

}  // namespace rqe
