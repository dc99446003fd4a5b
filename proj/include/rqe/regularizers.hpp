#pragma once

#include "rqe/simplex.hpp"

#include <array>

namespace rqe {

/** Player regularizer ν_i. */
enum class NuKind { NegativeEntropy, LogBarrier };

/** Adversary penalty D_i. */
enum class DKind { ReverseKL, KL };

/**
 * The two pairings with matching convex-conjugate structure. Only
 * (LogBarrier, KL) and (NegativeEntropy, ReverseKL) admit the block
 * positive-semidefiniteness certificates, so anything else is rejected.
 */
struct RegularizerKind {
    NuKind nu = NuKind::LogBarrier;
    DKind d = DKind::KL;

    bool legal() const {
        return (nu == NuKind::LogBarrier && d == DKind::KL) ||
               (nu == NuKind::NegativeEntropy && d == DKind::ReverseKL);
    }

    void validate() const {
        if (!legal()) {
            throw std::invalid_argument(
                "RegularizerKind: illegal pairing; use (LogBarrier, KL) or "
                "(NegativeEntropy, ReverseKL)");
        }
    }
};

/**
 * All behavioral parameters of the 4-player game: risk-aversion levels τ_i,
 * bounded-rationality temperatures ε_i, the regularizer pairing, and the
 * preconditioning weights λ.
 */
struct RiskProfile {
    std::array<double, 2> tau{5.0, 5.0};
    std::array<double, 2> eps{0.2, 0.2};
    RegularizerKind kind;
    WeightVector lambda;

    void validate() const {
        for (int i = 0; i < 2; ++i) {
            if (!(tau[i] > 0.0) || !(eps[i] > 0.0)) {
                throw std::invalid_argument("RiskProfile: tau and eps must be positive");
            }
        }
        kind.validate();
        lambda.validate();
    }
};

// ── ν_i: value, gradient, Hessian diagonal ──────────────────────────
// NegativeEntropy: ν(π) = Σ π log π,  ∇ν = log π + 1,  ∇²ν = diag(π)⁻¹
// LogBarrier:      ν(π) = −Σ log π,   ∇ν = −1/π,        ∇²ν = diag(π)⁻²
// All throw std::domain_error if any entry of π is ≤ 0.

double nu_value(NuKind kind, const Vec& pi);
Vec nu_grad(NuKind kind, const Vec& pi);
Vec nu_hess_diag(NuKind kind, const Vec& pi);

// ── D_i(p, π): value, p-gradient, Hessian blocks ────────────────────
// KL:        D(p,π) = Σ p log(p/π)
//            ∇_p D = log(p/π) + 1, H_pp = diag(p)⁻¹,
//            H_pπ = −diag(π)⁻¹,    H_ππ = diag(p)·diag(π)⁻²
// ReverseKL: D(p,π) = Σ π log(π/p)
//            ∇_p D = −π/p,         H_pp = diag(π)·diag(p)⁻²,
//            H_pπ = −diag(p)⁻¹,    H_ππ = diag(π)⁻¹
// All blocks are diagonal; they are returned as their diagonals.

struct DHessBlocks {
    Vec h_pp;    // ∇²_{pp} D
    Vec h_ppi;   // mixed block ∇²_{pπ} D
    Vec h_pipi;  // ∇²_{ππ} D
};

double d_value(DKind kind, const Vec& p, const Vec& pi);
Vec d_grad_p(DKind kind, const Vec& p, const Vec& pi);
DHessBlocks d_hess_blocks(DKind kind, const Vec& p, const Vec& pi);

// ── Policy lower bounds ─────────────────────────────────────────────

/**
 * Theoretical lower bounds on equilibrium policies and adversaries for a
 * game with payoff span `payoff_span` and action counts (n1, n2).
 *
 * KL/LogBarrier:      π_i ≥ ε_i/(ε_i·|A_i| + span); the adversary p_i (a
 *                     distribution over A_{-i}) gets the same expression
 *                     with the action counts swapped.
 * ReverseKL/NegEntropy: π_i ≥ exp(−span)/|A_i| and
 *                     p_i ≥ exp(−span)/(|A_i|·(|A_{-i}| + τ_i·span)).
 */
struct PolicyFloors {
    std::array<double, 2> pi_floor{0.0, 0.0};  // per player, on Δ_{|A_i|}
    std::array<double, 2> p_floor{0.0, 0.0};   // per adversary, on Δ_{|A_{-i}|}
};

PolicyFloors policy_floor(const RiskProfile& profile, double payoff_span,
                          std::array<int, 2> n_actions);

/**
 * Floor actually used by the solvers: half the theoretical bound, capped at
 * 1e-6, so the true equilibrium is always strictly feasible inside the
 * shrunken simplex.
 */
inline double operating_floor(double theoretical_floor) {
    return std::min(1e-6, 0.5 * theoretical_floor);
}

PolicyFloors operating_floors(const RiskProfile& profile, double payoff_span,
                              std::array<int, 2> n_actions);

}  // namespace rqe
