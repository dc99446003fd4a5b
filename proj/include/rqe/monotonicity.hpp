#pragma once

#include "rqe/normal_form.hpp"

namespace rqe {

enum class Evidence { ClosedForm, BlockPSD, Sampled };

/**
 * Evidence that the 4-player gradient field is λ-strictly (and possibly
 * (μ,λ)-strongly) monotone. μ is always a sampled estimate — large enough
 * for step-size and bound diagnostics, never a proof by itself; the proof
 * content lives in `evidence`.
 */
struct MonotonicityCertificate {
    bool is_strict = false;
    bool is_strong = false;
    double mu = 0.0;             // sampled estimate, min-eigenvalue/2
    WeightVector lambda;         // weights the certificate refers to
    Evidence evidence = Evidence::Sampled;
    double min_eigenvalue = 0.0; // smallest sampled eigenvalue of any M_i

    void validate() const {
        if (is_strong && (!is_strict || !(mu > 0.0))) {
            throw std::logic_error("MonotonicityCertificate: strong requires strict and mu>0");
        }
    }
};

/** Product test: true iff 16·ε₁·ε₂·τ₁·τ₂ > 1 (strict inequality). */
bool closed_form_test(const RiskProfile& profile);

/**
 * Admissible interval [1/(4ε₂τ₁), 4ε₁τ₂] for the weight ratio λ₂/λ₁ and its
 * geometric midpoint √(ε₁τ₂/(ε₂τ₁)), which is the ratio certify() adopts.
 * The interval is non-empty exactly when the product test passes (with
 * equality allowed at the boundary).
 */
struct LambdaInterval {
    double lo = 0.0;
    double hi = 0.0;
    double ratio = 1.0;
    bool nonempty = false;
};

LambdaInterval lambda_interval(const RiskProfile& profile);

/**
 * The per-player block matrix whose positive semidefiniteness for all z
 * certifies λ-strict monotonicity:
 *
 *   M_i = [[ 2λ_iε_i ∇²ν_i(π_i)      , (λ_{-i}/τ_{-i}) ∇²_{pπ}D_{-i} ],
 *          [ (λ_{-i}/τ_{-i}) ∇²_{pπ}D_{-i}, 2(λ_{-i}/τ_{-i}) ∇²_{pp}D_{-i} ]]
 *
 * where D_{-i} is evaluated at (p_{-i}, π_i). All blocks are |A_i|×|A_i|
 * diagonals; the payoff matrices never enter.
 */
Mat block_matrix_M(int i, const WeightVector& lambda, const JointProfile& z,
                   const RiskProfile& profile);

/**
 * Builds a certificate for action counts (n1, n2).
 *
 * λ is fixed at ratio = the geometric midpoint of lambda_interval (λ₁ = 1).
 * When the closed-form product test passes, evidence = ClosedForm and the
 * booleans follow the theory: strict for both legal pairings, strong only
 * for KL/LogBarrier. Otherwise evidence = Sampled and the booleans reflect
 * the smallest sampled eigenvalue of M_i over n_samples stratified interior
 * draws on the floored simplex (faces are over-weighted since Hessians
 * blow up there). μ = max(0, min_eig)/2 in both cases.
 */
MonotonicityCertificate certify(const RiskProfile& profile, std::array<int, 2> n_actions,
                                double floor = 1e-3, int n_samples = 500,
                                std::uint64_t seed = 0);

/**
 * min over n_pairs random interior pairs (z, z') of
 *   ⟨z − z', F(z) − F(z')⟩_λ / ‖z − z'‖₂²,
 * a direct empirical lower estimate of the strong-monotonicity constant.
 * Pairs closer than 1e-9 are redrawn.
 */
double empirical_monotonicity(const PayoffPair& R, const RiskProfile& profile,
                              const WeightVector& lambda, int n_pairs, double floor,
                              std::uint64_t seed);

}  // namespace rqe
