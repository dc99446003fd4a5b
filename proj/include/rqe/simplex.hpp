#pragma once

#include "rqe/common.hpp"

namespace rqe {

/**
 * The pair of per-player weights (λ₁, λ₂) that precondition the 4-player
 * gradient field. Expanded over a stacked profile z = (π₁, π₂, p₁, p₂) the
 * blocks carry weights (λ₁, λ₂, λ₁, λ₂): each player's own policy and its
 * adversary share the player's weight.
 */
struct WeightVector {
    double lambda1 = 1.0;
    double lambda2 = 1.0;

    void validate() const {
        if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) {
            throw std::invalid_argument("WeightVector: weights must be strictly positive");
        }
    }

    double max_abs() const { return std::max(lambda1, lambda2); }
};

/**
 * Coordinate layout of a stacked profile z = (π₁, π₂, p₁, p₂) for a game
 * with action counts (n1, n2). Block lengths are (n1, n2, n2, n1): each
 * adversary distribution lives on the opponent's action set.
 */
struct BlockLayout {
    int n1 = 0;
    int n2 = 0;

    int total() const { return 2 * (n1 + n2); }

    /** Per-coordinate weights (λ₁·1_{n1}, λ₂·1_{n2}, λ₁·1_{n2}, λ₂·1_{n1}). */
    Vec expand_weights(const WeightVector& lambda) const;
};

/**
 * Euclidean projection onto the floored simplex {v : Σv = 1, v_i ≥ floor}.
 *
 * floor = 0 gives the standard probability simplex. The floored case is
 * reduced to the standard one by the substitution v = floor + (1 − n·floor)·w,
 * so a single sort-based kernel (Duchi et al. 2008, Algorithm 1) serves both.
 *
 * Throws std::invalid_argument on non-finite input or when floor·n ≥ 1
 * (infeasible constraint set).
 */
Vec project_simplex(const Vec& x, double floor = 0.0);

/**
 * Validates that v lies on the simplex within tol (default 1e-12).
 */
bool is_on_simplex(const Vec& v, double floor = 0.0, double tol = 1e-12);

/**
 * Construction rule for simplex vectors: inputs off by at most 1e-9 in mass
 * (or negativity) are renormalized; larger violations throw
 * std::invalid_argument.
 */
Vec ensure_simplex(Vec v);

/** Σ λ_block(i) · u_i · v_i over the four-block layout. */
double weighted_inner(const Vec& u, const Vec& v, const WeightVector& lambda,
                      const BlockLayout& layout);

/** sqrt(weighted_inner(u, u, λ)). */
double weighted_norm(const Vec& u, const WeightVector& lambda, const BlockLayout& layout);

}  // namespace rqe
