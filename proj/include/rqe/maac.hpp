#pragma once

#include "rqe/rng.hpp"
#include "rqe/two_timescale.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace rqe {

enum class SamplingMode { OnPolicy, OffPolicy };

/**
 * Configuration of the sample-based actor-critic. The schedule's β drives
 * the per-episode actor step and α the averaged critic update. OffPolicy
 * draws actions from a fixed interior reference table instead of the
 * current policies. risk_neutral switches the actor to the bilinear pinned
 * update and the targets to the plain expected continuation value.
 */
struct MaacConfig {
    StepSchedule sched{};
    int samples_per_update = 64;  ///< K
    long n_episodes = 1000;       ///< T
    SamplingMode mode = SamplingMode::OnPolicy;
    PolicyTable reference;        ///< behavior policies when OffPolicy
    std::uint64_t seed = 0;
    bool risk_neutral = false;

    void validate(const MarkovGame& mg) const;
};

struct Transition {
    int s = 0;
    int a1 = 0;
    int a2 = 0;
    double r1 = 0.0;
    double r2 = 0.0;
    int s_next = 0;
};

/** One episode's K environment samples; rows chain s_next → s. */
struct TransitionBatch {
    std::vector<Transition> rows;

    void validate(const MarkovGame& mg) const;
};

/** Roll K steps from s0, drawing joint actions from the behavior policies. */
TransitionBatch sample_batch(const MarkovGame& mg, const PolicyTable& behavior, int s0,
                             int k_samples, SplitMix64& rng);

/**
 * Per-transition bootstrap targets
 * q̂_i = −r_i + γ·[π_iᵀQ_i(s',·)p_i − D_i/τ_i + ε_iν_i] evaluated with the
 * post-actor-step profiles at the observed next state (risk-neutral drops
 * the D and ν terms).
 */
std::vector<std::array<double, 2>> build_targets(const TransitionBatch& batch,
                                                 const PolicyTable& z_next,
                                                 const QPair& q, const MarkovGame& mg,
                                                 const RiskProfile& profile,
                                                 bool risk_neutral = false);

/**
 * Averaged tabular update Q ← Q + α_t·δ̂ where δ̂(s,a) sums
 * (q̂_k − Q(s_k,a_k))/K over visits; residuals use the pre-update Q and
 * unvisited cells are untouched.
 */
QPair critic_step(const QPair& q, const TransitionBatch& batch,
                  const std::vector<std::array<double, 2>>& targets, double alpha_t,
                  const MarkovGame& mg);

struct MaacRow {
    long episode = 0;
    double z_distance = 0.0;   ///< max_s ‖z(s) − z*(s)‖₂; NaN without oracle
    double q_distance = 0.0;   ///< ‖Q − Q*‖_max; NaN without oracle
    double mean_reward = 0.0;  ///< episode average of agent 0's reward
};

struct MaacResult {
    QPair q;
    PolicyTable z;
    std::vector<MaacRow> rows;
    int final_state = 0;
};

/**
 * T episodes of [actor sweep; K samples under π_t (or π^r); targets; critic
 * update] from Q = 0, uniform policies, s₀ ~ rho0. Each episode draws from
 * its own substream of cfg.seed, so trajectories are bitwise reproducible,
 * and the next episode resumes from the last sampled state.
 */
MaacResult train(const MarkovGame& mg, const RiskProfile& profile, const MaacConfig& cfg,
                 const FixedPointOracle* oracle = nullptr);

}  // namespace rqe
