#pragma once

#include "rqe/markov_game.hpp"

#include <vector>

namespace rqe {

/**
 * Fast policy update: one preconditioned projected gradient step per state on
 * the stage games carved out of Q. The risk-neutral variant keeps only the
 * bilinear terms and pins each adversary to the opponent policy.
 */
PolicyTable actor_step(const PolicyTable& z, const QPair& q, const MarkovGame& mg,
                       double beta_t, const RiskProfile& profile, int n_threads = 1,
                       bool risk_neutral = false);

struct TwoTimescaleRow {
    long iter = 0;
    double alpha_t = 0.0;
    double beta_t = 0.0;
    double q_residual = 0.0;   ///< ‖Q_{t+1} − Q_t‖_max
    double z_distance = 0.0;   ///< max_s ‖z_{t+1}(s) − z*(s)‖₂; NaN without oracle
};

/** Reference fixed point, typically produced by value_iteration. */
struct FixedPointOracle {
    QPair q;
    PolicyTable z;
};

struct TwoTimescaleResult {
    QPair q;
    PolicyTable z;
    std::vector<TwoTimescaleRow> rows;
    long record_stride = 1;  ///< final sampling stride after any decimation
};

/**
 * Deterministic two-timescale iteration from Q = 0 and uniform policies:
 * actor sweep with rate β_t, then the damped critic update
 * Q ← (1−α_t)Q + α_t T_z Q. Rows are recorded every iteration until 10⁵ are
 * held, after which the record is thinned tenfold (repeatedly if needed).
 */
TwoTimescaleResult run_two_timescale(const MarkovGame& mg, const RiskProfile& profile,
                                     const StepSchedule& sched, long n_iter,
                                     const FixedPointOracle* oracle = nullptr,
                                     int n_threads = 1);

}  // namespace rqe
