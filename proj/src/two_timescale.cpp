#include "rqe/two_timescale.hpp"

#include <cmath>
#include <limits>

namespace rqe {

PolicyTable actor_step(const PolicyTable& z, const QPair& q, const MarkovGame& mg,
                       double beta_t, const RiskProfile& profile, int n_threads,
                       bool risk_neutral) {
    if (static_cast<int>(z.z.size()) != mg.n_states) {
        throw std::invalid_argument("actor_step: policy table has wrong state count");
    }
    if (!(beta_t >= 0.0)) {
        throw std::invalid_argument("actor_step: beta_t must be non-negative");
    }
    PolicyTable out;
    out.z.resize(z.z.size());
    parallel_for(mg.n_states, n_threads, [&](int s) {
        PayoffPair R = stage_game(q, mg, s);
        PolicyFloors floors =
            operating_floors(profile, R.span(), {mg.n_actions[0], mg.n_actions[1]});
        out.z[static_cast<std::size_t>(s)] =
            projected_step(z.z[static_cast<std::size_t>(s)], R, profile, beta_t, floors,
                           risk_neutral);
    });
    return out;
}

TwoTimescaleResult run_two_timescale(const MarkovGame& mg, const RiskProfile& profile,
                                     const StepSchedule& sched, long n_iter,
                                     const FixedPointOracle* oracle, int n_threads) {
    mg.validate();
    profile.validate();
    sched.validate();
    if (n_iter < 1) {
        throw std::invalid_argument("run_two_timescale: n_iter must be positive");
    }

    constexpr long kMaxRows = 100000;
    TwoTimescaleResult result;
    result.q = QPair::zeros(mg);
    result.z = PolicyTable::uniform(mg);

    long stride = 1;
    for (long t = 0; t < n_iter; ++t) {
        const double alpha = sched.alpha_at(t);
        const double beta = sched.beta_at(t);

        PolicyTable z_next = actor_step(result.z, result.q, mg, beta, profile, n_threads);
        QPair backed_up = bellman_evaluate(result.q, z_next, mg, profile);
        QPair q_next{(1.0 - alpha) * result.q.q1 + alpha * backed_up.q1,
                     (1.0 - alpha) * result.q.q2 + alpha * backed_up.q2};
        const double q_residual = q_next.distance_max(result.q);
        result.z = std::move(z_next);
        result.q = std::move(q_next);

        if (t % stride == 0) {
            if (static_cast<long>(result.rows.size()) >= kMaxRows) {
                std::vector<TwoTimescaleRow> kept;
                kept.reserve(result.rows.size() / 10 + 1);
                for (std::size_t k = 0; k < result.rows.size(); k += 10) {
                    kept.push_back(result.rows[k]);
                }
                result.rows = std::move(kept);
                stride *= 10;
            }
            if (t % stride == 0) {
                const double z_distance =
                    oracle != nullptr ? result.z.distance(oracle->z)
                                      : std::numeric_limits<double>::quiet_NaN();
                result.rows.push_back({t, alpha, beta, q_residual, z_distance});
            }
        }
    }
    result.record_stride = stride;
    return result;
}

}  // namespace rqe
