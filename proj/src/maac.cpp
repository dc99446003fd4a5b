#include "rqe/maac.hpp"

#include <cmath>
#include <limits>

namespace rqe {

void MaacConfig::validate(const MarkovGame& mg) const {
    // A frozen critic (alpha == 0) is a legitimate diagnostic configuration for
    // the sample-based learner, so alpha is allowed to be zero here even though
    // the schedule itself demands strict positivity elsewhere.
    if (!std::isfinite(sched.alpha) || sched.alpha < 0.0) {
        throw std::invalid_argument("MaacConfig: alpha must be non-negative");
    }
    if (!std::isfinite(sched.beta) || !(sched.beta > 0.0)) {
        throw std::invalid_argument("MaacConfig: beta must be positive");
    }
    if (!(sched.alpha < sched.beta)) {
        throw std::invalid_argument("MaacConfig: alpha must be smaller than beta");
    }
    if (sched.h < 1.0) {
        throw std::invalid_argument("MaacConfig: h must be at least 1");
    }
    if (samples_per_update < 1) {
        throw std::invalid_argument("MaacConfig: samples_per_update must be at least 1");
    }
    if (n_episodes < 1) {
        throw std::invalid_argument("MaacConfig: n_episodes must be at least 1");
    }
    if (mode == SamplingMode::OffPolicy) {
        if (static_cast<int>(reference.z.size()) != mg.n_states) {
            throw std::invalid_argument(
                "MaacConfig: OffPolicy reference must cover every state");
        }
        for (const JointProfile& z : reference.z) {
            if (z.pi1.size() != mg.n_actions[0] || z.pi2.size() != mg.n_actions[1]) {
                throw std::invalid_argument(
                    "MaacConfig: reference policy has wrong action dimension");
            }
            if (z.pi1.minCoeff() <= 0.0 || z.pi2.minCoeff() <= 0.0) {
                throw std::invalid_argument(
                    "MaacConfig: OffPolicy reference must be interior");
            }
        }
    }
}

void TransitionBatch::validate(const MarkovGame& mg) const {
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Transition& t = rows[k];
        if (t.s < 0 || t.s >= mg.n_states || t.s_next < 0 || t.s_next >= mg.n_states ||
            t.a1 < 0 || t.a1 >= mg.n_actions[0] || t.a2 < 0 || t.a2 >= mg.n_actions[1]) {
            throw std::invalid_argument("TransitionBatch: row " + std::to_string(k) +
                                        " out of bounds");
        }
        if (k > 0 && rows[k - 1].s_next != t.s) {
            throw std::invalid_argument("TransitionBatch: rows " + std::to_string(k - 1) +
                                        " and " + std::to_string(k) +
                                        " are not contiguous");
        }
    }
}

TransitionBatch sample_batch(const MarkovGame& mg, const PolicyTable& behavior, int s0,
                             int k_samples, SplitMix64& rng) {
    if (s0 < 0 || s0 >= mg.n_states) {
        throw std::invalid_argument("sample_batch: s0 out of range");
    }
    if (static_cast<int>(behavior.z.size()) != mg.n_states) {
        throw std::invalid_argument("sample_batch: behavior table has wrong state count");
    }
    TransitionBatch batch;
    batch.rows.reserve(static_cast<std::size_t>(k_samples));
    int s = s0;
    for (int k = 0; k < k_samples; ++k) {
        const JointProfile& z = behavior.z[static_cast<std::size_t>(s)];
        const int a1 = rng.categorical(z.pi1);
        const int a2 = rng.categorical(z.pi2);
        const long idx = mg.idx(s, a1, a2);
        const Vec row = mg.transition.row(idx).transpose();
        const int s_next = rng.categorical(row);
        batch.rows.push_back({s, a1, a2, mg.r1(idx), mg.r2(idx), s_next});
        s = s_next;
    }
    return batch;
}

std::vector<std::array<double, 2>> build_targets(const TransitionBatch& batch,
                                                 const PolicyTable& z_next,
                                                 const QPair& q, const MarkovGame& mg,
                                                 const RiskProfile& profile,
                                                 bool risk_neutral) {
    if (static_cast<int>(z_next.z.size()) != mg.n_states) {
        throw std::invalid_argument("build_targets: policy table has wrong state count");
    }
    std::vector<std::array<double, 2>> targets;
    targets.reserve(batch.rows.size());
    for (const Transition& t : batch.rows) {
        const JointProfile& z = z_next.z[static_cast<std::size_t>(t.s_next)];
        double v1, v2;
        if (risk_neutral) {
            PayoffPair R = stage_game(q, mg, t.s_next);
            v1 = z.pi1.dot((-R.R1) * z.p1);
            v2 = z.pi2.dot((-R.R2.transpose()) * z.p2);
        } else {
            PayoffPair R = stage_game(q, mg, t.s_next);
            v1 = objective_J(0, z, R, profile);
            v2 = objective_J(1, z, R, profile);
        }
        targets.push_back({-t.r1 + mg.gamma * v1, -t.r2 + mg.gamma * v2});
    }
    return targets;
}

QPair critic_step(const QPair& q, const TransitionBatch& batch,
                  const std::vector<std::array<double, 2>>& targets, double alpha_t,
                  const MarkovGame& mg) {
    if (targets.size() != batch.rows.size()) {
        throw std::invalid_argument("critic_step: target count must match batch size");
    }
    if (batch.rows.empty()) return q;
    QPair out = q;
    const double scale = alpha_t / static_cast<double>(batch.rows.size());
    for (std::size_t k = 0; k < batch.rows.size(); ++k) {
        const Transition& t = batch.rows[k];
        const long idx = mg.idx(t.s, t.a1, t.a2);
        out.q1(idx) += scale * (targets[k][0] - q.q1(idx));
        out.q2(idx) += scale * (targets[k][1] - q.q2(idx));
    }
    return out;
}

MaacResult train(const MarkovGame& mg, const RiskProfile& profile, const MaacConfig& cfg,
                 const FixedPointOracle* oracle) {
    mg.validate();
    profile.validate();
    cfg.validate(mg);

    MaacResult result;
    result.q = QPair::zeros(mg);
    result.z = PolicyTable::uniform(mg);
    result.rows.reserve(static_cast<std::size_t>(cfg.n_episodes));

    int s = 0;
    for (long ep = 0; ep < cfg.n_episodes; ++ep) {
        SplitMix64 rng(SplitMix64::derive(cfg.seed, static_cast<std::uint64_t>(ep)));
        if (ep == 0) s = rng.categorical(mg.rho0);

        const double alpha = cfg.sched.alpha_at(ep);
        const double beta = cfg.sched.beta_at(ep);

        PolicyTable z_next =
            actor_step(result.z, result.q, mg, beta, profile, 1, cfg.risk_neutral);
        const PolicyTable& behavior =
            cfg.mode == SamplingMode::OffPolicy ? cfg.reference : result.z;
        TransitionBatch batch = sample_batch(mg, behavior, s, cfg.samples_per_update, rng);
        auto targets = build_targets(batch, z_next, result.q, mg, profile,
                                     cfg.risk_neutral);
        QPair q_next = critic_step(result.q, batch, targets, alpha, mg);

        double reward_sum = 0.0;
        for (const Transition& t : batch.rows) reward_sum += t.r1;
        s = batch.rows.back().s_next;
        result.z = std::move(z_next);
        result.q = std::move(q_next);

        MaacRow row;
        row.episode = ep;
        row.z_distance = oracle != nullptr
                             ? result.z.distance(oracle->z)
                             : std::numeric_limits<double>::quiet_NaN();
        row.q_distance = oracle != nullptr
                             ? result.q.distance_max(oracle->q)
                             : std::numeric_limits<double>::quiet_NaN();
        row.mean_reward = reward_sum / static_cast<double>(batch.rows.size());
        result.rows.push_back(row);
    }
    result.final_state = s;
    return result;
}

}  // namespace rqe
