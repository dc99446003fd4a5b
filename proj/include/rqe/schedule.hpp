#pragma once

#include <stdexcept>

namespace rqe {

/**
 * Two-timescale step sizes: a slow critic rate α_t and a fast actor rate β_t.
 *
 * Constant:     α_t = α,        β_t = β
 * Diminishing:  α_t = α/(t+h),  β_t = β/(t+h)
 *
 * The timescale separation α < β is a type invariant — the critic must move
 * slower than the actor — so construction with α ≥ β fails validation even
 * for uses (plain value iteration) that ignore β.
 */
struct StepSchedule {
    enum class Kind { Constant, Diminishing };

    Kind kind = Kind::Constant;
    double alpha = 1.0;
    double beta = 10.0;
    long h = 1;

    double alpha_at(long t) const {
        return kind == Kind::Constant ? alpha : alpha / static_cast<double>(t + h);
    }
    double beta_at(long t) const {
        return kind == Kind::Constant ? beta : beta / static_cast<double>(t + h);
    }

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0)) {
            throw std::invalid_argument("StepSchedule: rates must be positive");
        }
        if (!(alpha < beta)) {
            throw std::invalid_argument(
                "StepSchedule: critic rate alpha must be strictly below actor rate beta");
        }
        if (h < 1) {
            throw std::invalid_argument("StepSchedule: offset h must be at least 1");
        }
    }
};

}  // namespace rqe
