#include "rqe/normal_form.hpp"

#include "rqe/rng.hpp"

#include <limits>

namespace rqe {

JointProfile JointProfile::uniform(int n1, int n2) {
    JointProfile z;
    z.pi1 = Vec::Constant(n1, 1.0 / n1);
    z.pi2 = Vec::Constant(n2, 1.0 / n2);
    z.p1 = Vec::Constant(n2, 1.0 / n2);
    z.p2 = Vec::Constant(n1, 1.0 / n1);
    return z;
}

Vec JointProfile::stack() const {
    Vec v(pi1.size() + pi2.size() + p1.size() + p2.size());
    v << pi1, pi2, p1, p2;
    return v;
}

JointProfile JointProfile::unstack(const Vec& v, const BlockLayout& layout) {
    if (v.size() != layout.total()) {
        throw std::invalid_argument("JointProfile::unstack: length mismatch");
    }
    JointProfile z;
    z.pi1 = v.segment(0, layout.n1);
    z.pi2 = v.segment(layout.n1, layout.n2);
    z.p1 = v.segment(layout.n1 + layout.n2, layout.n2);
    z.p2 = v.segment(layout.n1 + 2 * layout.n2, layout.n1);
    return z;
}

double JointProfile::distance(const JointProfile& other) const {
    return std::sqrt((pi1 - other.pi1).squaredNorm() + (pi2 - other.pi2).squaredNorm() +
                     (p1 - other.p1).squaredNorm() + (p2 - other.p2).squaredNorm());
}

void JointProfile::validate(double floor) const {
    for (const Vec* v : {&pi1, &pi2, &p1, &p2}) {
        if (!is_on_simplex(*v, floor, 1e-9)) {
            throw std::invalid_argument("JointProfile: component off its floored simplex");
        }
    }
    if (pi1.size() != p2.size() || pi2.size() != p1.size()) {
        throw std::invalid_argument("JointProfile: adversary dimensions must mirror policies");
    }
}

namespace {

/** Player i's reward coupling: π_iᵀ A_i p_i with A₀ = R₁, A₁ = R₂ᵀ. */
Mat effective_matrix(int i, const PayoffPair& R) {
    if (i == 0) return R.R1;
    if (i == 1) return R.R2.transpose();
    throw std::invalid_argument("player index must be 0 or 1");
}

const Vec& own_policy(int i, const JointProfile& z) { return i == 0 ? z.pi1 : z.pi2; }
const Vec& other_policy(int i, const JointProfile& z) { return i == 0 ? z.pi2 : z.pi1; }
const Vec& own_adversary(int i, const JointProfile& z) { return i == 0 ? z.p1 : z.p2; }

// ── Separable KKT duals ──────────────────────────────────────────────
//
// Every inner problem below is "linear term + separable barrier over the
// floored simplex", so its exact solution is known up to the scalar dual of
// the mass constraint: v_a(kappa) = max(floor, closed form in kappa), with
// Σ_a v_a(kappa) monotone decreasing. The dual root is bracketed by doubling
// and then bisected to machine precision. The projected-ascent loops start
// from this point; they only have to verify (or polish) the residual, which
// keeps them fast even when the floor makes the Hessian ill-conditioned.

/** Root of mass(x) = 1 on [lo, ∞), mass decreasing with mass(lo) ≥ 1. */
template <typename MassFn>
double dual_root(const MassFn& mass, double lo, double offset_guess) {
    double offset = offset_guess;
    while (mass(lo + offset) >= 1.0 && offset < 1e300) offset *= 2.0;
    double hi = lo + offset;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) >= 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/**
 * Absorbs the residual mass error (~1e-15 after bisection) into the largest
 * coordinate. A plain projection would spread it uniformly, and on a
 * coordinate sitting at ~1e-6 that absolute shift is a visible relative
 * error once the barrier Hessian (∝ 1/p) amplifies it.
 */
Vec fixup_mass(Vec v) {
    long imax = 0;
    v.maxCoeff(&imax);
    v(imax) -= v.sum() - 1.0;
    return v;
}

/** argmax over {p ≥ floor, Σp = 1} of −cᵀp − D(p, π)/τ. */
Vec separable_argmax_p(DKind dk, const Vec& c, const Vec& pi_other, double tau,
                       double floor) {
    const long n = c.size();
    Vec p(n);
    if (dk == DKind::KL) {
        // p_a = π_a·exp(−τc_a − 1 − τκ); fold the constants into t.
        Vec l = pi_other.array().log() - tau * c.array();
        auto mass = [&](double t) {
            double s = 0.0;
            for (long a = 0; a < n; ++a) s += std::max(floor, std::exp(l(a) - t));
            return s;
        };
        const double t = dual_root(mass, l.maxCoeff() - 1.0, 2.0);
        for (long a = 0; a < n; ++a) p(a) = std::max(floor, std::exp(l(a) - t));
    } else {
        // ReverseKL: p_a = π_a/(τ(c_a + κ)), valid on κ > −min c.
        auto mass = [&](double k) {
            double s = 0.0;
            for (long a = 0; a < n; ++a) {
                s += std::max(floor, pi_other(a) / (tau * (c(a) + k)));
            }
            return s;
        };
        const double k = dual_root(mass, -c.minCoeff(), 1.0);
        for (long a = 0; a < n; ++a) p(a) = std::max(floor, pi_other(a) / (tau * (c(a) + k)));
    }
    return fixup_mass(std::move(p));
}

/** argmin over {π ≥ floor, Σπ = 1} of −cᵀπ + εν(π). */
Vec separable_argmin_pi(NuKind nk, const Vec& c, double eps, double floor) {
    const long n = c.size();
    Vec pi(n);
    if (nk == NuKind::NegativeEntropy) {
        // π_a = exp((c_a − κ)/ε − 1); fold the constants into t.
        Vec l = c / eps;
        auto mass = [&](double t) {
            double s = 0.0;
            for (long a = 0; a < n; ++a) s += std::max(floor, std::exp(l(a) - t));
            return s;
        };
        const double t = dual_root(mass, l.maxCoeff() - 1.0, 2.0);
        for (long a = 0; a < n; ++a) pi(a) = std::max(floor, std::exp(l(a) - t));
    } else {
        // LogBarrier: π_a = ε/(κ − c_a), valid on κ > max c.
        auto mass = [&](double k) {
            double s = 0.0;
            for (long a = 0; a < n; ++a) s += std::max(floor, eps / (k - c(a)));
            return s;
        };
        const double k = dual_root(mass, c.maxCoeff(), std::max(1.0, eps));
        for (long a = 0; a < n; ++a) pi(a) = std::max(floor, eps / (k - c(a)));
    }
    return fixup_mass(std::move(pi));
}

/**
 * On the fixed-mass simplex, translating a gradient along the all-ones
 * direction does not change the projected step, so the mean is removed
 * before projecting. This avoids adding a large common offset to tiny
 * near-floor coordinates and then cancelling it away inside the projection.
 */
Vec reduce_mean(Vec g) {
    g.array() -= g.mean();
    return g;
}

}  // namespace

double objective_J(int i, const JointProfile& z, const PayoffPair& R,
                   const RiskProfile& profile) {
    profile.validate();
    R.validate();
    Mat A = effective_matrix(i, R);
    const Vec& pi = own_policy(i, z);
    const Vec& pi_other = other_policy(i, z);
    const Vec& p = own_adversary(i, z);
    double reward = pi.dot(A * p);
    double penalty = d_value(profile.kind.d, p, pi_other) / profile.tau[i];
    double reg = profile.eps[i] * nu_value(profile.kind.nu, pi);
    return -reward - penalty + reg;
}

Vec gradient_operator(const JointProfile& z, const PayoffPair& R,
                      const RiskProfile& profile) {
    profile.validate();
    R.validate();
    BlockLayout layout = R.layout();
    Vec g(layout.total());
    g.segment(0, layout.n1) =
        -R.R1 * z.p1 + profile.eps[0] * nu_grad(profile.kind.nu, z.pi1);
    g.segment(layout.n1, layout.n2) =
        -R.R2.transpose() * z.p2 + profile.eps[1] * nu_grad(profile.kind.nu, z.pi2);
    g.segment(layout.n1 + layout.n2, layout.n2) =
        R.R1.transpose() * z.pi1 + d_grad_p(profile.kind.d, z.p1, z.pi2) / profile.tau[0];
    g.segment(layout.n1 + 2 * layout.n2, layout.n1) =
        R.R2 * z.pi2 + d_grad_p(profile.kind.d, z.p2, z.pi1) / profile.tau[1];
    return g;
}

Vec gradient_operator_risk_neutral(const JointProfile& z, const PayoffPair& R) {
    R.validate();
    BlockLayout layout = R.layout();
    Vec g = Vec::Zero(layout.total());
    g.segment(0, layout.n1) = -R.R1 * z.p1;
    g.segment(layout.n1, layout.n2) = -R.R2.transpose() * z.p2;
    return g;
}

InnerSupResult best_response_p(int i, const Vec& pi_own, const Vec& pi_other,
                               const PayoffPair& R, const RiskProfile& profile,
                               double floor, double tol, long max_iter,
                               const Vec* warm_start) {
    profile.validate();
    Mat A = effective_matrix(i, R);
    const double tau = profile.tau[i];
    const DKind dk = profile.kind.d;
    const Vec c = A.transpose() * pi_own;  // linear coefficient of −cᵀp

    auto phi = [&](const Vec& p) { return -c.dot(p) - d_value(dk, p, pi_other) / tau; };
    auto grad = [&](const Vec& p) -> Vec { return -c - d_grad_p(dk, p, pi_other) / tau; };

    Vec p = separable_argmax_p(dk, c, pi_other, tau, floor);
    if (warm_start != nullptr && warm_start->size() == c.size()) {
        Vec w = project_simplex(*warm_start, floor);
        // Adopt the warm start only on a clear win: the dual start is the
        // exact optimum, so a raw float-noise "improvement" in a flat valley
        // would trade a zero-residual point for one the ascent loop cannot
        // polish below tolerance.
        if (phi(w) > phi(p) + 1e-12 * (1.0 + std::abs(phi(p)))) p = w;
    }

    double step = 1.0;
    double value = phi(p);
    long it = 0;
    for (; it < max_iter; ++it) {
        Vec g = reduce_mean(grad(p));
        // Fixed-point residual of the unit-step projected ascent map.
        double residual = (p - project_simplex(p + g, floor)).norm();
        if (residual <= tol) break;

        // Backtracking line search on the concave objective.
        Vec p_next;
        double value_next;
        for (;;) {
            p_next = project_simplex(p + step * g, floor);
            Vec d = p_next - p;
            value_next = phi(p_next);
            if (value_next >= value + 0.25 * g.dot(d) || d.norm() <= 1e-16) break;
            step *= 0.5;
            if (step < 1e-18) break;
        }
        p = p_next;
        value = value_next;
        step = std::min(step * 2.0, 1e6);
    }
    if (it >= max_iter) {
        Vec g = reduce_mean(grad(p));
        double residual = (p - project_simplex(p + g, floor)).norm();
        if (residual > 10 * tol) {
            throw std::runtime_error(
                "best_response_p: inner ascent did not reach tolerance; residual " +
                std::to_string(residual));
        }
    }
    return InnerSupResult{p, value, it};
}

InnerSupResult best_response_pi(int i, const Vec& p_own, const PayoffPair& R,
                                const RiskProfile& profile, double floor, double tol,
                                long max_iter, const Vec* warm_start) {
    profile.validate();
    Mat A = effective_matrix(i, R);
    const double eps = profile.eps[i];
    const NuKind nk = profile.kind.nu;
    const Vec c = A * p_own;  // minimize −cᵀπ + εν(π)

    auto h = [&](const Vec& pi) { return -c.dot(pi) + eps * nu_value(nk, pi); };
    auto grad = [&](const Vec& pi) -> Vec { return -c + eps * nu_grad(nk, pi); };

    Vec pi = separable_argmin_pi(nk, c, eps, floor);
    if (warm_start != nullptr && warm_start->size() == c.size()) {
        Vec w = project_simplex(*warm_start, floor);
        // Same clear-win rule as best_response_p: never trade the exact dual
        // start for a float-noise improvement.
        if (h(w) < h(pi) - 1e-12 * (1.0 + std::abs(h(pi)))) pi = w;
    }

    double step = 1.0;
    double value = h(pi);
    long it = 0;
    for (; it < max_iter; ++it) {
        Vec g = reduce_mean(grad(pi));
        double residual = (pi - project_simplex(pi - g, floor)).norm();
        if (residual <= tol) break;

        Vec pi_next;
        double value_next;
        for (;;) {
            pi_next = project_simplex(pi - step * g, floor);
            Vec d = pi_next - pi;
            value_next = h(pi_next);
            if (value_next <= value + 0.25 * g.dot(d) || d.norm() <= 1e-16) break;
            step *= 0.5;
            if (step < 1e-18) break;
        }
        pi = pi_next;
        value = value_next;
        step = std::min(step * 2.0, 1e6);
    }
    if (it >= max_iter) {
        Vec g = reduce_mean(grad(pi));
        double residual = (pi - project_simplex(pi - g, floor)).norm();
        if (residual > 10 * tol) {
            throw std::runtime_error(
                "best_response_pi: inner descent did not reach tolerance; residual " +
                std::to_string(residual));
        }
    }
    return InnerSupResult{pi, value, it};
}

double f_value(int i, const Vec& pi_own, const Vec& pi_other, const PayoffPair& R,
               const RiskProfile& profile, double floor, double tol) {
    InnerSupResult inner = best_response_p(i, pi_own, pi_other, R, profile, floor, tol);
    return inner.value + profile.eps[i] * nu_value(profile.kind.nu, pi_own);
}

double rqe_gap(const JointProfile& z, const PayoffPair& R, const RiskProfile& profile,
               int n_probe, std::uint64_t seed) {
    profile.validate();
    R.validate();
    PolicyFloors floors = operating_floors(profile, R.span(), {R.n1(), R.n2()});
    SplitMix64 rng(SplitMix64::derive(seed, 0xD3));

    double gap = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
        const Vec& pi = own_policy(i, z);
        const Vec& pi_other = other_policy(i, z);
        double f_here = f_value(i, pi, pi_other, R, profile, floors.p_floor[i]);
        int n = static_cast<int>(pi.size());
        for (int k = 0; k < n_probe; ++k) {
            Vec probe = project_simplex(rng.dirichlet(n, 1.0), floors.pi_floor[i]);
            double f_probe = f_value(i, probe, pi_other, R, profile, floors.p_floor[i]);
            gap = std::max(gap, f_here - f_probe);
        }
    }
    return gap;
}

}  // namespace rqe
