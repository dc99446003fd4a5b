#include "rqe/regularizers.hpp"

namespace rqe {

namespace {

void require_positive(const Vec& v, const char* what) {
    require_finite(v, what);
    if ((v.array() <= 0.0).any()) {
        throw std::domain_error(std::string(what) + ": vector has a non-positive entry");
    }
}

}  // namespace

double nu_value(NuKind kind, const Vec& pi) {
    require_positive(pi, "nu_value");
    switch (kind) {
        case NuKind::NegativeEntropy:
            return (pi.array() * pi.array().log()).sum();
        case NuKind::LogBarrier:
            return -pi.array().log().sum();
    }
    throw std::logic_error("nu_value: unknown kind");
}

Vec nu_grad(NuKind kind, const Vec& pi) {
    require_positive(pi, "nu_grad");
    switch (kind) {
        case NuKind::NegativeEntropy:
            return (pi.array().log() + 1.0).matrix();
        case NuKind::LogBarrier:
            return (-pi.array().inverse()).matrix();
    }
    throw std::logic_error("nu_grad: unknown kind");
}

Vec nu_hess_diag(NuKind kind, const Vec& pi) {
    require_positive(pi, "nu_hess_diag");
    switch (kind) {
        case NuKind::NegativeEntropy:
            return pi.array().inverse().matrix();
        case NuKind::LogBarrier:
            return pi.array().square().inverse().matrix();
    }
    throw std::logic_error("nu_hess_diag: unknown kind");
}

double d_value(DKind kind, const Vec& p, const Vec& pi) {
    require_positive(p, "d_value(p)");
    require_positive(pi, "d_value(pi)");
    if (p.size() != pi.size()) throw std::invalid_argument("d_value: dimension mismatch");
    switch (kind) {
        case DKind::KL:
            return (p.array() * (p.array() / pi.array()).log()).sum();
        case DKind::ReverseKL:
            return (pi.array() * (pi.array() / p.array()).log()).sum();
    }
    throw std::logic_error("d_value: unknown kind");
}

Vec d_grad_p(DKind kind, const Vec& p, const Vec& pi) {
    require_positive(p, "d_grad_p(p)");
    require_positive(pi, "d_grad_p(pi)");
    if (p.size() != pi.size()) throw std::invalid_argument("d_grad_p: dimension mismatch");
    switch (kind) {
        case DKind::KL:
            return ((p.array() / pi.array()).log() + 1.0).matrix();
        case DKind::ReverseKL:
            return (-pi.array() / p.array()).matrix();
    }
    throw std::logic_error("d_grad_p: unknown kind");
}

DHessBlocks d_hess_blocks(DKind kind, const Vec& p, const Vec& pi) {
    require_positive(p, "d_hess_blocks(p)");
    require_positive(pi, "d_hess_blocks(pi)");
    if (p.size() != pi.size()) throw std::invalid_argument("d_hess_blocks: dimension mismatch");
    DHessBlocks b;
    switch (kind) {
        case DKind::KL:
            b.h_pp = p.array().inverse().matrix();
            b.h_ppi = (-pi.array().inverse()).matrix();
            b.h_pipi = (p.array() / pi.array().square()).matrix();
            return b;
        case DKind::ReverseKL:
            b.h_pp = (pi.array() / p.array().square()).matrix();
            b.h_ppi = (-p.array().inverse()).matrix();
            b.h_pipi = pi.array().inverse().matrix();
            return b;
    }
    throw std::logic_error("d_hess_blocks: unknown kind");
}

PolicyFloors policy_floor(const RiskProfile& profile, double payoff_span,
                          std::array<int, 2> n_actions) {
    profile.validate();
    if (payoff_span < 0.0) throw std::invalid_argument("policy_floor: negative span");
    PolicyFloors f;
    for (int i = 0; i < 2; ++i) {
        double n_own = n_actions[i];
        double n_opp = n_actions[1 - i];
        double eps = profile.eps[i];
        double tau = profile.tau[i];
        if (profile.kind.nu == NuKind::LogBarrier) {
            f.pi_floor[i] = eps / (eps * n_own + payoff_span);
            // Adversary p_i lives on Δ_{|A_{-i}|}; same bound, roles swapped.
            f.p_floor[i] = eps / (eps * n_opp + payoff_span);
        } else {
            f.pi_floor[i] = std::exp(-payoff_span) / n_own;
            f.p_floor[i] = std::exp(-payoff_span) / (n_own * (n_opp + tau * payoff_span));
        }
    }
    return f;
}

PolicyFloors operating_floors(const RiskProfile& profile, double payoff_span,
                              std::array<int, 2> n_actions) {
    PolicyFloors t = policy_floor(profile, payoff_span, n_actions);
    PolicyFloors f;
    for (int i = 0; i < 2; ++i) {
        f.pi_floor[i] = operating_floor(t.pi_floor[i]);
        f.p_floor[i] = operating_floor(t.p_floor[i]);
    }
    return f;
}

}  // namespace rqe
