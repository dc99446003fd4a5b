#include "rqe/monotonicity.hpp"

#include "rqe/rng.hpp"

#include <Eigen/Eigenvalues>

#include <limits>

namespace rqe {

bool closed_form_test(const RiskProfile& profile) {
    profile.validate();
    return 16.0 * profile.eps[0] * profile.eps[1] * profile.tau[0] * profile.tau[1] > 1.0;
}

LambdaInterval lambda_interval(const RiskProfile& profile) {
    profile.validate();
    LambdaInterval iv;
    iv.lo = 1.0 / (4.0 * profile.eps[1] * profile.tau[0]);
    iv.hi = 4.0 * profile.eps[0] * profile.tau[1];
    iv.ratio = std::sqrt(iv.lo * iv.hi);
    iv.nonempty = iv.lo <= iv.hi;
    return iv;
}

Mat block_matrix_M(int i, const WeightVector& lambda, const JointProfile& z,
                   const RiskProfile& profile) {
    profile.validate();
    lambda.validate();
    if (i != 0 && i != 1) throw std::invalid_argument("block_matrix_M: player index");
    int o = 1 - i;
    const Vec& pi_own = (i == 0) ? z.pi1 : z.pi2;
    const Vec& p_other = (i == 0) ? z.p2 : z.p1;  // opponent's adversary, lives on A_i
    if (p_other.size() != pi_own.size()) {
        throw std::invalid_argument("block_matrix_M: dimension mismatch between pi_i and p_{-i}");
    }
    double li = (i == 0) ? lambda.lambda1 : lambda.lambda2;
    double lo = (i == 0) ? lambda.lambda2 : lambda.lambda1;
    double coeff = lo / profile.tau[o];

    Vec nu_h = nu_hess_diag(profile.kind.nu, pi_own);
    DHessBlocks d_h = d_hess_blocks(profile.kind.d, p_other, pi_own);

    int n = static_cast<int>(pi_own.size());
    Mat M = Mat::Zero(2 * n, 2 * n);
    M.topLeftCorner(n, n).diagonal() = 2.0 * li * profile.eps[i] * nu_h;
    M.topRightCorner(n, n).diagonal() = coeff * d_h.h_ppi;
    M.bottomLeftCorner(n, n).diagonal() = coeff * d_h.h_ppi;
    M.bottomRightCorner(n, n).diagonal() = 2.0 * coeff * d_h.h_pp;
    return M;
}

namespace {

double min_eigenvalue(const Mat& sym) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/** Stratified interior draw: Dirichlet concentration cycles toward faces. */
Vec sample_floored(SplitMix64& rng, int n, double floor, int stratum) {
    static const double kAlphas[] = {1.0, 0.5, 0.15};
    double alpha = kAlphas[stratum % 3];
    return project_simplex(rng.dirichlet(n, alpha), floor);
}

JointProfile sample_profile(SplitMix64& rng, int n1, int n2, double floor, int stratum) {
    JointProfile z;
    z.pi1 = sample_floored(rng, n1, floor, stratum);
    z.pi2 = sample_floored(rng, n2, floor, stratum);
    z.p1 = sample_floored(rng, n2, floor, stratum);
    z.p2 = sample_floored(rng, n1, floor, stratum);
    return z;
}

}  // namespace

MonotonicityCertificate certify(const RiskProfile& profile, std::array<int, 2> n_actions,
                                double floor, int n_samples, std::uint64_t seed) {
    profile.validate();
    if (n_samples < 1) throw std::invalid_argument("certify: n_samples must be >= 1");

    LambdaInterval iv = lambda_interval(profile);
    MonotonicityCertificate cert;
    cert.lambda = WeightVector{1.0, iv.ratio};

    SplitMix64 rng(SplitMix64::derive(seed, 0xCE47));
    double min_eig = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_samples; ++s) {
        JointProfile z = sample_profile(rng, n_actions[0], n_actions[1], floor, s);
        for (int i = 0; i < 2; ++i) {
            min_eig = std::min(min_eig, min_eigenvalue(block_matrix_M(i, cert.lambda, z, profile)));
        }
    }
    cert.min_eigenvalue = min_eig;
    cert.mu = std::max(0.0, min_eig) / 2.0;

    if (closed_form_test(profile)) {
        cert.evidence = Evidence::ClosedForm;
        cert.is_strict = true;
        cert.is_strong = profile.kind.nu == NuKind::LogBarrier && cert.mu > 0.0;
    } else {
        cert.evidence = Evidence::Sampled;
        cert.is_strict = min_eig >= 0.0;
        cert.is_strong = min_eig > 0.0;
    }
    cert.validate();
    return cert;
}

double empirical_monotonicity(const PayoffPair& R, const RiskProfile& profile,
                              const WeightVector& lambda, int n_pairs, double floor,
                              std::uint64_t seed) {
    profile.validate();
    R.validate();
    lambda.validate();
    if (n_pairs < 1) throw std::invalid_argument("empirical_monotonicity: n_pairs >= 1");

    BlockLayout layout = R.layout();
    SplitMix64 rng(SplitMix64::derive(seed, 0xE3B1));
    double min_ratio = std::numeric_limits<double>::infinity();
    int accepted = 0;
    int stratum = 0;
    while (accepted < n_pairs) {
        JointProfile za = sample_profile(rng, layout.n1, layout.n2, floor, stratum);
        JointProfile zb = sample_profile(rng, layout.n1, layout.n2, floor, stratum + 1);
        ++stratum;
        Vec dz = za.stack() - zb.stack();
        double denom = dz.squaredNorm();
        if (std::sqrt(denom) < 1e-9) continue;  // degenerate pair, redraw
        Vec dF = gradient_operator(za, R, profile) - gradient_operator(zb, R, profile);
        double ratio = weighted_inner(dz, dF, lambda, layout) / denom;
        min_ratio = std::min(min_ratio, ratio);
        ++accepted;
    }
    return min_ratio;
}

}  // namespace rqe
