#include <doctest.h>

#include "rqe/regularizers.hpp"
#include "rqe/rng.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <cmath>

using rqe::DKind;
using rqe::NuKind;
using rqe::Vec;
using testutil::to_std;
using testutil::to_vec;

namespace {

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST_SUITE("regularizers") {

TEST_CASE("nu: pinned examples") {
    Vec half = to_vec({0.5, 0.5});

    CHECK(rqe::nu_value(NuKind::NegativeEntropy, half) ==
          doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    // Gradient against the finite-difference oracle (step 1e-6) and the
    // closed form 1 + log(0.5) = 0.306853...
    auto ne_val = [](const std::vector<double>& x) {
        return rqe::nu_value(NuKind::NegativeEntropy, testutil::to_vec(x));
    };
    auto fd = oracle::fd_gradient(ne_val, {0.5, 0.5}, 1e-6);
    Vec g = rqe::nu_grad(NuKind::NegativeEntropy, half);
    CHECK(rel_err(g(0), 1.0 + std::log(0.5)) <= 1e-12);
    CHECK(rel_err(g(0), 0.306853) <= 1e-5);
    CHECK(oracle::max_abs_diff(to_std(g), fd) <= 1e-7);

    Vec lb_g = rqe::nu_grad(NuKind::LogBarrier, half);
    CHECK(lb_g(0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(lb_g(1) == doctest::Approx(-2.0).epsilon(1e-12));
    Vec lb_h = rqe::nu_hess_diag(NuKind::LogBarrier, half);
    CHECK(lb_h(0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(lb_h(1) == doctest::Approx(4.0).epsilon(1e-12));

    for (int n : {2, 3, 5, 11}) {
        Vec u = Vec::Constant(n, 1.0 / n);
        CHECK(rqe::nu_value(NuKind::NegativeEntropy, u) ==
              doctest::Approx(-std::log(double(n))).epsilon(1e-12));
    }
}

TEST_CASE("d: pinned examples") {
    Vec p37 = to_vec({0.3, 0.7});
    CHECK(std::abs(rqe::d_value(DKind::KL, p37, p37)) <= 1e-14);

    // Direct-summation oracle: 0.5 log 2 + 0.5 log(2/3).
    const double want = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
    CHECK(rqe::d_value(DKind::KL, to_vec({0.5, 0.5}), to_vec({0.25, 0.75})) ==
          doctest::Approx(want).epsilon(1e-12));
    CHECK(rel_err(want, 0.143841) <= 1e-5);

    Vec half = to_vec({0.5, 0.5});
    Vec rg = rqe::d_grad_p(DKind::ReverseKL, half, half);
    CHECK(rg(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(rg(1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences on 200 random interior points") {
    rqe::SplitMix64 rng(101);
    int done = 0;
    while (done < 200) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 4);
        Vec pi = testutil::random_simplex(rng, n, 0.05);
        Vec p = testutil::random_simplex(rng, n, 0.05);
        for (NuKind k : {NuKind::NegativeEntropy, NuKind::LogBarrier}) {
            auto f = [&](const std::vector<double>& x) {
                return rqe::nu_value(k, testutil::to_vec(x));
            };
            auto fd = oracle::fd_gradient(f, to_std(pi), 1e-6);
            Vec g = rqe::nu_grad(k, pi);
            for (int a = 0; a < n; ++a) CHECK(rel_err(g(a), fd[size_t(a)]) <= 1e-5);
        }
        for (DKind k : {DKind::KL, DKind::ReverseKL}) {
            auto f = [&](const std::vector<double>& x) {
                return rqe::d_value(k, testutil::to_vec(x), pi);
            };
            auto fd = oracle::fd_gradient(f, to_std(p), 1e-6);
            Vec g = rqe::d_grad_p(k, p, pi);
            for (int a = 0; a < n; ++a) CHECK(rel_err(g(a), fd[size_t(a)]) <= 1e-5);
        }
        ++done;
    }
}

TEST_CASE("hessian blocks match finite differences on 100 random interior points") {
    rqe::SplitMix64 rng(103);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);
        Vec pi = testutil::random_simplex(rng, n, 0.08);
        Vec p = testutil::random_simplex(rng, n, 0.08);

        for (NuKind k : {NuKind::NegativeEntropy, NuKind::LogBarrier}) {
            Vec h = rqe::nu_hess_diag(k, pi);
            for (int a = 0; a < n; ++a) {
                auto ga = [&](const std::vector<double>& x) {
                    return rqe::nu_grad(k, testutil::to_vec(x))(a);
                };
                const double fd = oracle::fd_partial(ga, to_std(pi), size_t(a), 1e-6);
                CHECK(rel_err(h(a), fd) <= 1e-4);
            }
        }

        for (DKind k : {DKind::KL, DKind::ReverseKL}) {
            rqe::DHessBlocks blocks = rqe::d_hess_blocks(k, p, pi);
            // Value as a function of the stacked coordinates (p, pi).
            auto val = [&](const std::vector<double>& x) {
                std::vector<double> pp(x.begin(), x.begin() + n);
                std::vector<double> qq(x.begin() + n, x.end());
                return rqe::d_value(k, testutil::to_vec(pp), testutil::to_vec(qq));
            };
            std::vector<double> stacked = to_std(p);
            for (double v : to_std(pi)) stacked.push_back(v);
            for (int a = 0; a < n; ++a) {
                // H_pp via a first difference of the analytic p-gradient.
                auto gpa = [&](const std::vector<double>& x) {
                    return rqe::d_grad_p(k, testutil::to_vec(x), pi)(a);
                };
                const double fd_pp = oracle::fd_partial(gpa, to_std(p), size_t(a), 1e-6);
                CHECK(rel_err(blocks.h_pp(a), fd_pp) <= 1e-4);
                // Mixed and pi-pi blocks via second differences of the value.
                const double fd_ppi =
                    oracle::fd_second(val, stacked, size_t(a), size_t(n + a), 1e-4);
                CHECK(rel_err(blocks.h_ppi(a), fd_ppi) <= 1e-4);
                const double fd_pipi =
                    oracle::fd_second(val, stacked, size_t(n + a), size_t(n + a), 1e-4);
                CHECK(rel_err(blocks.h_pipi(a), fd_pipi) <= 1e-4);
            }
            // The closed forms are diagonal: a couple of cross terms vanish.
            if (n >= 2) {
                CHECK(std::abs(oracle::fd_second(val, stacked, 0, 1, 1e-4)) <= 1e-4);
                CHECK(std::abs(oracle::fd_second(val, stacked, 0, size_t(n + 1), 1e-4)) <= 1e-4);
            }
        }
    }
}

TEST_CASE("d is jointly convex and non-negative with equality only at p = pi") {
    rqe::SplitMix64 rng(107);
    for (DKind k : {DKind::KL, DKind::ReverseKL}) {
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng.next_u64() % 4);
            Vec p = testutil::random_simplex(rng, n, 0.02);
            Vec pi = testutil::random_simplex(rng, n, 0.02);
            Vec p2 = testutil::random_simplex(rng, n, 0.02);
            Vec pi2 = testutil::random_simplex(rng, n, 0.02);
            const double t = rng.uniform(0.05, 0.95);
            const double mix =
                rqe::d_value(k, t * p + (1 - t) * p2, t * pi + (1 - t) * pi2);
            const double bound =
                t * rqe::d_value(k, p, pi) + (1 - t) * rqe::d_value(k, p2, pi2);
            CHECK(mix <= bound + 1e-10);

            CHECK(rqe::d_value(k, p, pi) >= -1e-15);
            CHECK(std::abs(rqe::d_value(k, p, p)) <= 1e-12);
            if ((p - pi).cwiseAbs().maxCoeff() > 1e-2) {
                CHECK(rqe::d_value(k, p, pi) > 1e-10);
            }
        }
    }
}

TEST_CASE("zero entries raise domain errors") {
    Vec z = to_vec({0.0, 1.0});
    Vec ok = to_vec({0.5, 0.5});
    for (NuKind k : {NuKind::NegativeEntropy, NuKind::LogBarrier}) {
        CHECK_THROWS_AS(rqe::nu_value(k, z), std::domain_error);
        CHECK_THROWS_AS(rqe::nu_grad(k, z), std::domain_error);
        CHECK_THROWS_AS(rqe::nu_hess_diag(k, z), std::domain_error);
    }
    for (DKind k : {DKind::KL, DKind::ReverseKL}) {
        CHECK_THROWS_AS(rqe::d_value(k, z, ok), std::domain_error);
        CHECK_THROWS_AS(rqe::d_value(k, ok, z), std::domain_error);
        CHECK_THROWS_AS(rqe::d_grad_p(k, z, ok), std::domain_error);
        CHECK_THROWS_AS(rqe::d_hess_blocks(k, ok, z), std::domain_error);
    }
}

TEST_CASE("policy_floor: pinned examples") {
    std::array<int, 2> n22{2, 2};

    rqe::RiskProfile kl;  // LogBarrier/KL by default
    kl.eps = {0.2, 0.2};
    rqe::PolicyFloors f = rqe::policy_floor(kl, 5.0, n22);
    CHECK(f.pi_floor[0] == doctest::Approx(0.2 / (0.2 * 2 + 5.0)).epsilon(1e-12));
    CHECK(rel_err(f.pi_floor[0], 0.037037) <= 1e-4);
    CHECK(f.pi_floor[1] == doctest::Approx(f.pi_floor[0]).epsilon(1e-12));

    rqe::PolicyFloors f0 = rqe::policy_floor(kl, 0.0, n22);
    CHECK(f0.pi_floor[0] == doctest::Approx(0.5).epsilon(1e-12));

    rqe::RiskProfile ne;
    ne.kind = {NuKind::NegativeEntropy, DKind::ReverseKL};
    ne.eps = {0.2, 0.2};
    rqe::PolicyFloors g0 = rqe::policy_floor(ne, 0.0, n22);
    CHECK(g0.pi_floor[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("policy_floor: formula structure for asymmetric games") {
    std::array<int, 2> n23{2, 3};
    rqe::RiskProfile kl;
    kl.eps = {0.2, 0.3};
    rqe::PolicyFloors f = rqe::policy_floor(kl, 5.0, n23);
    CHECK(f.pi_floor[0] == doctest::Approx(0.2 / (0.2 * 2 + 5.0)).epsilon(1e-12));
    CHECK(f.pi_floor[1] == doctest::Approx(0.3 / (0.3 * 3 + 5.0)).epsilon(1e-12));
    // Adversary p_i lives on the opponent's action set.
    CHECK(f.p_floor[0] == doctest::Approx(0.2 / (0.2 * 3 + 5.0)).epsilon(1e-12));
    CHECK(f.p_floor[1] == doctest::Approx(0.3 / (0.3 * 2 + 5.0)).epsilon(1e-12));

    rqe::RiskProfile ne;
    ne.kind = {NuKind::NegativeEntropy, DKind::ReverseKL};
    ne.tau = {2.0, 4.0};
    rqe::PolicyFloors g = rqe::policy_floor(ne, 5.0, n23);
    CHECK(g.pi_floor[0] == doctest::Approx(std::exp(-5.0) / 2.0).epsilon(1e-12));
    CHECK(g.pi_floor[1] == doctest::Approx(std::exp(-5.0) / 3.0).epsilon(1e-12));
    CHECK(g.p_floor[0] ==
          doctest::Approx(std::exp(-5.0) / (2.0 * (3.0 + 2.0 * 5.0))).epsilon(1e-12));
    CHECK(g.p_floor[1] ==
          doctest::Approx(std::exp(-5.0) / (3.0 * (2.0 + 4.0 * 5.0))).epsilon(1e-12));

    // Floors are positive and below the uniform weight.
    for (int i = 0; i < 2; ++i) {
        CHECK(f.pi_floor[i] > 0.0);
        CHECK(f.pi_floor[i] < 0.51);
        CHECK(g.p_floor[i] > 0.0);
    }
}

TEST_CASE("operating floors halve and cap the theoretical bounds") {
    CHECK(rqe::operating_floor(0.4) == doctest::Approx(1e-6));
    CHECK(rqe::operating_floor(1e-7) == doctest::Approx(5e-8));

    rqe::RiskProfile kl;
    rqe::PolicyFloors th = rqe::policy_floor(kl, 5.0, {2, 2});
    rqe::PolicyFloors op = rqe::operating_floors(kl, 5.0, {2, 2});
    for (int i = 0; i < 2; ++i) {
        CHECK(op.pi_floor[i] == doctest::Approx(rqe::operating_floor(th.pi_floor[i])));
        CHECK(op.p_floor[i] == doctest::Approx(rqe::operating_floor(th.p_floor[i])));
    }
}

TEST_CASE("RegularizerKind and RiskProfile validation") {
    rqe::RegularizerKind bad1{NuKind::LogBarrier, DKind::ReverseKL};
    rqe::RegularizerKind bad2{NuKind::NegativeEntropy, DKind::KL};
    CHECK(!bad1.legal());
    CHECK(!bad2.legal());
    CHECK_THROWS_AS(bad1.validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);

    rqe::RiskProfile p;
    p.tau = {0.0, 5.0};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.tau = {5.0, 5.0};
    p.eps = {0.2, -0.1};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.eps = {0.2, 0.2};
    CHECK_NOTHROW(p.validate());
}

}  // TEST_SUITE
