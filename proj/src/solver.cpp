#include "rqe/solver.hpp"

#include "rqe/rng.hpp"

#include <deque>

namespace rqe {

JointProfile projected_step(const JointProfile& z, const PayoffPair& R,
                            const RiskProfile& profile, double eta,
                            const PolicyFloors& floors, bool risk_neutral) {
    BlockLayout layout = R.layout();
    const WeightVector& lam = profile.lambda;
    Vec F = risk_neutral ? gradient_operator_risk_neutral(z, R)
                         : gradient_operator(z, R, profile);
    JointProfile next;
    next.pi1 = project_simplex(z.pi1 - eta * lam.lambda1 * F.segment(0, layout.n1),
                               risk_neutral ? 0.0 : floors.pi_floor[0]);
    next.pi2 = project_simplex(z.pi2 - eta * lam.lambda2 * F.segment(layout.n1, layout.n2),
                               risk_neutral ? 0.0 : floors.pi_floor[1]);
    if (risk_neutral) {
        next.p1 = next.pi2;
        next.p2 = next.pi1;
    } else {
        next.p1 = project_simplex(
            z.p1 - eta * lam.lambda1 * F.segment(layout.n1 + layout.n2, layout.n2),
            floors.p_floor[0]);
        next.p2 = project_simplex(
            z.p2 - eta * lam.lambda2 * F.segment(layout.n1 + 2 * layout.n2, layout.n1),
            floors.p_floor[1]);
    }
    return next;
}

SolveReport solve(const PayoffPair& R, const RiskProfile& profile, const SolveOptions& opts) {
    profile.validate();
    R.validate();
    if (!(opts.eta > 0.0) || !(opts.tol > 0.0)) {
        throw std::invalid_argument("solve: eta and tol must be positive");
    }

    PolicyFloors floors;
    if (opts.floor >= 0.0) {
        floors.pi_floor = {opts.floor, opts.floor};
        floors.p_floor = {opts.floor, opts.floor};
    } else {
        floors = operating_floors(profile, R.span(), {R.n1(), R.n2()});
    }

    JointProfile z = opts.z0 ? *opts.z0 : JointProfile::uniform(R.n1(), R.n2());
    if (opts.risk_neutral) {
        z.p1 = z.pi2;
        z.p2 = z.pi1;
    } else {
        // Snap a caller-supplied start into the feasible set.
        z.pi1 = project_simplex(z.pi1, floors.pi_floor[0]);
        z.pi2 = project_simplex(z.pi2, floors.pi_floor[1]);
        z.p1 = project_simplex(z.p1, floors.p_floor[0]);
        z.p2 = project_simplex(z.p2, floors.p_floor[1]);
    }

    SolveReport report;
    report.floors = floors;
    const double eta0 = opts.eta;
    double eta = opts.eta;
    // Divergence guard: compare the step norm against its value 100
    // iterations ago; a 10× growth halves the step size.
    std::deque<double> window;
    // Stagnation guard: a limit cycle keeps the step norm bounded away from
    // zero without growth, so the divergence guard never fires.  Compare the
    // smallest step norm of consecutive blocks of ~100/eta iterations; less
    // than 1% improvement halves the step size and restarts from uniform.
    // The block length scales with 1/eta so the test is step-size invariant:
    // a contraction at rate eta*mu improves by e^(-100*mu) per block no
    // matter how far eta has been halved, while a cycle stays flat.  The
    // restart matters because a cycle can coexist with the fixed point's
    // basin; continuing from a face-hugging cycle state at the halved step
    // often lands in the same trap, whereas uniform is maximally interior.
    // The convergence threshold scales with eta/eta0 so that halving cannot
    // manufacture convergence: the displacement of a cycle shrinks
    // proportionally to eta, while a true fixed point drives the
    // displacement to zero at any step size.  It is floored at 1e-13 so a
    // long run of halvings cannot push it below double-precision
    // displacement noise.
    constexpr double kMinEta = 1e-7;
    auto block_len = [](double e) { return std::max<long>(2000, std::lround(100.0 / e)); };
    double block_min = std::numeric_limits<double>::infinity();
    double prev_block_min = std::numeric_limits<double>::infinity();
    long block_fill = 0;
    // Ping-pong guard: when a large payoff pins a policy coordinate to the
    // operating floor, the log-barrier gradient there is of order 1/floor and
    // one step flings the iterate to the opposite face, giving a violent
    // cycle whose displacement stays near the simplex diameter.  The
    // stagnation blocks above take ~100/eta iterations to notice; counting
    // near-diameter steps inside short chunks catches it in 200.  A
    // converging trajectory cannot sustain such steps, because near any fixed
    // point the displacement tends to zero.
    long big_steps = 0;
    long chunk_fill = 0;

    auto restart_uniform = [&]() {
        z = JointProfile::uniform(R.n1(), R.n2());
        z.pi1 = project_simplex(z.pi1, floors.pi_floor[0]);
        z.pi2 = project_simplex(z.pi2, floors.pi_floor[1]);
        z.p1 = project_simplex(z.p1, floors.p_floor[0]);
        z.p2 = project_simplex(z.p2, floors.p_floor[1]);
    };

    double step_norm = std::numeric_limits<double>::infinity();
    long t = 0;
    for (; t < opts.max_iter; ++t) {
        JointProfile next = projected_step(z, R, profile, eta, floors, opts.risk_neutral);
        step_norm = z.distance(next);
        z = next;
        if (opts.record_trajectory) {
            TrajectoryRow row;
            row.iteration = t;
            row.step_norm = step_norm;
            if (opts.oracle) row.distance_to_oracle = z.distance(*opts.oracle);
            report.trajectory.push_back(row);
        }
        if (step_norm <= std::max(opts.tol * (eta / eta0), 1e-13)) {
            ++t;
            report.converged = true;
            break;
        }
        bool halved = false;
        window.push_back(step_norm);
        if (window.size() > 100) {
            double old = window.front();
            window.pop_front();
            if (step_norm > 10.0 * old && std::isfinite(old)) {
                eta *= 0.5;
                halved = true;
            }
        }
        if (!opts.risk_neutral && !halved) {
            if (step_norm >= 0.7) ++big_steps;
            if (++chunk_fill >= 200) {
                if (big_steps >= 150 && eta * 0.5 >= kMinEta) {
                    eta *= 0.5;
                    halved = true;
                    restart_uniform();
                }
                big_steps = 0;
                chunk_fill = 0;
            }
        }
        if (!opts.risk_neutral && !halved) {
            block_min = std::min(block_min, step_norm);
            if (++block_fill >= block_len(eta)) {
                if (block_min > 0.99 * prev_block_min && eta * 0.5 >= kMinEta) {
                    eta *= 0.5;
                    halved = true;
                    restart_uniform();
                } else {
                    prev_block_min = block_min;
                    block_min = std::numeric_limits<double>::infinity();
                    block_fill = 0;
                }
            }
        }
        if (halved) {
            window.clear();
            block_min = std::numeric_limits<double>::infinity();
            prev_block_min = std::numeric_limits<double>::infinity();
            block_fill = 0;
            big_steps = 0;
            chunk_fill = 0;
        }
    }

    report.z_star = z;
    report.iterations = t;
    report.final_step_norm = step_norm;
    report.eta_final = eta;
    return report;
}

SolveReport solve_robust(const PayoffPair& R, const RiskProfile& profile,
                         const SolveOptions& opts) {
    SolveReport rep = solve(R, profile, opts);
    if (rep.converged || opts.risk_neutral) return rep;

    const PolicyFloors& floors = rep.floors;
    long iters = rep.iterations;

    // Shared acceptance test: one plain projected step at the caller's eta.
    // An exact fixed point satisfies z = Proj(z − ηΛF(z)) for every η, so a
    // recovered candidate is held to the same criterion solve applies at an
    // unhalved step.
    auto accept = [&](const JointProfile& cand, double* disp) {
        JointProfile nxt = projected_step(cand, R, profile, opts.eta, floors, false);
        *disp = cand.distance(nxt);
        return *disp <= std::max(opts.tol, 1e-13);
    };
    auto finish = [&](const JointProfile& cand, double disp) {
        rep.converged = true;
        rep.z_star = cand;
        rep.final_step_norm = disp;
        rep.eta_final = opts.eta;
        rep.iterations = iters;
        return rep;
    };
    auto uniform_start = [&]() {
        JointProfile z = JointProfile::uniform(R.n1(), R.n2());
        z.pi1 = project_simplex(z.pi1, floors.pi_floor[0]);
        z.pi2 = project_simplex(z.pi2, floors.pi_floor[1]);
        z.p1 = project_simplex(z.p1, floors.p_floor[0]);
        z.p2 = project_simplex(z.p2, floors.p_floor[1]);
        return z;
    };

    // Phase 2: damped synchronous best response with the exact dual inner
    // solvers. When payoffs dominate the regularizers the best-response map
    // is nearly piecewise constant, so near-pure equilibria are reached in a
    // handful of sweeps; near-mixed ones make the map non-contractive and
    // fall through to phase 3.
    for (double beta : {1.0, 0.5, 0.25}) {
        JointProfile z = uniform_start();
        try {
            for (long s = 0; s < 300; ++s) {
                ++iters;
                InnerSupResult r1 =
                    best_response_p(0, z.pi1, z.pi2, R, profile, floors.p_floor[0], 1e-12);
                InnerSupResult r2 =
                    best_response_p(1, z.pi2, z.pi1, R, profile, floors.p_floor[1], 1e-12);
                InnerSupResult s1 =
                    best_response_pi(0, z.p1, R, profile, floors.pi_floor[0], 1e-12);
                InnerSupResult s2 =
                    best_response_pi(1, z.p2, R, profile, floors.pi_floor[1], 1e-12);
                z.p1 = (1.0 - beta) * z.p1 + beta * r1.p_star;
                z.p2 = (1.0 - beta) * z.p2 + beta * r2.p_star;
                z.pi1 = (1.0 - beta) * z.pi1 + beta * s1.p_star;
                z.pi2 = (1.0 - beta) * z.pi2 + beta * s2.p_star;
                double disp = 0.0;
                if (accept(z, &disp)) return finish(z, disp);
            }
        } catch (const std::exception&) {
            // An inner solver stalling on a best-response subproblem just
            // disqualifies this damping level.
        }
    }

    // Phase 3: extragradient with a backtracked step. Evaluating F at the
    // look-ahead point keeps the iteration stable for steps of order 1/L
    // rather than Re(λ)/|λ|², which is what defeats the explicit iteration
    // on stiff rotational (near-mixed) games. The step contracts when the
    // local Lipschitz test fails and relaxes slowly back toward opts.eta.
    BlockLayout layout = R.layout();
    const WeightVector& lam = profile.lambda;
    auto weighted = [&](Vec f) {
        f.segment(0, layout.n1) *= lam.lambda1;
        f.segment(layout.n1, layout.n2) *= lam.lambda2;
        f.segment(layout.n1 + layout.n2, layout.n2) *= lam.lambda1;
        f.segment(layout.n1 + 2 * layout.n2, layout.n1) *= lam.lambda2;
        return f;
    };
    auto proj_from = [&](const JointProfile& z, const Vec& wf, double e) {
        JointProfile nxt;
        nxt.pi1 = project_simplex(z.pi1 - e * wf.segment(0, layout.n1), floors.pi_floor[0]);
        nxt.pi2 =
            project_simplex(z.pi2 - e * wf.segment(layout.n1, layout.n2), floors.pi_floor[1]);
        nxt.p1 = project_simplex(z.p1 - e * wf.segment(layout.n1 + layout.n2, layout.n2),
                                 floors.p_floor[0]);
        nxt.p2 = project_simplex(z.p2 - e * wf.segment(layout.n1 + 2 * layout.n2, layout.n1),
                                 floors.p_floor[1]);
        return nxt;
    };
    {
        JointProfile z = uniform_start();
        double eta = opts.eta;
        for (long it = 0; it < 150000; ++it) {
            ++iters;
            Vec f = weighted(gradient_operator(z, R, profile));
            JointProfile zt = proj_from(z, f, eta);
            double move = z.distance(zt);
            Vec ft = weighted(gradient_operator(zt, R, profile));
            if (eta * (ft - f).norm() > 0.7 * move) {
                eta *= 0.5;
                if (eta < 1e-9) break;
                continue;
            }
            z = proj_from(z, ft, eta);
            if ((it & 63) == 0) {
                double disp = 0.0;
                if (accept(z, &disp)) return finish(z, disp);
            }
            eta = std::min(eta * 1.02, opts.eta);
        }
        double disp = 0.0;
        if (accept(z, &disp)) return finish(z, disp);
    }

    // Phase 4: forward-backward-forward splitting. The extragradient phase
    // still fails when the stiffness sits in the symmetric part: a policy
    // coordinate pinned near the floor makes the log-barrier force of order
    // 1/floor, the local Lipschitz test rejects every step and eta collapses.
    // Splitting F = B + A with B the pure payoff skew (Lipschitz ≤ ‖R‖) and
    // A the regularizer operator absorbs the barrier into an exact blockwise
    // resolvent, so the fixed step only has to respect the payoff scale. The
    // resolvent is computable because the coupling is triangular: the π
    // blocks depend on nothing else, and each p block only reads the already
    // solved opposing π block.
    {
        auto payoff_part = [&](const JointProfile& z) {
            Vec b(layout.n1 + 2 * layout.n2 + layout.n1);
            b.segment(0, layout.n1) = -R.R1 * z.p1;
            b.segment(layout.n1, layout.n2) = -R.R2.transpose() * z.p2;
            b.segment(layout.n1 + layout.n2, layout.n2) = R.R1.transpose() * z.pi1;
            b.segment(layout.n1 + 2 * layout.n2, layout.n1) = R.R2 * z.pi2;
            return b;
        };
        // Constrained prox of a·h over the floored simplex via the dual
        // scalar: x_k(sigma) = max(floor, root of x + a·h'(x) = y_k − sigma),
        // with sigma bisected until the mass is 1. Each per-coordinate root
        // is a closed-form quadratic (LogBarrier, ReverseKL) or a safeguarded
        // Newton solve on x + a·log x = c (NegativeEntropy, KL).
        auto log_root = [](double a, double c) {
            double x = std::max(c, a);  // x + a log x is increasing; start right of the root
            double lo = 0.0, hi = std::numeric_limits<double>::infinity();
            for (int k = 0; k < 100; ++k) {
                double g = x + a * std::log(x) - c;
                if (g > 0.0) hi = x; else lo = x;
                double step = g / (1.0 + a / x);
                double nx = x - step;
                if (!(nx > lo) || !(nx < hi)) nx = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * x;
                if (std::abs(nx - x) <= 1e-15 * (1.0 + x)) { x = nx; break; }
                x = nx;
            }
            return x;
        };
        auto prox_block = [&](const Vec& y, double a, double floor, bool is_pi,
                              const Vec* pi_other) {
            auto coord = [&](double c, int k) {
                if (is_pi) {
                    if (profile.kind.nu == NuKind::LogBarrier) {
                        // x − a/x = c
                        return 0.5 * (c + std::sqrt(c * c + 4.0 * a));
                    }
                    // NegativeEntropy: x + a(log x + 1) = c
                    return log_root(a, c - a);
                }
                if (profile.kind.d == DKind::KL) {
                    // x + a(log x − log π_k + 1) = c
                    return log_root(a, c - a + a * std::log((*pi_other)(k)));
                }
                // ReverseKL: x − a·π_k/x = c
                double b = a * (*pi_other)(k);
                return 0.5 * (c + std::sqrt(c * c + 4.0 * b));
            };
            auto mass = [&](double sigma) {
                double m = 0.0;
                for (int k = 0; k < y.size(); ++k)
                    m += std::max(floor, coord(y(k) - sigma, k));
                return m;
            };
            double lo = -1.0, hi = 1.0;
            double width = 1.0;
            while (mass(lo) < 1.0) { lo -= width; width *= 2.0; }
            width = 1.0;
            while (mass(hi) > 1.0) { hi += width; width *= 2.0; }
            for (int k = 0; k < 200; ++k) {
                double mid = 0.5 * (lo + hi);
                (mass(mid) > 1.0 ? lo : hi) = mid;
            }
            double sigma = 0.5 * (lo + hi);
            Vec x(y.size());
            for (int k = 0; k < y.size(); ++k) x(k) = std::max(floor, coord(y(k) - sigma, k));
            x /= x.sum();
            return x;
        };
        auto resolvent = [&](const Vec& y, double e) {
            JointProfile out;
            out.pi1 = prox_block(y.segment(0, layout.n1), e * lam.lambda1 * profile.eps[0],
                                 floors.pi_floor[0], true, nullptr);
            out.pi2 = prox_block(y.segment(layout.n1, layout.n2),
                                 e * lam.lambda2 * profile.eps[1], floors.pi_floor[1], true,
                                 nullptr);
            out.p1 = prox_block(y.segment(layout.n1 + layout.n2, layout.n2),
                                e * lam.lambda1 / profile.tau[0], floors.p_floor[0], false,
                                &out.pi2);
            out.p2 = prox_block(y.segment(layout.n1 + 2 * layout.n2, layout.n1),
                                e * lam.lambda2 / profile.tau[1], floors.p_floor[1], false,
                                &out.pi1);
            return out;
        };
        double l_payoff = std::sqrt(R.R1.squaredNorm() + R.R2.squaredNorm()) *
                          std::max(lam.lambda1, lam.lambda2);
        double eta = std::min(opts.eta, 0.7 / std::max(l_payoff, 1e-12));
        JointProfile z = uniform_start();
        for (long it = 0; it < 300000; ++it) {
            ++iters;
            Vec bz = weighted(payoff_part(z));
            JointProfile zt = resolvent(z.stack() - eta * bz, eta);
            Vec bzt = weighted(payoff_part(zt));
            Vec corr = eta * (bzt - bz);
            z.pi1 = project_simplex(zt.pi1 - corr.segment(0, layout.n1), floors.pi_floor[0]);
            z.pi2 = project_simplex(zt.pi2 - corr.segment(layout.n1, layout.n2),
                                    floors.pi_floor[1]);
            z.p1 = project_simplex(zt.p1 - corr.segment(layout.n1 + layout.n2, layout.n2),
                                   floors.p_floor[0]);
            z.p2 = project_simplex(zt.p2 - corr.segment(layout.n1 + 2 * layout.n2, layout.n1),
                                   floors.p_floor[1]);
            if ((it & 15) == 0) {
                double disp = 0.0;
                if (accept(z, &disp)) return finish(z, disp);
            }
        }
        double disp = 0.0;
        if (accept(z, &disp)) return finish(z, disp);
    }
    return rep;  // the failed plain report, converged = false
}

JointProfile brute_force_rqe(const PayoffPair& R, const RiskProfile& profile,
                             double grid_step) {
    profile.validate();
    R.validate();
    if (R.n1() != 2 || R.n2() != 2) {
        throw std::invalid_argument("brute_force_rqe: oracle supports 2x2 games only");
    }
    if (!(grid_step > 0.0) || grid_step > 1e-2 + 1e-15) {
        throw std::invalid_argument("brute_force_rqe: grid_step must be in (0, 1e-2]");
    }

    PolicyFloors floors = operating_floors(profile, R.span(), {2, 2});
    double lo1 = floors.pi_floor[0], lo2 = floors.pi_floor[1];
    auto grid_of = [&](double lo) {
        std::vector<double> g;
        for (double x = lo; x <= 1.0 - lo + 1e-12; x += grid_step) g.push_back(std::min(x, 1.0 - lo));
        if (g.back() < 1.0 - lo - 1e-12) g.push_back(1.0 - lo);
        return g;
    };
    std::vector<double> g1 = grid_of(lo1), g2 = grid_of(lo2);
    int m1 = static_cast<int>(g1.size()), m2 = static_cast<int>(g2.size());

    // f₁(x, y) and f₂(y, x) tabulated over the grid; the inner adversary
    // problem is re-solved (warm-started along columns) for every cell.
    Mat f1(m1, m2), f2(m2, m1);
    for (int j = 0; j < m2; ++j) {
        Vec pi2(2);
        pi2 << g2[j], 1.0 - g2[j];
        Vec warm;
        for (int i = 0; i < m1; ++i) {
            Vec pi1(2);
            pi1 << g1[i], 1.0 - g1[i];
            InnerSupResult r = best_response_p(0, pi1, pi2, R, profile, floors.p_floor[0],
                                               1e-10, 100000, warm.size() ? &warm : nullptr);
            warm = r.p_star;
            f1(i, j) = r.value + profile.eps[0] * nu_value(profile.kind.nu, pi1);
        }
    }
    for (int i = 0; i < m1; ++i) {
        Vec pi1(2);
        pi1 << g1[i], 1.0 - g1[i];
        Vec warm;
        for (int j = 0; j < m2; ++j) {
            Vec pi2(2);
            pi2 << g2[j], 1.0 - g2[j];
            InnerSupResult r = best_response_p(1, pi2, pi1, R, profile, floors.p_floor[1],
                                               1e-10, 100000, warm.size() ? &warm : nullptr);
            warm = r.p_star;
            f2(j, i) = r.value + profile.eps[1] * nu_value(profile.kind.nu, pi2);
        }
    }

    // Column/row minima give each player's grid best response value.
    Vec best1 = f1.colwise().minCoeff();  // per π₂ index
    Vec best2 = f2.colwise().minCoeff();  // per π₁ index

    double best_score = std::numeric_limits<double>::infinity();
    int bi = 0, bj = 0;
    for (int i = 0; i < m1; ++i) {
        for (int j = 0; j < m2; ++j) {
            double improve1 = f1(i, j) - best1(j);
            double improve2 = f2(j, i) - best2(i);
            double score = std::max(improve1, improve2);
            if (score < best_score) {
                best_score = score;
                bi = i;
                bj = j;
            }
        }
    }

    JointProfile z;
    z.pi1 = Vec(2);
    z.pi1 << g1[bi], 1.0 - g1[bi];
    z.pi2 = Vec(2);
    z.pi2 << g2[bj], 1.0 - g2[bj];
    z.p1 = best_response_p(0, z.pi1, z.pi2, R, profile, floors.p_floor[0]).p_star;
    z.p2 = best_response_p(1, z.pi2, z.pi1, R, profile, floors.p_floor[1]).p_star;
    return z;
}

LipschitzProbe lipschitz_probe(const PayoffPair& R, double delta, int n_trials,
                               const RiskProfile& profile, double mu, std::uint64_t seed) {
    profile.validate();
    R.validate();
    if (delta < 1e-6) {
        throw std::invalid_argument("lipschitz_probe: delta must be >= 1e-6");
    }
    if (!(mu > 0.0)) {
        throw std::invalid_argument("lipschitz_probe: requires a certificate with mu > 0");
    }
    if (n_trials < 1) throw std::invalid_argument("lipschitz_probe: n_trials >= 1");

    SolveOptions opts;
    opts.tol = 1e-10;
    opts.max_iter = 2000000;
    SolveReport base = solve(R, profile, opts);
    if (!base.converged) throw std::runtime_error("lipschitz_probe: base solve did not converge");

    SplitMix64 rng(SplitMix64::derive(seed, 0x11C));
    LipschitzProbe probe;
    probe.bound = 2.0 * profile.lambda.max_abs() *
                  (std::sqrt(static_cast<double>(R.n1())) + std::sqrt(static_cast<double>(R.n2()))) /
                  mu;
    for (int trial = 0; trial < n_trials; ++trial) {
        PayoffPair Rp = R;
        double max_diff = 0.0;
        for (Mat* m : {&Rp.R1, &Rp.R2}) {
            for (int r = 0; r < m->rows(); ++r) {
                for (int c = 0; c < m->cols(); ++c) {
                    double noise = rng.uniform(-delta, delta);
                    (*m)(r, c) += noise;
                    max_diff = std::max(max_diff, std::abs(noise));
                }
            }
        }
        SolveOptions po = opts;
        po.z0 = base.z_star;  // warm start; the perturbed optimum is nearby
        SolveReport pert = solve(Rp, profile, po);
        if (!pert.converged) {
            throw std::runtime_error("lipschitz_probe: perturbed solve did not converge");
        }
        double ratio = base.z_star.distance(pert.z_star) / max_diff;
        probe.max_observed_ratio = std::max(probe.max_observed_ratio, ratio);
    }
    probe.holds = probe.max_observed_ratio <= probe.bound;
    return probe;
}

}  // namespace rqe
