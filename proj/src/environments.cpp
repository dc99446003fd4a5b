#include "rqe/environments.hpp"

#include "rqe/rng.hpp"

#include <cmath>

namespace rqe {

PayoffPair inspection_game() {
    PayoffPair R;
    R.R1.resize(2, 2);
    R.R1 << 0, 5, 3, 3;
    R.R2.resize(2, 2);
    R.R2 << -3, -5, 0, 3;
    return R;
}

MarkovGame inspection_mg(double gamma) {
    if (!(gamma >= 0.0) || gamma >= 1.0) {
        throw std::invalid_argument("inspection_mg: gamma must lie in [0, 1)");
    }
    PayoffPair R = inspection_game();
    auto rescale = [](const Mat& m) -> Mat {
        double lo = m.minCoeff();
        double sp = m.maxCoeff() - lo;
        return (m.array() - lo) / sp;
    };
    Mat r1 = rescale(R.R1);
    Mat r2 = rescale(R.R2);

    MarkovGame mg;
    mg.n_states = 1;
    mg.n_actions = {2, 2};
    mg.gamma = gamma;
    mg.rho0 = Vec::Ones(1);
    mg.r1.resize(4);
    mg.r2.resize(4);
    mg.transition = Mat::Ones(4, 1);
    for (int a1 = 0; a1 < 2; ++a1) {
        for (int a2 = 0; a2 < 2; ++a2) {
            mg.r1(mg.idx(0, a1, a2)) = r1(a1, a2);
            mg.r2(mg.idx(0, a1, a2)) = r2(a1, a2);
        }
    }
    mg.validate();
    return mg;
}

// ── gridworld ────────────────────────────────────────────────────────────────

void GridworldSpec::validate() const {
    if (size < 2) throw std::invalid_argument("GridworldSpec: size must be at least 2");
    if (!(coop_stay_prob >= 0.0 && coop_stay_prob <= 1.0)) {
        throw std::invalid_argument("GridworldSpec: coop_stay_prob must lie in [0, 1]");
    }
    auto in_grid = [&](const std::array<int, 2>& c) {
        return c[0] >= 0 && c[0] < size && c[1] >= 0 && c[1] < size;
    };
    for (const auto& c : {defect0, defect1, coop, start}) {
        if (!in_grid(c)) throw std::invalid_argument("GridworldSpec: cell off the board");
    }
    if (defect0 == defect1 || defect0 == coop || defect1 == coop) {
        throw std::invalid_argument("GridworldSpec: zone cells must be distinct");
    }
}

namespace {

// Moves indexed up, down, left, right, stay.
constexpr int kMoveRow[5] = {-1, 1, 0, 0, 0};
constexpr int kMoveCol[5] = {0, 0, -1, 1, 0};

/** Marginal next-cell distribution for one agent ignoring zone rules. */
Vec plain_move(const GridworldSpec& g, int row, int col, int action) {
    Vec out = Vec::Zero(g.n_cells());
    const int tr = row + kMoveRow[action];
    const int tc = col + kMoveCol[action];
    if (tr >= 0 && tr < g.size && tc >= 0 && tc < g.size) {
        out(g.cell(tr, tc)) = 1.0;
        return out;
    }
    // Infeasible: uniform over the remaining feasible moves, staying included.
    std::vector<int> feasible;
    for (int m = 0; m < 5; ++m) {
        if (m == action) continue;
        const int fr = row + kMoveRow[m];
        const int fc = col + kMoveCol[m];
        if (fr >= 0 && fr < g.size && fc >= 0 && fc < g.size) feasible.push_back(m);
    }
    const double p = 1.0 / static_cast<double>(feasible.size());
    for (int m : feasible) out(g.cell(row + kMoveRow[m], col + kMoveCol[m])) += p;
    return out;
}

/** Next-cell distribution with the agent's absorbing/sticky zone rules. */
Vec agent_move(const GridworldSpec& g, int agent, int pos, int action) {
    const int row = pos / g.size;
    const int col = pos % g.size;
    const int own_defect =
        agent == 0 ? g.cell(g.defect0[0], g.defect0[1]) : g.cell(g.defect1[0], g.defect1[1]);
    const int coop = g.cell(g.coop[0], g.coop[1]);
    if (pos == own_defect) {
        Vec out = Vec::Zero(g.n_cells());
        out(pos) = 1.0;
        return out;
    }
    Vec moved = plain_move(g, row, col, action);
    if (pos == coop) {
        Vec out = (1.0 - g.coop_stay_prob) * moved;
        out(pos) += g.coop_stay_prob;
        return out;
    }
    return moved;
}

/** Unscaled reward of `agent` at joint position (x0, x1). */
double zone_reward(const GridworldSpec& g, int agent, int x0, int x1) {
    const int own = agent == 0 ? x0 : x1;
    const int other = agent == 0 ? x1 : x0;
    const int own_defect =
        agent == 0 ? g.cell(g.defect0[0], g.defect0[1]) : g.cell(g.defect1[0], g.defect1[1]);
    const int other_defect =
        agent == 0 ? g.cell(g.defect1[0], g.defect1[1]) : g.cell(g.defect0[0], g.defect0[1]);
    const int coop = g.cell(g.coop[0], g.coop[1]);
    if (own == coop) {
        if (other == other_defect) return 0.5;
        if (other == coop) return 2.0;
        return 1.0;
    }
    if (own == own_defect) {
        return other == coop ? 3.0 : 0.0;
    }
    return 0.0;
}

}  // namespace

MarkovGame gridworld_mg(double gamma, const GridworldSpec& spec) {
    if (!(gamma >= 0.0) || gamma >= 1.0) {
        throw std::invalid_argument("gridworld_mg: gamma must lie in [0, 1)");
    }
    spec.validate();
    const int cells = spec.n_cells();
    const int n_states = cells * cells;

    MarkovGame mg;
    mg.n_states = n_states;
    mg.n_actions = {5, 5};
    mg.gamma = gamma;
    mg.rho0 = Vec::Zero(n_states);
    mg.rho0(spec.cell(spec.start[0], spec.start[1]) * cells +
            spec.cell(spec.start[0], spec.start[1])) = 1.0;
    mg.r1.resize(mg.n_pairs());
    mg.r2.resize(mg.n_pairs());
    mg.transition = Mat::Zero(mg.n_pairs(), n_states);

    // Per-agent marginals are action-and-position local; precompute them.
    std::vector<Vec> move0(static_cast<std::size_t>(cells) * 5);
    std::vector<Vec> move1(static_cast<std::size_t>(cells) * 5);
    for (int pos = 0; pos < cells; ++pos) {
        for (int a = 0; a < 5; ++a) {
            move0[static_cast<std::size_t>(pos) * 5 + a] = agent_move(spec, 0, pos, a);
            move1[static_cast<std::size_t>(pos) * 5 + a] = agent_move(spec, 1, pos, a);
        }
    }

    for (int x0 = 0; x0 < cells; ++x0) {
        for (int x1 = 0; x1 < cells; ++x1) {
            const int s = x0 * cells + x1;
            const double r1 = zone_reward(spec, 0, x0, x1) / 3.0;
            const double r2 = zone_reward(spec, 1, x0, x1) / 3.0;
            for (int a1 = 0; a1 < 5; ++a1) {
                const Vec& m0 = move0[static_cast<std::size_t>(x0) * 5 + a1];
                for (int a2 = 0; a2 < 5; ++a2) {
                    const Vec& m1 = move1[static_cast<std::size_t>(x1) * 5 + a2];
                    const long k = mg.idx(s, a1, a2);
                    mg.r1(k) = r1;
                    mg.r2(k) = r2;
                    for (int y0 = 0; y0 < cells; ++y0) {
                        if (m0(y0) == 0.0) continue;
                        for (int y1 = 0; y1 < cells; ++y1) {
                            if (m1(y1) == 0.0) continue;
                            mg.transition(k, y0 * cells + y1) = m0(y0) * m1(y1);
                        }
                    }
                }
            }
        }
    }
    mg.validate();
    return mg;
}

MarkovGame random_mg(int n_states, std::array<int, 2> n_actions, double gamma,
                     std::uint64_t seed) {
    if (n_states < 1 || n_actions[0] < 1 || n_actions[1] < 1) {
        throw std::invalid_argument("random_mg: sizes must be positive");
    }
    if (!(gamma >= 0.0) || gamma >= 1.0) {
        throw std::invalid_argument("random_mg: gamma must lie in [0, 1)");
    }
    MarkovGame mg;
    mg.n_states = n_states;
    mg.n_actions = n_actions;
    mg.gamma = gamma;
    mg.rho0 = Vec::Constant(n_states, 1.0 / n_states);

    const long sa = mg.n_pairs();
    mg.r1.resize(sa);
    mg.r2.resize(sa);
    mg.transition.resize(sa, n_states);

    SplitMix64 reward_rng(SplitMix64::derive(seed, 0x01));
    for (long k = 0; k < sa; ++k) mg.r1(k) = reward_rng.uniform();
    for (long k = 0; k < sa; ++k) mg.r2(k) = reward_rng.uniform();

    SplitMix64 transition_rng(SplitMix64::derive(seed, 0x02));
    const double floor = 0.01 / n_states;
    for (long k = 0; k < sa; ++k) {
        Vec row = transition_rng.dirichlet(n_states, 1.0);
        mg.transition.row(k) = project_simplex(row, floor).transpose();
    }
    mg.validate();
    return mg;
}

}  // namespace rqe
