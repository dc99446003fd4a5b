#pragma once

#include "rqe/markov_game.hpp"

#include <cstdint>

namespace rqe {

/** The 2×2 inspection game of the normal-form experiments. */
PayoffPair inspection_game();

/**
 * One-state embedding of the inspection game with self-loop transitions and
 * rewards affinely rescaled into [0,1] per matrix ((R_i − min)/span); the
 * rescale preserves the equilibrium policies.
 */
MarkovGame inspection_mg(double gamma);

/**
 * Geometry of the two-agent 5×5 gridworld: each agent owns an absorbing
 * defection corner, shares a sticky cooperation corner, and starts in the
 * top-left. Cells are (row, col) with row 0 at the top.
 */
struct GridworldSpec {
    int size = 5;
    double coop_stay_prob = 0.7;
    std::array<int, 2> defect0{0, 4};  ///< agent 0's defection zone (top-right)
    std::array<int, 2> defect1{4, 0};  ///< agent 1's defection zone (bottom-left)
    std::array<int, 2> coop{4, 4};     ///< shared cooperation zone (bottom-right)
    std::array<int, 2> start{0, 0};    ///< both agents start here (top-left)

    int n_cells() const { return size * size; }
    int cell(int row, int col) const { return row * size + col; }
    void validate() const;
};

/**
 * Joint-state Markov game over agent-position pairs (625 states, 5 moves
 * each: up, down, left, right, stay). Rewards depend on the current joint
 * position only and are rescaled by the global maximum 3 into [0,1]:
 * an agent in the cooperation zone earns 0.5 / 1 / 2 as the other agent is
 * in its own defection zone / blank space / the cooperation zone; an agent
 * in its own defection zone earns 3 exactly when the other cooperates.
 * Own defection zones absorb; the cooperation zone holds with probability
 * coop_stay_prob, otherwise the chosen move resolves normally; moves off
 * the board are replaced by a uniform draw over the remaining feasible
 * moves including staying.
 */
MarkovGame gridworld_mg(double gamma, const GridworldSpec& spec = {});

/**
 * Seeded random game: rewards uniform on [0,1]; each transition row is a
 * Dirichlet(1) draw projected onto the simplex floored at 0.01/n_states so
 * every entry stays at or above the floor (irreducibility by construction);
 * rho0 uniform.
 */
MarkovGame random_mg(int n_states, std::array<int, 2> n_actions, double gamma,
                     std::uint64_t seed);

}  // namespace rqe
