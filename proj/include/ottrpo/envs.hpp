#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ottrpo/mdp.hpp"

namespace ottrpo {

// ---------------------------------------------------------------------------
// CliffWalking: 4x12 grid, deterministic moves clipped at walls, -1 per step,
// stepping onto a cliff cell gives -100 and teleports to the start without
// terminating, the goal terminates. Actions: 0=Up, 1=Right, 2=Down, 3=Left.
// ---------------------------------------------------------------------------

namespace cliff {
constexpr int kRows = 4;
constexpr int kCols = 12;
constexpr int kUp = 0, kRight = 1, kDown = 2, kLeft = 3;
inline int state_of(int row, int col) { return row * kCols + col; }
inline int start_state() { return state_of(kRows - 1, 0); }
inline int goal_state() { return state_of(kRows - 1, kCols - 1); }
inline bool is_cliff(int row, int col) { return row == kRows - 1 && col > 0 && col < kCols - 1; }
}  // namespace cliff

inline TabularMdp build_cliffwalking() {
    using namespace cliff;
    TabularMdp mdp;
    mdp.n_states = static_cast<std::size_t>(kRows * kCols);
    mdp.n_actions = 4;
    mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    mdp.reward = Matrix(mdp.n_states, mdp.n_actions, 0.0);
    mdp.start_dist.assign(mdp.n_states, 0.0);
    mdp.start_dist[static_cast<std::size_t>(start_state())] = 1.0;
    mdp.discount = 0.99;
    mdp.terminal.assign(mdp.n_states, false);
    mdp.terminal[static_cast<std::size_t>(goal_state())] = true;
    mdp.max_episode_steps = 200;

    for (int row = 0; row < kRows; ++row) {
        for (int col = 0; col < kCols; ++col) {
            const int s = state_of(row, col);
            for (int a = 0; a < 4; ++a) {
                if (s == goal_state()) {
                    mdp.p(s, a, s) = 1.0;
                    continue;
                }
                int r2 = row, c2 = col;
                if (a == kUp) r2 = std::max(row - 1, 0);
                if (a == kDown) r2 = std::min(row + 1, kRows - 1);
                if (a == kLeft) c2 = std::max(col - 1, 0);
                if (a == kRight) c2 = std::min(col + 1, kCols - 1);
                if (is_cliff(r2, c2)) {
                    mdp.reward(s, a) = -100.0;
                    mdp.p(s, a, start_state()) = 1.0;
                } else {
                    mdp.reward(s, a) = -1.0;
                    mdp.p(s, a, state_of(r2, c2)) = 1.0;
                }
            }
        }
    }
    mdp.validate();
    return mdp;
}

/**
 * The shortest path to the goal: up into the row above the cliff, eleven
 * steps right, down. Undiscounted episode return -13.
 */
inline TabularPolicy cliffwalking_optimal_policy() {
    using namespace cliff;
    std::vector<int> act(static_cast<std::size_t>(kRows * kCols), kDown);
    for (int col = 0; col < kCols; ++col) {
        act[static_cast<std::size_t>(state_of(0, col))] = kDown;
        act[static_cast<std::size_t>(state_of(1, col))] = col < kCols - 1 ? kRight : kDown;
        act[static_cast<std::size_t>(state_of(2, col))] = col < kCols - 1 ? kRight : kDown;
    }
    act[static_cast<std::size_t>(start_state())] = kUp;
    return TabularPolicy::deterministic(act, 4);
}

/**
 * The "close" candidate: identical to the optimal policy except one state,
 * where it climbs a further row and travels one row higher. Undiscounted
 * episode return -15. Together with cliffwalking_optimal_policy this pair
 * has disjoint supports at exactly one state.
 */
inline TabularPolicy cliffwalking_candidate_policy() {
    using namespace cliff;
    TabularPolicy pi = cliffwalking_optimal_policy();
    const int s = state_of(2, 0);
    for (int a = 0; a < 4; ++a) pi.probs(static_cast<std::size_t>(s), static_cast<std::size_t>(a)) = 0.0;
    pi.probs(static_cast<std::size_t>(s), kUp) = 1.0;
    return pi;
}

// ---------------------------------------------------------------------------
// Taxi: 5x5 grid with the standard wall layout, 4 landmarks, 500 encoded
// states, 6 actions (0=South, 1=North, 2=East, 3=West, 4=PickUp, 5=DropOff).
// Rewards: -1 per step, +20 successful drop-off (terminates), -10 illegal
// pick-up/drop-off. Dropping a carried passenger at a wrong landmark places
// the passenger there at the usual -1, matching the published dynamics.
// ---------------------------------------------------------------------------

namespace taxi {
constexpr int kGrid = 5;
constexpr int kNumLandmarks = 4;
constexpr int kInTaxi = 4;
constexpr int kSouth = 0, kNorth = 1, kEast = 2, kWest = 3, kPickUp = 4, kDropOff = 5;
/// Landmarks R, G, Y, B as (row, col).
constexpr std::array<std::array<int, 2>, 4> kLandmarks = {{{0, 0}, {0, 4}, {4, 0}, {4, 3}}};

/// index = ((row*5 + col)*5 + passenger)*4 + destination
inline int encode(int row, int col, int passenger, int destination) {
    return ((row * kGrid + col) * 5 + passenger) * kNumLandmarks + destination;
}
inline void decode(int state, int& row, int& col, int& passenger, int& destination) {
    destination = state % kNumLandmarks;
    state /= kNumLandmarks;
    passenger = state % 5;
    state /= 5;
    col = state % kGrid;
    row = state / kGrid;
}

/// True if a wall blocks eastward movement out of (row, col).
inline bool wall_east(int row, int col) {
    if ((row == 0 || row == 1) && col == 1) return true;
    if ((row == 3 || row == 4) && (col == 0 || col == 2)) return true;
    return false;
}
}  // namespace taxi

inline TabularMdp build_taxi() {
    using namespace taxi;
    TabularMdp mdp;
    mdp.n_states = 500;
    mdp.n_actions = 6;
    mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    mdp.reward = Matrix(mdp.n_states, mdp.n_actions, 0.0);
    mdp.start_dist.assign(mdp.n_states, 0.0);
    mdp.discount = 0.99;
    mdp.terminal.assign(mdp.n_states, false);
    mdp.max_episode_steps = 200;

    // Uniform start over states with the passenger waiting somewhere other
    // than the destination.
    int n_starts = 0;
    for (int row = 0; row < kGrid; ++row)
        for (int col = 0; col < kGrid; ++col)
            for (int pass = 0; pass < kNumLandmarks; ++pass)
                for (int dest = 0; dest < kNumLandmarks; ++dest)
                    if (pass != dest) ++n_starts;
    for (int row = 0; row < kGrid; ++row)
        for (int col = 0; col < kGrid; ++col)
            for (int pass = 0; pass < kNumLandmarks; ++pass)
                for (int dest = 0; dest < kNumLandmarks; ++dest)
                    if (pass != dest)
                        mdp.start_dist[static_cast<std::size_t>(encode(row, col, pass, dest))] =
                            1.0 / n_starts;

    for (int row = 0; row < kGrid; ++row)
        for (int col = 0; col < kGrid; ++col)
            for (int pass = 0; pass <= kInTaxi; ++pass)
                for (int dest = 0; dest < kNumLandmarks; ++dest) {
                    const int s = encode(row, col, pass, dest);
                    const bool at_dest = pass == dest;  // passenger delivered
                    if (at_dest) mdp.terminal[static_cast<std::size_t>(s)] = true;
                    for (int a = 0; a < 6; ++a) {
                        if (at_dest) {
                            mdp.p(s, a, s) = 1.0;
                            continue;
                        }
                        int r2 = row, c2 = col, pass2 = pass;
                        double reward = -1.0;
                        switch (a) {
                            case kSouth: r2 = std::min(row + 1, kGrid - 1); break;
                            case kNorth: r2 = std::max(row - 1, 0); break;
                            case kEast:
                                if (!wall_east(row, col)) c2 = std::min(col + 1, kGrid - 1);
                                break;
                            case kWest:
                                if (col > 0 && !wall_east(row, col - 1)) c2 = col - 1;
                                break;
                            case kPickUp:
                                if (pass < kInTaxi && kLandmarks[static_cast<std::size_t>(pass)][0] == row &&
                                    kLandmarks[static_cast<std::size_t>(pass)][1] == col)
                                    pass2 = kInTaxi;
                                else
                                    reward = -10.0;
                                break;
                            case kDropOff: {
                                int here = -1;
                                for (int l = 0; l < kNumLandmarks; ++l)
                                    if (kLandmarks[static_cast<std::size_t>(l)][0] == row &&
                                        kLandmarks[static_cast<std::size_t>(l)][1] == col)
                                        here = l;
                                if (pass == kInTaxi && here >= 0) {
                                    pass2 = here;  // wrong landmark just relocates the passenger
                                    if (here == dest) reward = 20.0;
                                } else {
                                    reward = -10.0;
                                }
                                break;
                            }
                        }
                        mdp.reward(s, a) = reward;
                        mdp.p(s, a, encode(r2, c2, pass2, dest)) = 1.0;
                    }
                }
    mdp.validate();
    return mdp;
}

// ---------------------------------------------------------------------------
// Two-action chain: an agent at s0 moves left (reward -1, to s2) or right
// (reward +1, to s1); both successors are terminal. With pi(L|s0) = theta the
// expected return is 1 - 2*theta regardless of the discount, so the chain is
// built with discount 0 (the task is one-step).
// ---------------------------------------------------------------------------

namespace chain {
constexpr int kStart = 0, kRightTerm = 1, kLeftTerm = 2;
constexpr int kLeft = 0, kRight = 1;
}  // namespace chain

inline TabularMdp build_two_action_chain() {
    using namespace chain;
    TabularMdp mdp;
    mdp.n_states = 3;
    mdp.n_actions = 2;
    mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    mdp.reward = Matrix(3, 2, 0.0);
    mdp.start_dist = {1.0, 0.0, 0.0};
    mdp.discount = 0.0;
    mdp.terminal = {false, true, true};
    mdp.max_episode_steps = 10;

    mdp.reward(kStart, kLeft) = -1.0;
    mdp.reward(kStart, kRight) = 1.0;
    mdp.p(kStart, kLeft, kLeftTerm) = 1.0;
    mdp.p(kStart, kRight, kRightTerm) = 1.0;
    for (int a = 0; a < 2; ++a) {
        mdp.p(kRightTerm, a, kRightTerm) = 1.0;
        mdp.p(kLeftTerm, a, kLeftTerm) = 1.0;
    }
    mdp.validate();
    return mdp;
}

/// Chain policy with pi(L|s0) = theta; rows at terminal states are uniform.
inline TabularPolicy chain_policy(double theta) {
    if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("chain_policy: theta outside [0,1]");
    TabularPolicy pi = TabularPolicy::uniform(3, 2);
    pi.probs(chain::kStart, chain::kLeft) = theta;
    pi.probs(chain::kStart, chain::kRight) = 1.0 - theta;
    return pi;
}

inline TabularMdp build_env(const std::string& name) {
    if (name == "cliffwalking") return build_cliffwalking();
    if (name == "taxi") return build_taxi();
    if (name == "chain") return build_two_action_chain();
    throw std::invalid_argument("unknown environment: " + name);
}

}  // namespace ottrpo
