#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ottrpo/matrix.hpp"
#include "ottrpo/rng.hpp"

namespace ottrpo {

/**
 * Finite MDP with dense transition tensor. Terminal states absorb
 * (self-loop under every action) with zero reward; trajectories stop there.
 */
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    /// transition[(s * n_actions + a) * n_states + s'] = p(s' | s, a)
    std::vector<double> transition;
    /// reward(s, a)
    Matrix reward;
    std::vector<double> start_dist;
    double discount = 0.0;
    std::vector<bool> terminal;
    /// 0 means unbounded.
    std::size_t max_episode_steps = 0;

    double p(std::size_t s, std::size_t a, std::size_t s2) const {
        return transition[(s * n_actions + a) * n_states + s2];
    }
    double& p(std::size_t s, std::size_t a, std::size_t s2) {
        return transition[(s * n_actions + a) * n_states + s2];
    }
    std::span<const double> next_state_dist(std::size_t s, std::size_t a) const {
        return {transition.data() + (s * n_actions + a) * n_states, n_states};
    }

    /// Checks row stochasticity, start distribution, discount range and the
    /// terminal self-loop convention. Throws std::invalid_argument.
    void validate() const {
        if (n_states == 0 || n_actions == 0)
            throw std::invalid_argument("TabularMdp: empty state or action space");
        if (!(discount >= 0.0 && discount < 1.0))
            throw std::invalid_argument("TabularMdp: discount must lie in [0,1)");
        if (transition.size() != n_states * n_actions * n_states ||
            reward.rows() != n_states || reward.cols() != n_actions ||
            start_dist.size() != n_states || terminal.size() != n_states)
            throw std::invalid_argument("TabularMdp: inconsistent dimensions");
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_actions; ++a) {
                double sum = 0.0;
                for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                    const double v = p(s, a, s2);
                    if (v < 0.0) throw std::invalid_argument("TabularMdp: negative transition probability");
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
                if (terminal[s]) {
                    if (std::abs(p(s, a, s) - 1.0) > 1e-12 || reward(s, a) != 0.0)
                        throw std::invalid_argument("TabularMdp: terminal state must self-loop with zero reward");
                }
            }
        }
        double rho_sum = 0.0;
        for (double v : start_dist) {
            if (v < 0.0) throw std::invalid_argument("TabularMdp: negative start probability");
            rho_sum += v;
        }
        if (std::abs(rho_sum - 1.0) > 1e-12)
            throw std::invalid_argument("TabularMdp: start distribution does not sum to 1");
    }
};

/// Row-stochastic state x action matrix.
struct TabularPolicy {
    Matrix probs;

    std::size_t n_states() const { return probs.rows(); }
    std::size_t n_actions() const { return probs.cols(); }

    std::span<const double> row(std::size_t s) const { return {probs.row(s), probs.cols()}; }

    void validate() const {
        for (std::size_t s = 0; s < probs.rows(); ++s) {
            double sum = 0.0;
            for (std::size_t a = 0; a < probs.cols(); ++a) {
                if (probs(s, a) < 0.0) throw std::invalid_argument("TabularPolicy: negative probability");
                sum += probs(s, a);
            }
            if (std::abs(sum - 1.0) > 1e-10)
                throw std::invalid_argument("TabularPolicy: row does not sum to 1");
        }
    }

    static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions) {
        TabularPolicy pi;
        pi.probs = Matrix(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
        return pi;
    }

    /// Point-mass policy: action[s] gets probability one in state s.
    static TabularPolicy deterministic(std::span<const int> action, std::size_t n_actions) {
        TabularPolicy pi;
        pi.probs = Matrix(action.size(), n_actions, 0.0);
        for (std::size_t s = 0; s < action.size(); ++s) pi.probs(s, static_cast<std::size_t>(action[s])) = 1.0;
        return pi;
    }
};

struct TrajectoryStep {
    int state;
    int action;
    double reward;
    int next_state;
    std::optional<int> next_action;  ///< empty at episode end (terminal or step cap)
    bool done;                       ///< entered a terminal state
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::uint64_t seed = 0;

    double total_reward() const {
        double r = 0.0;
        for (const auto& st : steps) r += st.reward;
        return r;
    }
};

/// Normalized discounted state-visitation weights (mass on decision states;
/// terminal states carry none).
struct OccupancyMeasure {
    std::vector<double> weights;

    void validate() const {
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("OccupancyMeasure: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-10)
            throw std::invalid_argument("OccupancyMeasure: weights do not sum to 1");
    }
};

struct ValueTables {
    std::vector<double> v;
    Matrix q;
    Matrix advantage;
    double expected_return = 0.0;
};

namespace detail {

inline void check_dims(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
        throw std::invalid_argument("mdp/policy dimension mismatch");
}

/// Row-stochastic state transition matrix under the policy.
inline Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
    const auto S = static_cast<Eigen::Index>(mdp.n_states);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            const double pa = policy.probs(s, a);
            if (pa == 0.0) continue;
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) += pa * mdp.p(s, a, s2);
        }
    return P;
}

}  // namespace detail

/**
 * Exact policy evaluation. Solves the Bellman linear system
 * (I - gamma P_pi) v = r_pi by dense factorization, then fills Q, the
 * advantage A = Q - V, and the expected return J = sum_s rho(s) v(s).
 */
inline ValueTables evaluate_exact(const TabularMdp& mdp, const TabularPolicy& policy) {
    detail::check_dims(mdp, policy);
    const auto S = static_cast<Eigen::Index>(mdp.n_states);

    Eigen::MatrixXd P = detail::policy_transition(mdp, policy);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(S);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            r_pi(static_cast<Eigen::Index>(s)) += policy.probs(s, a) * mdp.reward(s, a);

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - mdp.discount * P;
    Eigen::VectorXd v = A.partialPivLu().solve(r_pi);
    if (((A * v - r_pi).lpNorm<Eigen::Infinity>()) > 1e-10 * (1.0 + r_pi.lpNorm<Eigen::Infinity>()))
        throw std::runtime_error("evaluate_exact: Bellman system residual too large");

    ValueTables out;
    out.v.assign(v.data(), v.data() + S);
    out.q = Matrix(mdp.n_states, mdp.n_actions);
    out.advantage = Matrix(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            double q = mdp.reward(s, a);
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                q += mdp.discount * mdp.p(s, a, s2) * out.v[s2];
            out.q(s, a) = q;
            out.advantage(s, a) = q - out.v[s];
        }
    out.expected_return = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) out.expected_return += mdp.start_dist[s] * out.v[s];
    return out;
}

/**
 * Exact normalized discounted occupancy: solves
 * (I - gamma P_pi^T) x = (1 - gamma) rho, then drops terminal-state mass and
 * renormalizes, so the weights describe visitation over decision states only.
 * If all mass is terminal (start inside a terminal state) the unmasked
 * solution is returned instead.
 */
inline OccupancyMeasure occupancy_exact(const TabularMdp& mdp, const TabularPolicy& policy) {
    detail::check_dims(mdp, policy);
    const auto S = static_cast<Eigen::Index>(mdp.n_states);

    Eigen::MatrixXd P = detail::policy_transition(mdp, policy);
    Eigen::VectorXd rho0 = Eigen::VectorXd::Zero(S);
    for (std::size_t s = 0; s < mdp.n_states; ++s) rho0(static_cast<Eigen::Index>(s)) = mdp.start_dist[s];

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - mdp.discount * P.transpose();
    Eigen::VectorXd x = A.partialPivLu().solve((1.0 - mdp.discount) * rho0);

    OccupancyMeasure occ;
    occ.weights.assign(x.data(), x.data() + S);
    for (double& w : occ.weights) w = std::max(w, 0.0);

    double masked_sum = 0.0, full_sum = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        full_sum += occ.weights[s];
        if (!mdp.terminal[s]) masked_sum += occ.weights[s];
    }
    if (masked_sum > 1e-300) {
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            occ.weights[s] = mdp.terminal[s] ? 0.0 : occ.weights[s] / masked_sum;
    } else {
        for (double& w : occ.weights) w /= full_sum;
    }
    return occ;
}

/**
 * Simulates episodes: start state from the start distribution, actions from
 * the policy, stop at a terminal state or at max_episode_steps. Deterministic
 * given the seed.
 */
inline std::vector<Trajectory> rollout(const TabularMdp& mdp, const TabularPolicy& policy,
                                       std::size_t n_episodes, std::uint64_t rng_seed) {
    detail::check_dims(mdp, policy);
    if (n_episodes == 0) throw std::invalid_argument("rollout: n_episodes must be >= 1");

    Rng rng(rng_seed);
    std::vector<Trajectory> out;
    out.reserve(n_episodes);
    for (std::size_t e = 0; e < n_episodes; ++e) {
        Trajectory traj;
        traj.seed = rng_seed;
        int s = rng.categorical(std::span<const double>(mdp.start_dist));
        if (mdp.terminal[static_cast<std::size_t>(s)]) {
            out.push_back(std::move(traj));
            continue;
        }
        int a = rng.categorical(policy.row(static_cast<std::size_t>(s)));
        for (std::size_t t = 0; mdp.max_episode_steps == 0 || t < mdp.max_episode_steps; ++t) {
            const double r = mdp.reward(static_cast<std::size_t>(s), static_cast<std::size_t>(a));
            const int s2 = rng.categorical(mdp.next_state_dist(static_cast<std::size_t>(s), static_cast<std::size_t>(a)));
            const bool done = mdp.terminal[static_cast<std::size_t>(s2)];
            const bool truncated = !done && mdp.max_episode_steps != 0 && t + 1 >= mdp.max_episode_steps;
            std::optional<int> a2;
            if (!done && !truncated) a2 = rng.categorical(policy.row(static_cast<std::size_t>(s2)));
            traj.steps.push_back({s, a, r, s2, a2, done});
            if (done || truncated) break;
            s = s2;
            a = *a2;
        }
        out.push_back(std::move(traj));
    }
    return out;
}

/**
 * Monte Carlo discounted occupancy: weight of s proportional to the sum of
 * gamma^t over visits of s as a decision state, normalized to sum 1.
 */
inline OccupancyMeasure occupancy_empirical(const std::vector<Trajectory>& trajectories,
                                            double discount, std::size_t n_states) {
    if (trajectories.empty()) throw std::invalid_argument("occupancy_empirical: no trajectories");
    OccupancyMeasure occ;
    occ.weights.assign(n_states, 0.0);
    double total = 0.0;
    for (const auto& traj : trajectories) {
        double g = 1.0;
        for (const auto& st : traj.steps) {
            occ.weights[static_cast<std::size_t>(st.state)] += g;
            total += g;
            g *= discount;
        }
    }
    if (total <= 0.0) throw std::invalid_argument("occupancy_empirical: trajectories carry no steps");
    for (double& w : occ.weights) w /= total;
    return occ;
}

}  // namespace ottrpo
