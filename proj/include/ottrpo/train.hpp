#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ottrpo/advantage.hpp"
#include "ottrpo/mdp.hpp"
#include "ottrpo/transport.hpp"
#include "ottrpo/trust_region.hpp"

namespace ottrpo {

enum class AdvantageMode { Td, Exact };
enum class OccupancyMode { Empirical, Exact };

struct TrainConfig {
    double epsilon = 0.01;
    CostMatrix cost;
    TdConfig td{};
    /// Episodes collected between policy updates (the paper-style n).
    std::size_t update_period_episodes = 1;
    std::size_t total_env_steps = 100000;
    std::size_t eval_interval_steps = 1000;
    std::size_t eval_episodes = 10;
    std::uint64_t seed = 0;
    AdvantageMode advantage_mode = AdvantageMode::Td;
    OccupancyMode occupancy_mode = OccupancyMode::Empirical;
    /// Discount for the empirical visitation weights; defaults to gamma_td.
    std::optional<double> occupancy_discount;
    /// Replaces the environment's episode step cap for training and
    /// evaluation rollouts (0 = unbounded). The published CliffWalking
    /// baselines are only reachable without the conventional 200-step cap.
    std::optional<std::size_t> episode_cap;
    bool break_mass_splitting = false;
    bool warm_start_q = false;
    std::optional<TabularPolicy> initial_policy;

    void validate(const TabularMdp& mdp) const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be > 0");
        if (update_period_episodes == 0) throw std::invalid_argument("TrainConfig: update period must be >= 1");
        if (eval_interval_steps == 0 || total_env_steps % eval_interval_steps != 0)
            throw std::invalid_argument("TrainConfig: eval cadence must divide total steps");
        if (eval_episodes == 0) throw std::invalid_argument("TrainConfig: eval episodes must be >= 1");
        if (cost.size() != mdp.n_actions) throw std::invalid_argument("TrainConfig: cost size mismatch");
        td.validate();
        if (initial_policy &&
            (initial_policy->n_states() != mdp.n_states || initial_policy->n_actions() != mdp.n_actions))
            throw std::invalid_argument("TrainConfig: initial policy dimension mismatch");
    }
};

struct CurvePoint {
    std::size_t env_steps = 0;
    double mean_return = 0.0;  ///< undiscounted, averaged over eval episodes
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    TabularPolicy final_policy;
    std::size_t updates = 0;
    std::size_t env_steps = 0;
    /// max over updates of (audited avg OT discrepancy - epsilon)
    double max_feasibility_violation = 0.0;
    /// max over updates of |primal - dual| / (1 + |dual|)
    double max_duality_gap = 0.0;
};

/// Mean undiscounted return over n evaluation episodes.
inline double evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy,
                              std::size_t n_episodes, std::uint64_t seed) {
    const auto episodes = rollout(mdp, policy, n_episodes, seed);
    double total = 0.0;
    for (const auto& traj : episodes) total += traj.total_reward();
    return total / static_cast<double>(n_episodes);
}

/**
 * The full training loop: collect a batch of episodes, estimate the advantage
 * (TD by default) and the discounted visitation weights, solve the scalar
 * dual, apply the mass-splitting update, repeat. Evaluation returns are
 * recorded every eval_interval_steps environment steps. Fully deterministic
 * given (config, seed): environment, evaluation and estimator randomness run
 * on independent child streams.
 */
inline TrainResult train_tabular(const TabularMdp& mdp_in, const TrainConfig& config) {
    config.validate(mdp_in);
    TabularMdp mdp = mdp_in;
    if (config.episode_cap) mdp.max_episode_steps = *config.episode_cap;
    Rng root(config.seed);
    Rng env_stream = root.child(1);

    TrainResult result;
    result.final_policy =
        config.initial_policy ? *config.initial_policy : TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
    TabularPolicy& policy = result.final_policy;
    policy.validate();

    DualSolveOptions dual_opts;
    dual_opts.break_mass_splitting = config.break_mass_splitting;

    Matrix q_carry(mdp.n_states, mdp.n_actions, 0.0);
    std::size_t next_eval = config.eval_interval_steps;
    std::size_t eval_index = 0;

    while (result.env_steps < config.total_env_steps) {
        const auto batch =
            rollout(mdp, policy, config.update_period_episodes, env_stream.next_u64());
        for (const auto& traj : batch) result.env_steps += traj.steps.size();

        Matrix advantage;
        if (config.advantage_mode == AdvantageMode::Td) {
            advantage = td_advantage(batch, policy, config.td,
                                     config.warm_start_q ? &q_carry : nullptr);
        } else {
            advantage = evaluate_exact(mdp, policy).advantage;
        }
        OccupancyMeasure occupancy =
            config.occupancy_mode == OccupancyMode::Empirical
                ? occupancy_empirical(batch, config.occupancy_discount.value_or(config.td.gamma_td),
                                      mdp.n_states)
                : occupancy_exact(mdp, policy);

        const DualSolution dual =
            solve_dual(policy, occupancy, advantage, config.cost, config.epsilon, dual_opts);
        const UpdateReport rep =
            update_policy_discrete(policy, occupancy, advantage, config.cost, dual);
        result.max_feasibility_violation = std::max(
            result.max_feasibility_violation, rep.achieved_discrepancy - config.epsilon);
        result.max_duality_gap =
            std::max(result.max_duality_gap, std::abs(rep.primal_value - rep.dual_value) /
                                                 (1.0 + std::abs(rep.dual_value)));
        policy = rep.new_policy;
        ++result.updates;

        while (next_eval <= result.env_steps && next_eval <= config.total_env_steps) {
            const double score = evaluate_policy(mdp, policy, config.eval_episodes,
                                                 root.child(1000 + eval_index).seed());
            result.curve.push_back({next_eval, score});
            next_eval += config.eval_interval_steps;
            ++eval_index;
        }
    }
    return result;
}

/// Mean of the evaluation returns recorded in the last `fraction` of training.
inline double final_window_mean(const TrainResult& result, double fraction,
                                std::size_t total_steps) {
    double sum = 0.0;
    std::size_t count = 0;
    const double threshold = (1.0 - fraction) * static_cast<double>(total_steps);
    for (const auto& pt : result.curve) {
        if (static_cast<double>(pt.env_steps) > threshold) {
            sum += pt.mean_return;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("final_window_mean: no points in window");
    return sum / static_cast<double>(count);
}

}  // namespace ottrpo
