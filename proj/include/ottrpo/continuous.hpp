#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ottrpo/advantage.hpp"
#include "ottrpo/matrix.hpp"
#include "ottrpo/rng.hpp"

namespace ottrpo {

using FeatureMap = std::function<std::vector<double>(const std::vector<double>&)>;

/**
 * Gaussian policy with linear-in-features mean m(s) = W phi(s) and a fixed,
 * shared log standard deviation. The action distribution is
 * Normal(m(s), exp(2 log_std) I); sampling is deterministic given the stream.
 */
struct GaussianLinearPolicy {
    Matrix weights;  ///< action_dim x feature_dim
    double log_std = 0.0;
    FeatureMap features;

    std::size_t action_dim() const { return weights.rows(); }

    std::vector<double> mean(const std::vector<double>& state) const {
        const std::vector<double> phi = features(state);
        if (phi.size() != weights.cols())
            throw std::invalid_argument("GaussianLinearPolicy: feature length mismatch");
        std::vector<double> m(weights.rows(), 0.0);
        for (std::size_t i = 0; i < weights.rows(); ++i)
            for (std::size_t j = 0; j < weights.cols(); ++j) m[i] += weights(i, j) * phi[j];
        return m;
    }

    std::vector<double> sample(const std::vector<double>& state, Rng& rng) const {
        std::vector<double> a = mean(state);
        const double sigma = std::exp(log_std);
        for (double& ai : a) ai += sigma * rng.normal();
        return a;
    }
};

inline double squared_distance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("squared_distance: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return d;
}

/// One (state, executed action, advantage estimate) triple from a rollout.
struct ContSample {
    std::vector<double> state;
    std::vector<double> action;
    double advantage = 0.0;
};

/**
 * Sampled dual objective for the Gaussian-policy case with squared-Euclidean
 * transport cost: the candidate set at each visited state is {a_s, m(s)} and
 * the advantage at the policy mean is taken as zero, so
 *   G(lambda) = lambda*eps + (1/n) sum_s max{ A_s - lambda ||m(s) - a_s||^2, 0 },
 * with every visited state weighted equally.
 */
inline double eval_G_gaussian(double lambda, const std::vector<ContSample>& batch,
                              const GaussianLinearPolicy& policy, double epsilon) {
    if (batch.empty()) throw std::invalid_argument("eval_G_gaussian: empty batch");
    if (lambda < 0.0) throw std::invalid_argument("eval_G_gaussian: lambda must be >= 0");
    double acc = 0.0;
    for (const auto& s : batch)
        acc += std::max(s.advantage - lambda * squared_distance(policy.mean(s.state), s.action), 0.0);
    return lambda * epsilon + acc / static_cast<double>(batch.size());
}

/**
 * Scalar dual solve by golden-section search on [0, lambda_max]; G is convex
 * in lambda so the bracket converges to the global minimum. All-nonpositive
 * advantages make the max saturate everywhere and the minimizer is zero.
 */
inline double solve_dual_gaussian(const std::vector<ContSample>& batch,
                                  const GaussianLinearPolicy& policy, double epsilon,
                                  double tol = 1e-9) {
    if (batch.empty()) throw std::invalid_argument("solve_dual_gaussian: empty batch");
    double a_max = 0.0;
    double c_min = std::numeric_limits<double>::infinity();
    for (const auto& s : batch) {
        a_max = std::max(a_max, s.advantage);
        const double c = squared_distance(policy.mean(s.state), s.action);
        if (c > 0.0) c_min = std::min(c_min, c);
    }
    if (a_max <= 0.0 || !std::isfinite(c_min)) return 0.0;

    const auto G = [&](double lam) { return eval_G_gaussian(lam, batch, policy, epsilon); };
    double hi = a_max / c_min;
    for (int i = 0; i < 60 && G(2.0 * hi) < G(hi); ++i) hi *= 2.0;

    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = G(x1), f2 = G(x2);
    while (b - a > tol * (1.0 + hi)) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = G(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = G(x2);
        }
    }
    double lam = 0.5 * (a + b);
    if (G(0.0) <= G(lam)) lam = 0.0;
    return lam;
}

/// State-averaged squared displacement of the policy mean. For equal fixed
/// covariances this equals the exact squared-Euclidean transport discrepancy
/// between the two Gaussians, so it audits the trust region in closed form.
inline double gaussian_trust_proxy(const GaussianLinearPolicy& old_policy,
                                   const GaussianLinearPolicy& new_policy,
                                   const std::vector<std::vector<double>>& states) {
    if (states.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : states) acc += squared_distance(old_policy.mean(s), new_policy.mean(s));
    return acc / static_cast<double>(states.size());
}

struct ContUpdateConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 10;
    double grad_clip = 0.5;
    double epsilon = 0.05;  ///< trust radius for the early-stopping audit
};

struct ContUpdateMetrics {
    double trust_proxy = 0.0;
    std::size_t epochs_run = 0;
    double objective = 0.0;
    double grad_norm_last = 0.0;
};

/**
 * Gradient-ascent policy update on the regularized objective
 *   (1/n) sum_s max{ A_s - lambda ||m_W(s) - a_s||^2, 0 }.
 * Saturated samples contribute no gradient; active ones pull the mean toward
 * the executed action with strength lambda. Gradient norms are clipped and
 * epochs stop early once the mean displacement exceeds the trust radius,
 * which keeps the audited proxy within a small multiple of epsilon.
 */
inline std::pair<GaussianLinearPolicy, ContUpdateMetrics> policy_gradient_update(
    const GaussianLinearPolicy& policy, const std::vector<ContSample>& batch, double lambda_star,
    const ContUpdateConfig& config) {
    if (batch.empty()) throw std::invalid_argument("policy_gradient_update: empty batch");
    GaussianLinearPolicy updated = policy;
    ContUpdateMetrics metrics;

    std::vector<std::vector<double>> phis;
    phis.reserve(batch.size());
    for (const auto& s : batch) phis.push_back(policy.features(s.state));
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Matrix grad(updated.weights.rows(), updated.weights.cols(), 0.0);
        double objective = 0.0;
        for (std::size_t idx = 0; idx < batch.size(); ++idx) {
            const auto& s = batch[idx];
            const std::vector<double> m = updated.mean(s.state);
            const double c = squared_distance(m, s.action);
            const double term = s.advantage - lambda_star * c;
            if (term <= 0.0) continue;  // saturated branch, flat in theta
            objective += term;
            for (std::size_t i = 0; i < grad.rows(); ++i) {
                const double pull = -2.0 * lambda_star * (m[i] - s.action[i]) * inv_n;
                for (std::size_t j = 0; j < grad.cols(); ++j) grad(i, j) += pull * phis[idx][j];
            }
        }
        metrics.objective = objective * inv_n;

        double norm = 0.0;
        for (double g : grad.data()) norm += g * g;
        norm = std::sqrt(norm);
        metrics.grad_norm_last = norm;
        if (norm == 0.0) break;
        const double scale = norm > config.grad_clip ? config.grad_clip / norm : 1.0;
        for (std::size_t i = 0; i < grad.rows(); ++i)
            for (std::size_t j = 0; j < grad.cols(); ++j)
                updated.weights(i, j) += config.learning_rate * scale * grad(i, j);
        ++metrics.epochs_run;

        double proxy = 0.0;
        for (std::size_t idx = 0; idx < batch.size(); ++idx)
            proxy += squared_distance(policy.mean(batch[idx].state), updated.mean(batch[idx].state));
        metrics.trust_proxy = proxy * inv_n;
        if (metrics.trust_proxy > config.epsilon) break;
    }
    return {updated, metrics};
}

/**
 * One-dimensional regulator used as the desk-scale continuous benchmark:
 * x' = clip(x + 0.1 a), reward -(x^2 + 0.01 a^2), horizon 50, x0 ~ U[-1, 1].
 * Both state and action live in [-1, 1]; actions are clipped on entry.
 */
struct ContToyEnv {
    static constexpr double kDt = 0.1;
    static constexpr std::size_t kHorizon = 50;

    double state = 0.0;

    void reset(Rng& rng) { state = rng.uniform(-1.0, 1.0); }

    /// Returns the reward; advances the state.
    double step(double action) {
        const double a = std::clamp(action, -1.0, 1.0);
        const double reward = -(state * state + 0.01 * a * a);
        state = std::clamp(state + kDt * a, -1.0, 1.0);
        return reward;
    }
};

struct ContTrainConfig {
    double epsilon = 0.05;
    std::size_t rollout_steps = 512;
    std::size_t cycles = 20;
    GaeConfig gae{0.99, 0.95};
    ContUpdateConfig update{};
    std::size_t eval_episodes = 10;
    std::uint64_t seed = 0;
    double log_std_init = 0.0;
};

struct ContTrainResult {
    GaussianLinearPolicy final_policy;
    std::vector<double> eval_returns;   ///< one entry per cycle, plus the initial policy
    std::vector<double> trust_proxies;  ///< audited proxy per update
    std::vector<double> lambdas;
};

inline FeatureMap toy_policy_features() {
    return [](const std::vector<double>& s) { return std::vector<double>{1.0, s[0]}; };
}

inline double eval_toy_policy(const GaussianLinearPolicy& policy, std::size_t episodes,
                              std::uint64_t seed) {
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        ContToyEnv env;
        env.reset(rng);
        for (std::size_t t = 0; t < ContToyEnv::kHorizon; ++t)
            total += env.step(policy.sample({env.state}, rng)[0]);
    }
    return total / static_cast<double>(episodes);
}

/**
 * Training loop for the toy environment: GAE advantages on a linear value
 * model with quadratic state features, scalar dual solve, regularized
 * gradient update with trust-boundary early stopping.
 */
inline ContTrainResult train_continuous(const ContTrainConfig& config) {
    Rng root(config.seed);
    Rng env_stream = root.child(1);

    ContTrainResult result;
    result.final_policy.weights = Matrix(1, 2, 0.0);
    result.final_policy.log_std = config.log_std_init;
    result.final_policy.features = toy_policy_features();
    GaussianLinearPolicy& policy = result.final_policy;

    ContUpdateConfig upd = config.update;
    upd.epsilon = config.epsilon;

    result.eval_returns.push_back(
        eval_toy_policy(policy, config.eval_episodes, root.child(1000).seed()));

    for (std::size_t cycle = 0; cycle < config.cycles; ++cycle) {
        // Collect full episodes until the step budget is spent.
        std::vector<double> all_x, all_a;
        std::vector<std::vector<double>> episode_rewards;
        while (all_x.size() < config.rollout_steps) {
            ContToyEnv env;
            env.reset(env_stream);
            std::vector<double> rewards;
            rewards.reserve(ContToyEnv::kHorizon);
            for (std::size_t t = 0; t < ContToyEnv::kHorizon; ++t) {
                const double x = env.state;
                const double a = policy.sample({x}, env_stream)[0];
                all_x.push_back(x);
                all_a.push_back(a);
                rewards.push_back(env.step(a));
            }
            episode_rewards.push_back(std::move(rewards));
        }

        // Linear value fit on [1, x, x^2] against discounted returns-to-go.
        Matrix design(all_x.size(), 3, 0.0);
        std::vector<double> targets;
        targets.reserve(all_x.size());
        for (const auto& rewards : episode_rewards) {
            const auto rtg = returns_to_go(rewards, config.gae.gamma);
            targets.insert(targets.end(), rtg.begin(), rtg.end());
        }
        for (std::size_t i = 0; i < all_x.size(); ++i) {
            design(i, 0) = 1.0;
            design(i, 1) = all_x[i];
            design(i, 2) = all_x[i] * all_x[i];
        }
        const LinearValueModel value = fit_linear_value(design, targets);

        // GAE per episode, then flatten into the update batch.
        std::vector<ContSample> samples;
        samples.reserve(all_x.size());
        std::size_t offset = 0;
        for (const auto& rewards : episode_rewards) {
            std::vector<double> values(rewards.size());
            for (std::size_t t = 0; t < rewards.size(); ++t) {
                const double x = all_x[offset + t];
                values[t] = value.value(std::vector<double>{1.0, x, x * x});
            }
            const auto adv = gae_advantages(rewards, values, config.gae);
            for (std::size_t t = 0; t < rewards.size(); ++t)
                samples.push_back({{all_x[offset + t]}, {all_a[offset + t]}, adv[t]});
            offset += rewards.size();
        }

        const double lambda_star = solve_dual_gaussian(samples, policy, config.epsilon);
        auto [new_policy, metrics] = policy_gradient_update(policy, samples, lambda_star, upd);
        result.lambdas.push_back(lambda_star);
        result.trust_proxies.push_back(metrics.trust_proxy);
        policy = new_policy;

        result.eval_returns.push_back(
            eval_toy_policy(policy, config.eval_episodes, root.child(1001 + cycle).seed()));
    }
    return result;
}

}  // namespace ottrpo
