#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ottrpo/matrix.hpp"
#include "ottrpo/mdp.hpp"

namespace ottrpo {

/// Bootstrap target for the TD pass: the executed next action (on-policy,
/// as in the published update rule) or the greedy max over next actions.
enum class TdBootstrap { NextAction, MaxAction };

struct TdConfig {
    double alpha = 0.9;     ///< learning rate in (0, 1]
    double gamma_td = 0.5;  ///< estimator discount in [0, 1)
    TdBootstrap bootstrap = TdBootstrap::NextAction;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("TdConfig: alpha outside (0,1]");
        if (!(gamma_td >= 0.0 && gamma_td < 1.0))
            throw std::invalid_argument("TdConfig: gamma_td outside [0,1)");
    }
};

/**
 * SARSA-style advantage estimate. Q starts at zero and a single pass over all
 * transitions in collection order applies
 *   Q(s_t, a_t) <- (1 - alpha) Q(s_t, a_t) + alpha (r_t + gamma Q(s_{t+1}, a_{t+1})),
 * bootstrapping zero past terminal states and step caps. The result is
 * A(s, a) = Q(s, a) - sum_a' pi(a'|s) Q(s, a'), which is zero-mean under the
 * policy at every state by construction.
 *
 * When q_carry is given, the pass continues from it and writes back into it
 * (warm start); by default Q is re-initialized each call.
 */
inline Matrix td_advantage(const std::vector<Trajectory>& trajectories, const TabularPolicy& policy,
                           const TdConfig& config, Matrix* q_carry = nullptr) {
    config.validate();
    if (trajectories.empty()) throw std::invalid_argument("td_advantage: no trajectories");
    const std::size_t S = policy.n_states(), A = policy.n_actions();

    Matrix q_local(S, A, 0.0);
    Matrix& q = q_carry ? *q_carry : q_local;
    if (q_carry && (q.rows() != S || q.cols() != A))
        throw std::invalid_argument("td_advantage: carried Q has wrong shape");

    for (const auto& traj : trajectories) {
        for (const auto& st : traj.steps) {
            const auto s = static_cast<std::size_t>(st.state);
            const auto a = static_cast<std::size_t>(st.action);
            double q_next = 0.0;
            if (!st.done) {
                const auto s2 = static_cast<std::size_t>(st.next_state);
                if (config.bootstrap == TdBootstrap::MaxAction) {
                    q_next = q(s2, 0);
                    for (std::size_t a2 = 1; a2 < A; ++a2) q_next = std::max(q_next, q(s2, a2));
                } else if (st.next_action) {
                    q_next = q(s2, static_cast<std::size_t>(*st.next_action));
                }
            }
            q(s, a) = (1.0 - config.alpha) * q(s, a) + config.alpha * (st.reward + config.gamma_td * q_next);
        }
    }

    Matrix adv(S, A, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        double v = 0.0;
        for (std::size_t a = 0; a < A; ++a) v += policy.probs(s, a) * q(s, a);
        for (std::size_t a = 0; a < A; ++a) adv(s, a) = q(s, a) - v;
    }
    return adv;
}

struct GaeConfig {
    double gamma = 0.99;    ///< discount in [0, 1)
    double lambda_gae = 0.95;  ///< trace parameter in [0, 1]

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("GaeConfig: gamma outside [0,1)");
        if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0))
            throw std::invalid_argument("GaeConfig: lambda_gae outside [0,1]");
    }
};

/**
 * Generalized advantage estimation over one episode via the backward
 * recursion A_t = delta_t + gamma*lambda*A_{t+1} with
 * delta_t = r_t + gamma*V(s_{t+1}) - V(s_t). values[t] is the estimate at the
 * visited state s_t; the value past the last step is bootstrap_value (zero at
 * terminal states).
 */
inline std::vector<double> gae_advantages(std::span<const double> rewards,
                                          std::span<const double> values, const GaeConfig& config,
                                          double bootstrap_value = 0.0) {
    config.validate();
    if (rewards.size() != values.size())
        throw std::invalid_argument("gae_advantages: rewards/values length mismatch");
    const std::size_t T = rewards.size();
    std::vector<double> adv(T, 0.0);
    double acc = 0.0;
    for (std::size_t t = T; t-- > 0;) {
        const double v_next = t + 1 < T ? values[t + 1] : bootstrap_value;
        const double delta = rewards[t] + config.gamma * v_next - values[t];
        acc = delta + config.gamma * config.lambda_gae * acc;
        adv[t] = acc;
    }
    return adv;
}

/// Discounted returns-to-go of one episode, bootstrapping past the end.
inline std::vector<double> returns_to_go(std::span<const double> rewards, double discount,
                                         double bootstrap_value = 0.0) {
    std::vector<double> out(rewards.size(), 0.0);
    double acc = bootstrap_value;
    for (std::size_t t = rewards.size(); t-- > 0;) {
        acc = rewards[t] + discount * acc;
        out[t] = acc;
    }
    return out;
}

struct LinearValueModel {
    std::vector<double> coef;

    double value(std::span<const double> features) const {
        if (features.size() != coef.size())
            throw std::invalid_argument("LinearValueModel: feature length mismatch");
        double v = 0.0;
        for (std::size_t i = 0; i < coef.size(); ++i) v += coef[i] * features[i];
        return v;
    }
};

/**
 * Least-squares fit of targets on a feature design matrix. Requires at least
 * as many samples as features; a rank-deficient design falls back to a ridge
 * solve with coefficient 1e-8.
 */
inline LinearValueModel fit_linear_value(const Matrix& design, std::span<const double> targets) {
    const std::size_t n = design.rows(), d = design.cols();
    if (targets.size() != n) throw std::invalid_argument("fit_linear_value: target length mismatch");
    if (n < d) throw std::invalid_argument("fit_linear_value: fewer samples than features");

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        y(static_cast<Eigen::Index>(i)) = targets[i];
        for (std::size_t j = 0; j < d; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = design(i, j);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    Eigen::VectorXd beta;
    if (qr.rank() < static_cast<Eigen::Index>(d)) {
        const Eigen::MatrixXd reg =
            X.transpose() * X + 1e-8 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                                 static_cast<Eigen::Index>(d));
        beta = reg.ldlt().solve(X.transpose() * y);
    } else {
        beta = qr.solve(y);
    }

    LinearValueModel model;
    model.coef.assign(beta.data(), beta.data() + d);
    return model;
}

}  // namespace ottrpo
