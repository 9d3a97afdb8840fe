#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ottrpo/advantage.hpp"
#include "ottrpo/envs.hpp"
#include "ottrpo/verify.hpp"

using namespace ottrpo;

TEST_CASE("single-transition TD update with full learning rate") {
    // One transition (s=0, a=1, r, terminal): Q(0,1) = r, so
    // A(0,1) = r (1 - pi(1|0)) and A(0,a') = -r pi(1|0) for the others.
    const double r = 2.5;
    TabularPolicy pi = TabularPolicy::uniform(2, 3);
    Trajectory traj;
    traj.steps.push_back({0, 1, r, 1, std::nullopt, true});
    const Matrix adv = td_advantage({traj}, pi, TdConfig{1.0, 0.5});
    const double p = pi.probs(0, 1);
    CHECK(adv(0, 1) == Catch::Approx(r * (1.0 - p)).margin(1e-12));
    CHECK(adv(0, 0) == Catch::Approx(-r * p).margin(1e-12));
    CHECK(adv(0, 2) == Catch::Approx(-r * p).margin(1e-12));
    for (std::size_t a = 0; a < 3; ++a) CHECK(adv(1, a) == 0.0);
}

TEST_CASE("vanishing learning rate leaves Q at zero") {
    // alpha is constrained to (0, 1]; the alpha -> 0 limit gives A -> 0.
    TabularPolicy pi = TabularPolicy::uniform(1, 2);
    Trajectory traj;
    traj.steps.push_back({0, 0, 5.0, 0, 1, false});
    traj.steps.push_back({0, 1, -3.0, 0, std::nullopt, false});
    const Matrix adv = td_advantage({traj}, pi, TdConfig{1e-12, 0.5});
    for (double a : adv.data()) CHECK(std::abs(a) <= 1e-10);
    CHECK_THROWS_AS(td_advantage({traj}, pi, TdConfig{0.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(td_advantage({traj}, pi, TdConfig{0.5, 1.0}), std::invalid_argument);
}

TEST_CASE("TD advantage is zero-mean under the behavior policy") {
    const TabularMdp cliff = build_cliffwalking();
    const TabularPolicy pi = TabularPolicy::uniform(cliff.n_states, 4);
    const auto episodes = rollout(cliff, pi, 20, 17);
    const Matrix adv = td_advantage(episodes, pi, TdConfig{0.9, 0.2});
    for (std::size_t s = 0; s < cliff.n_states; ++s) {
        double mean = 0.0;
        for (std::size_t a = 0; a < 4; ++a) mean += pi.probs(s, a) * adv(s, a);
        CHECK(std::abs(mean) <= 1e-10);
    }
}

TEST_CASE("TD advantage converges to the exact advantage on the chain") {
    const TabularMdp chain = build_two_action_chain();
    const TabularPolicy pi = chain_policy(0.5);
    const auto episodes = rollout(chain, pi, 10000, 23);
    const Matrix adv = td_advantage(episodes, pi, TdConfig{0.9, 0.5});
    CHECK(adv(chain::kStart, chain::kLeft) == Catch::Approx(-1.0).margin(0.05));
    CHECK(adv(chain::kStart, chain::kRight) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("warm-started Q persists across calls") {
    TabularPolicy pi = TabularPolicy::uniform(1, 2);
    Trajectory traj;
    traj.steps.push_back({0, 0, 1.0, 0, std::nullopt, false});
    Matrix q(1, 2, 0.0);
    td_advantage({traj}, pi, TdConfig{0.5, 0.0}, &q);
    CHECK(q(0, 0) == Catch::Approx(0.5));
    td_advantage({traj}, pi, TdConfig{0.5, 0.0}, &q);
    CHECK(q(0, 0) == Catch::Approx(0.75));
}

TEST_CASE("GAE base cases and hand-unrolled recursion") {
    const std::vector<double> rewards{1.0, 0.0, 1.0};
    const std::vector<double> values{0.5, 0.2, 0.1};

    // lambda = 0 reduces to one-step TD residuals.
    const auto td0 = gae_advantages(rewards, values, GaeConfig{0.9, 0.0});
    CHECK(td0[0] == Catch::Approx(1.0 + 0.9 * 0.2 - 0.5).margin(1e-12));
    CHECK(td0[1] == Catch::Approx(0.0 + 0.9 * 0.1 - 0.2).margin(1e-12));
    CHECK(td0[2] == Catch::Approx(1.0 - 0.1).margin(1e-12));

    // lambda = 1 with zero values telescopes to returns-to-go.
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    const auto mc = gae_advantages(rewards, zeros, GaeConfig{0.9, 1.0});
    const auto rtg = returns_to_go(rewards, 0.9);
    for (std::size_t t = 0; t < 3; ++t) CHECK(mc[t] == Catch::Approx(rtg[t]).margin(1e-12));

    // gamma = 0.9, lambda = 0.5, frozen hand unroll.
    const auto adv = gae_advantages(rewards, values, GaeConfig{0.9, 0.5});
    CHECK(adv[2] == Catch::Approx(0.9).margin(1e-12));
    CHECK(adv[1] == Catch::Approx(0.295).margin(1e-12));
    CHECK(adv[0] == Catch::Approx(0.81275).margin(1e-12));

    CHECK_THROWS_AS(gae_advantages(rewards, std::vector<double>{1.0}, GaeConfig{}),
                    std::invalid_argument);
}

TEST_CASE("linear value fit recovers constants and exact linear targets") {
    // Constant targets with a bias feature.
    Matrix bias(5, 1, 1.0);
    const std::vector<double> constant(5, 3.25);
    const LinearValueModel m1 = fit_linear_value(bias, constant);
    CHECK(m1.coef[0] == Catch::Approx(3.25).margin(1e-10));

    // Noiseless linear targets are interpolated exactly.
    Rng rng(10);
    Matrix design(12, 3, 0.0);
    std::vector<double> targets(12);
    for (std::size_t i = 0; i < 12; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        design(i, 0) = 1.0;
        design(i, 1) = x;
        design(i, 2) = x * x;
        targets[i] = 2.0 - 0.5 * x + 0.25 * x * x;
    }
    const LinearValueModel m2 = fit_linear_value(design, targets);
    CHECK(m2.coef[0] == Catch::Approx(2.0).margin(1e-8));
    CHECK(m2.coef[1] == Catch::Approx(-0.5).margin(1e-8));
    CHECK(m2.coef[2] == Catch::Approx(0.25).margin(1e-8));
}

TEST_CASE("nested polynomial features reduce the residual monotonically") {
    Rng rng(21);
    const std::size_t n = 200;
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rng.uniform(-1.0, 1.0);
        ys[i] = 1.0 + 0.7 * xs[i] - 1.3 * xs[i] * xs[i] + 0.05 * rng.normal();
    }
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t degree = 0; degree <= 2; ++degree) {
        Matrix design(n, degree + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d <= degree; ++d) design(i, d) = std::pow(xs[i], d);
        const LinearValueModel model = fit_linear_value(design, ys);
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> phi(degree + 1);
            for (std::size_t d = 0; d <= degree; ++d) phi[d] = std::pow(xs[i], d);
            const double rterm = ys[i] - model.value(phi);
            rss += rterm * rterm;
        }
        CHECK(rss <= prev + 1e-12);
        prev = rss;
    }
}

TEST_CASE("rank-deficient designs fall back to ridge") {
    Matrix design(6, 2, 0.0);
    std::vector<double> targets(6);
    for (std::size_t i = 0; i < 6; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = 1.0;  // duplicated column -> rank 1
        targets[i] = 4.0;
    }
    const LinearValueModel model = fit_linear_value(design, targets);
    CHECK(model.value(std::vector<double>{1.0, 1.0}) == Catch::Approx(4.0).margin(1e-5));
    CHECK_THROWS_AS(fit_linear_value(Matrix(1, 2, 1.0), std::vector<double>{1.0}),
                    std::invalid_argument);
}
