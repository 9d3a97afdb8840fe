#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ottrpo/envs.hpp"
#include "ottrpo/mdp.hpp"
#include "ottrpo/verify.hpp"

using namespace ottrpo;

TEST_CASE("evaluate_exact reproduces the chain closed forms") {
    const TabularMdp chain = build_two_action_chain();
    for (double theta : {0.0, 0.25, 0.5, 1.0}) {
        const ValueTables t = evaluate_exact(chain, chain_policy(theta));
        CHECK(t.v[chain::kStart] == Catch::Approx(1.0 - 2.0 * theta).margin(1e-12));
        CHECK(t.advantage(chain::kStart, chain::kLeft) == Catch::Approx(2.0 * (theta - 1.0)).margin(1e-12));
        CHECK(t.advantage(chain::kStart, chain::kRight) == Catch::Approx(2.0 * theta).margin(1e-12));
        CHECK(t.expected_return == Catch::Approx(1.0 - 2.0 * theta).margin(1e-12));
    }
}

TEST_CASE("zero rewards give zero values") {
    Rng rng(7);
    TabularMdp mdp = random_mdp(rng, 4, 3, 0.9);
    mdp.reward = Matrix(4, 3, 0.0);
    const ValueTables t = evaluate_exact(mdp, random_policy(rng, 4, 3));
    for (double v : t.v) CHECK(v == Catch::Approx(0.0).margin(1e-12));
    for (double a : t.advantage.data()) CHECK(a == Catch::Approx(0.0).margin(1e-12));
    CHECK(t.expected_return == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("advantage is zero-mean under its own policy") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const TabularMdp mdp = random_mdp(rng, 5, 3, rng.uniform(0.1, 0.95));
        const TabularPolicy pi = random_policy(rng, 5, 3);
        const ValueTables t = evaluate_exact(mdp, pi);
        for (std::size_t s = 0; s < 5; ++s) {
            double mean = 0.0;
            for (std::size_t a = 0; a < 3; ++a) mean += pi.probs(s, a) * t.advantage(s, a);
            CHECK(std::abs(mean) <= 1e-8);
        }
    }
}

TEST_CASE("performance-difference identity holds exactly") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const double gamma = rng.uniform(0.2, 0.9);
        const TabularMdp mdp = random_mdp(rng, 4, 3, gamma);
        const TabularPolicy pi = random_policy(rng, 4, 3);
        const TabularPolicy pi2 = random_policy(rng, 4, 3);
        const ValueTables t = evaluate_exact(mdp, pi);
        const ValueTables t2 = evaluate_exact(mdp, pi2);
        const OccupancyMeasure occ2 = occupancy_exact(mdp, pi2);
        double rhs = 0.0;
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t a = 0; a < 3; ++a)
                rhs += occ2.weights[s] * pi2.probs(s, a) * t.advantage(s, a);
        rhs /= 1.0 - gamma;
        CHECK(t2.expected_return - t.expected_return == Catch::Approx(rhs).margin(1e-6));
    }
}

TEST_CASE("occupancy_exact chain and absorbing cases") {
    const OccupancyMeasure occ = occupancy_exact(build_two_action_chain(), chain_policy(0.3));
    CHECK(occ.weights[chain::kStart] == Catch::Approx(1.0).margin(1e-12));
    CHECK(occ.weights[chain::kRightTerm] == 0.0);
    CHECK(occ.weights[chain::kLeftTerm] == 0.0);

    // One absorbing, non-terminal, non-rewarding state.
    TabularMdp single;
    single.n_states = 1;
    single.n_actions = 1;
    single.transition = {1.0};
    single.reward = Matrix(1, 1, 0.0);
    single.start_dist = {1.0};
    single.discount = 0.7;
    single.terminal = {false};
    single.max_episode_steps = 50;
    single.validate();
    const OccupancyMeasure occ1 = occupancy_exact(single, TabularPolicy::uniform(1, 1));
    CHECK(occ1.weights[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("Monte Carlo agrees with exact return and occupancy") {
    Rng rng(101);
    const double gamma = 0.9;
    const TabularMdp mdp = random_mdp(rng, 5, 3, gamma);
    const TabularPolicy pi = random_policy(rng, 5, 3);
    const ValueTables tables = evaluate_exact(mdp, pi);
    const OccupancyMeasure occ = occupancy_exact(mdp, pi);

    // Stream 200k episodes in batches; per-episode discounted return and
    // per-state discounted visitation are i.i.d., giving clean standard errors.
    const std::size_t n_batches = 20, batch = 10000;
    const std::size_t n_episodes = n_batches * batch;
    double sum_j = 0.0, sumsq_j = 0.0;
    std::vector<double> sum_w(5, 0.0), sumsq_w(5, 0.0);
    for (std::size_t b = 0; b < n_batches; ++b) {
        const auto episodes = rollout(mdp, pi, batch, 5000 + b);
        for (const auto& traj : episodes) {
            double ret = 0.0, g = 1.0;
            std::vector<double> w(5, 0.0);
            for (const auto& st : traj.steps) {
                ret += g * st.reward;
                w[static_cast<std::size_t>(st.state)] += g;
                g *= gamma;
            }
            sum_j += ret;
            sumsq_j += ret * ret;
            for (std::size_t s = 0; s < 5; ++s) {
                sum_w[s] += w[s];
                sumsq_w[s] += w[s] * w[s];
            }
        }
    }
    const double n = static_cast<double>(n_episodes);
    const double mean_j = sum_j / n;
    const double se_j = std::sqrt((sumsq_j / n - mean_j * mean_j) / n);
    CHECK(std::abs(mean_j - tables.expected_return) <= 3.0 * se_j + 1e-9);

    for (std::size_t s = 0; s < 5; ++s) {
        const double mean_w = sum_w[s] / n;
        const double se_w = std::sqrt((sumsq_w[s] / n - mean_w * mean_w) / n);
        // occupancy_exact is normalized by (1 - gamma).
        CHECK(std::abs(mean_w - occ.weights[s] / (1.0 - gamma)) <= 3.0 * se_w + 1e-9);
    }
}

TEST_CASE("rollout is deterministic and honors degenerate policies") {
    const TabularMdp chain = build_two_action_chain();
    const auto a = rollout(chain, chain_policy(1.0), 50, 42);
    const auto b = rollout(chain, chain_policy(1.0), 50, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t e = 0; e < a.size(); ++e) {
        REQUIRE(a[e].steps.size() == 1);
        CHECK(a[e].steps[0].state == chain::kStart);
        CHECK(a[e].steps[0].action == chain::kLeft);
        CHECK(a[e].steps[0].reward == -1.0);
        CHECK(a[e].steps[0].next_state == chain::kLeftTerm);
        CHECK(a[e].steps[0].done);
        CHECK(b[e].steps[0].action == a[e].steps[0].action);
    }
}

TEST_CASE("rollout start-state action frequencies match the policy") {
    const TabularMdp cliff = build_cliffwalking();
    const TabularPolicy uniform = TabularPolicy::uniform(cliff.n_states, 4);
    const auto episodes = rollout(cliff, uniform, 1000, 9);
    std::vector<int> counts(4, 0);
    for (const auto& traj : episodes) ++counts[static_cast<std::size_t>(traj.steps[0].action)];
    for (int c : counts) CHECK(std::abs(c / 1000.0 - 0.25) <= 0.04);
}

TEST_CASE("occupancy_empirical hand cases") {
    Trajectory traj;
    traj.steps.push_back({0, 0, 0.0, 1, 0, false});
    traj.steps.push_back({1, 0, 0.0, 2, std::nullopt, true});
    const OccupancyMeasure half = occupancy_empirical({traj}, 0.5, 3);
    CHECK(half.weights[0] == Catch::Approx(2.0 / 3.0));
    CHECK(half.weights[1] == Catch::Approx(1.0 / 3.0));

    // gamma = 0 leaves only the start states.
    const OccupancyMeasure myopic = occupancy_empirical({traj}, 0.0, 3);
    CHECK(myopic.weights[0] == Catch::Approx(1.0));
    CHECK(myopic.weights[1] == Catch::Approx(0.0));

    CHECK_THROWS_AS(occupancy_empirical({}, 0.5, 3), std::invalid_argument);
}

TEST_CASE("occupancy_empirical converges to occupancy_exact on CliffWalking") {
    TabularMdp cliff = build_cliffwalking();
    cliff.discount = 0.2;
    const TabularPolicy uniform = TabularPolicy::uniform(cliff.n_states, 4);
    const OccupancyMeasure exact = occupancy_exact(cliff, uniform);
    const auto episodes = rollout(cliff, uniform, 10000, 31);
    const OccupancyMeasure emp = occupancy_empirical(episodes, 0.2, cliff.n_states);
    double l1 = 0.0;
    for (std::size_t s = 0; s < cliff.n_states; ++s) l1 += std::abs(emp.weights[s] - exact.weights[s]);
    CHECK(l1 <= 0.02);
}

TEST_CASE("validation rejects malformed inputs") {
    TabularMdp bad = build_two_action_chain();
    bad.transition[0] += 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    TabularMdp neg = build_two_action_chain();
    neg.start_dist = {1.5, -0.5, 0.0};
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);

    TabularMdp term = build_two_action_chain();
    term.reward(chain::kRightTerm, 0) = 1.0;
    CHECK_THROWS_AS(term.validate(), std::invalid_argument);

    TabularPolicy pi = TabularPolicy::uniform(2, 2);
    pi.probs(0, 0) = 0.9;
    CHECK_THROWS_AS(pi.validate(), std::invalid_argument);

    CHECK_THROWS_AS(evaluate_exact(build_two_action_chain(), TabularPolicy::uniform(2, 2)),
                    std::invalid_argument);
}
