#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ottrpo/envs.hpp"
#include "ottrpo/io.hpp"
#include "ottrpo/train.hpp"

using namespace ottrpo;

namespace {

TrainConfig chain_config() {
    TrainConfig cfg;
    cfg.epsilon = 0.25;
    cfg.cost = binary_cost(2);
    cfg.update_period_episodes = 1;
    cfg.total_env_steps = 12;
    cfg.eval_interval_steps = 1;
    cfg.eval_episodes = 10;
    cfg.advantage_mode = AdvantageMode::Exact;
    cfg.occupancy_mode = OccupancyMode::Exact;
    cfg.initial_policy = chain_policy(1.0);
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("chain training converges in ceil(1/eps) updates") {
    const TabularMdp chain = build_two_action_chain();
    TrainConfig cfg = chain_config();
    cfg.total_env_steps = 4;  // exactly 4 one-step episodes
    const TrainResult res = train_tabular(chain, cfg);
    CHECK(res.updates == 4);
    CHECK(res.final_policy.probs(chain::kStart, chain::kRight) == Catch::Approx(1.0).margin(1e-9));
    CHECK(res.max_feasibility_violation <= 1e-7);
    CHECK(res.max_duality_gap <= 1e-7);
    // Curve steps are strictly increasing, one point per cadence interval.
    for (std::size_t i = 1; i < res.curve.size(); ++i)
        CHECK(res.curve[i].env_steps > res.curve[i - 1].env_steps);
    CHECK(res.curve.back().mean_return == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("training is deterministic and CSV output is byte-stable") {
    const TabularMdp chain = build_two_action_chain();
    const TrainConfig cfg = chain_config();
    const TrainResult a = train_tabular(chain, cfg);
    const TrainResult b = train_tabular(chain, cfg);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].env_steps == b.curve[i].env_steps);
        CHECK(a.curve[i].mean_return == b.curve[i].mean_return);
    }

    const auto dir = std::filesystem::temp_directory_path() / "ottrpo_csv_test";
    std::filesystem::create_directories(dir);
    const AggregateCurve agg = aggregate_curves({a.curve, b.curve});
    write_curve_csv((dir / "a.csv").string(), agg);
    write_curve_csv((dir / "b.csv").string(), agg);
    const std::string text = slurp((dir / "a.csv").string());
    CHECK(text == slurp((dir / "b.csv").string()));
    CHECK(text.rfind("episodes,mean,std_pos,std_neg\n", 0) == 0);
}

TEST_CASE("aggregate curves bracket the mean") {
    std::vector<std::vector<CurvePoint>> curves{
        {{10, 1.0}, {20, 2.0}},
        {{10, 3.0}, {20, 0.0}},
    };
    const AggregateCurve agg = aggregate_curves(curves);
    for (std::size_t i = 0; i < agg.mean.size(); ++i) {
        CHECK(agg.std_pos[i] >= agg.mean[i]);
        CHECK(agg.std_neg[i] <= agg.mean[i]);
    }
    CHECK(agg.mean[0] == Catch::Approx(2.0));
    CHECK(agg.std_pos[0] == Catch::Approx(3.0));

    // Singleton aggregation degenerates to the curve itself.
    const AggregateCurve single = aggregate_curves({curves[0]});
    CHECK(single.std_pos[1] == single.mean[1]);
}

TEST_CASE("final window mean") {
    TrainResult res;
    res.curve = {{100, -5.0}, {200, -4.0}, {900, -2.0}, {1000, -1.0}};
    CHECK(final_window_mean(res, 0.10, 1000) == Catch::Approx(-1.0));
    CHECK(final_window_mean(res, 0.20, 1000) == Catch::Approx(-1.5));
    CHECK_THROWS_AS(final_window_mean(res, 0.0, 1000), std::invalid_argument);
}

TEST_CASE("train config validation") {
    const TabularMdp chain = build_two_action_chain();
    TrainConfig cfg = chain_config();
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(train_tabular(chain, cfg), std::invalid_argument);
    cfg = chain_config();
    cfg.eval_interval_steps = 5;  // does not divide 12
    CHECK_THROWS_AS(train_tabular(chain, cfg), std::invalid_argument);
    cfg = chain_config();
    cfg.cost = binary_cost(3);
    CHECK_THROWS_AS(train_tabular(chain, cfg), std::invalid_argument);
}

TEST_CASE("policy artifact round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "ottrpo_json_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "policy.json").string();
    const TabularPolicy pi = chain_policy(0.37);
    write_policy_json(path, pi, {{"env", "chain"}, {"seed", "1"}});
    const TabularPolicy back = read_policy_json(path);
    REQUIRE(back.n_states() == pi.n_states());
    for (std::size_t s = 0; s < pi.n_states(); ++s)
        for (std::size_t a = 0; a < pi.n_actions(); ++a)
            CHECK(back.probs(s, a) == pi.probs(s, a));

    // Identical writes are byte-identical.
    const std::string path2 = (dir / "policy2.json").string();
    write_policy_json(path2, pi, {{"env", "chain"}, {"seed", "1"}});
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("config file parsing") {
    const auto dir = std::filesystem::temp_directory_path() / "ottrpo_cfg_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "run.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "epsilon 0.05\n";
        out << "seeds 1,2,3   # trailing comment\n";
        out << "\n";
    }
    const auto kv = parse_config_file(path);
    CHECK(kv.at("epsilon") == "0.05");
    CHECK(kv.at("seeds") == "1,2,3");
    CHECK_THROWS_AS(parse_config_file((dir / "missing.cfg").string()), std::runtime_error);
}

TEST_CASE("short CliffWalking run trains cleanly") {
    const TabularMdp cliff = build_cliffwalking();
    TrainConfig cfg;
    cfg.epsilon = 0.01;
    cfg.cost = binary_cost(4);
    cfg.td = TdConfig{0.999999, 0.2};
    cfg.update_period_episodes = 1;
    cfg.total_env_steps = 20000;
    cfg.eval_interval_steps = 2000;
    cfg.seed = 0;
    const TrainResult res = train_tabular(cliff, cfg);
    CHECK(res.updates > 0);
    CHECK(res.max_feasibility_violation <= 1e-7);
    CHECK(res.max_duality_gap <= 1e-6);
    REQUIRE(res.curve.size() == 10);
    // Random walking scores around -2000; even a short run should beat it.
    CHECK(res.curve.back().mean_return > res.curve.front().mean_return - 100.0);
}
