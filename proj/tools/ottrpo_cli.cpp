// Command-line front end: train / verify / sweep / eval.
//
// Exit codes: 0 success, 1 check failure, 2 usage or config error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ottrpo/continuous.hpp"
#include "ottrpo/envs.hpp"
#include "ottrpo/io.hpp"
#include "ottrpo/train.hpp"
#include "ottrpo/verify.hpp"

namespace {

using namespace ottrpo;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        seeds.push_back(std::stoull(token));
    }
    if (seeds.empty()) throw UsageError("seed list is empty");
    return seeds;
}

/// Environment-specific defaults; config file entries and explicit CLI flags
/// override them in that order.
std::map<std::string, std::string> env_defaults(const std::string& env) {
    if (env == "cliffwalking")
        return {{"cost", "binary"},        {"epsilon", "0.01"},      {"alpha", "0.999999"},
                {"gamma_td", "0.2"},       {"update_period", "1"},   {"steps", "500000"},
                {"eval_interval", "5000"}, {"eval_episodes", "10"},  {"advantage", "td"},
                {"occupancy", "empirical"}, {"bootstrap", "qmax"},   {"warm_start", "1"}};
    if (env == "taxi")
        return {{"cost", "binary"},        {"epsilon", "0.01"},      {"alpha", "0.9"},
                {"gamma_td", "0.5"},       {"update_period", "32"},  {"steps", "450000"},
                {"eval_interval", "4500"}, {"eval_episodes", "10"},  {"advantage", "td"},
                {"occupancy", "empirical"}, {"bootstrap", "qmax"},   {"warm_start", "1"}};
    if (env == "chain")
        return {{"cost", "binary"},     {"epsilon", "0.25"},     {"alpha", "0.9"},
                {"gamma_td", "0.5"},    {"update_period", "1"},  {"steps", "12"},
                {"eval_interval", "1"}, {"eval_episodes", "10"}, {"advantage", "exact"},
                {"occupancy", "exact"}, {"bootstrap", "sarsa"},  {"warm_start", "0"}};
    if (env == "cont-toy")
        return {{"cost", "sq-euclid"},     {"epsilon", "0.05"},     {"steps", "10240"},
                {"eval_interval", "512"},  {"eval_episodes", "10"}, {"alpha", "0.9"},
                {"gamma_td", "0.5"},       {"update_period", "1"},  {"advantage", "gae"},
                {"occupancy", "empirical"}, {"bootstrap", "sarsa"}, {"warm_start", "0"}};
    throw UsageError("unknown environment: " + env);
}

CostMatrix resolve_cost(const std::string& name, std::size_t n_actions) {
    if (name == "binary") return binary_cost(n_actions);
    if (name == "equal" || name == "cheap" || name == "expensive" || name == "very-cheap" ||
        name == "very-expensive") {
        if (n_actions != 6) throw UsageError("cost variant '" + name + "' needs the 6-action taxi");
        return taxi_ablation_cost(name);
    }
    if (name == "sq-euclid")
        throw UsageError("sq-euclid cost applies to the continuous environment only");
    throw UsageError("unknown cost variant: " + name);
}

struct ResolvedRun {
    std::string env;
    std::string cost_name;
    std::map<std::string, std::string> params;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
};

double get_num(const std::map<std::string, std::string>& kv, const std::string& key) {
    return std::stod(kv.at(key));
}
std::size_t get_count(const std::map<std::string, std::string>& kv, const std::string& key) {
    return static_cast<std::size_t>(std::stoull(kv.at(key)));
}

TrainConfig make_train_config(const ResolvedRun& run, const TabularMdp& mdp, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epsilon = get_num(run.params, "epsilon");
    cfg.cost = resolve_cost(run.cost_name, mdp.n_actions);
    cfg.td.alpha = get_num(run.params, "alpha");
    cfg.td.gamma_td = get_num(run.params, "gamma_td");
    cfg.update_period_episodes = get_count(run.params, "update_period");
    cfg.total_env_steps = get_count(run.params, "steps");
    cfg.eval_interval_steps = get_count(run.params, "eval_interval");
    cfg.eval_episodes = get_count(run.params, "eval_episodes");
    cfg.seed = seed;
    const std::string bootstrap = run.params.at("bootstrap");
    if (bootstrap == "qmax")
        cfg.td.bootstrap = TdBootstrap::MaxAction;
    else if (bootstrap == "sarsa")
        cfg.td.bootstrap = TdBootstrap::NextAction;
    else
        throw UsageError("unknown bootstrap mode: " + bootstrap);
    cfg.warm_start_q = run.params.at("warm_start") != "0";
    const std::string adv = run.params.at("advantage");
    if (adv == "td")
        cfg.advantage_mode = AdvantageMode::Td;
    else if (adv == "exact")
        cfg.advantage_mode = AdvantageMode::Exact;
    else
        throw UsageError("unknown advantage mode: " + adv);
    const std::string occ = run.params.at("occupancy");
    if (occ == "empirical")
        cfg.occupancy_mode = OccupancyMode::Empirical;
    else if (occ == "exact")
        cfg.occupancy_mode = OccupancyMode::Exact;
    else
        throw UsageError("unknown occupancy mode: " + occ);
    if (run.env == "chain") cfg.initial_policy = chain_policy(1.0);
    return cfg;
}

void write_raw_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "episodes,return\n";
    for (const auto& pt : curve) out << pt.env_steps << ',' << format_float(pt.mean_return) << '\n';
}

/// Runs one multi-seed discrete training job and writes per-seed raw curves,
/// the aggregate CSV, and per-seed policy artifacts. Returns per-seed results.
std::vector<TrainResult> run_discrete_training(const ResolvedRun& run, const std::string& csv_name) {
    const TabularMdp mdp = build_env(run.env);
    std::filesystem::create_directories(run.out_dir);

    std::vector<std::future<TrainResult>> futures;
    for (std::uint64_t seed : run.seeds) {
        TrainConfig cfg = make_train_config(run, mdp, seed);
        futures.push_back(std::async(std::launch::async,
                                     [&mdp, cfg]() { return train_tabular(mdp, cfg); }));
    }
    std::vector<TrainResult> results;
    results.reserve(futures.size());
    for (auto& f : futures) results.push_back(f.get());

    std::vector<std::vector<CurvePoint>> curves;
    for (std::size_t i = 0; i < results.size(); ++i) {
        curves.push_back(results[i].curve);
        const std::string tag = std::to_string(run.seeds[i]);
        write_raw_curve(run.out_dir + "/seed" + tag + ".csv", results[i].curve);
        write_policy_json(run.out_dir + "/policy_seed" + tag + ".json", results[i].final_policy,
                          {{"env", run.env},
                           {"cost", run.cost_name},
                           {"epsilon", run.params.at("epsilon")},
                           {"seed", tag}});
    }
    write_curve_csv(run.out_dir + "/" + csv_name, aggregate_curves(curves));
    return results;
}

int cmd_train(const ResolvedRun& run) {
    if (run.env == "cont-toy") {
        if (run.cost_name != "sq-euclid")
            throw UsageError("the continuous environment uses --cost sq-euclid");
        std::filesystem::create_directories(run.out_dir);
        const std::size_t steps = get_count(run.params, "steps");
        ContTrainConfig base;
        base.epsilon = get_num(run.params, "epsilon");
        base.cycles = std::max<std::size_t>(1, steps / base.rollout_steps);
        base.eval_episodes = get_count(run.params, "eval_episodes");

        std::vector<std::vector<CurvePoint>> curves;
        for (std::uint64_t seed : run.seeds) {
            ContTrainConfig cfg = base;
            cfg.seed = seed;
            const ContTrainResult res = train_continuous(cfg);
            std::vector<CurvePoint> curve;
            for (std::size_t i = 0; i < res.eval_returns.size(); ++i)
                curve.push_back({i * cfg.rollout_steps, res.eval_returns[i]});
            curves.push_back(curve);
            write_raw_curve(run.out_dir + "/seed" + std::to_string(seed) + ".csv", curve);
            std::printf("seed %llu: first=%.3f last=%.3f\n",
                        static_cast<unsigned long long>(seed), res.eval_returns.front(),
                        res.eval_returns.back());
        }
        write_curve_csv(run.out_dir + "/curve.csv", aggregate_curves(curves));
        std::printf("wrote %s\n", (run.out_dir + "/curve.csv").c_str());
        return kExitOk;
    }

    const auto results = run_discrete_training(run, "curve.csv");
    const std::size_t total = get_count(run.params, "steps");
    double final_mean = 0.0, worst_violation = 0.0, worst_gap = 0.0;
    std::size_t total_updates = 0;
    for (const auto& r : results) {
        final_mean += final_window_mean(r, 0.10, total);
        worst_violation = std::max(worst_violation, r.max_feasibility_violation);
        worst_gap = std::max(worst_gap, r.max_duality_gap);
        total_updates += r.updates;
    }
    final_mean /= static_cast<double>(results.size());
    std::printf("env=%s seeds=%zu updates=%zu final10%%=%.3f max_trust_violation=%.2e max_duality_gap=%.2e\n",
                run.env.c_str(), results.size(), total_updates, final_mean, worst_violation, worst_gap);
    std::printf("wrote %s\n", (run.out_dir + "/curve.csv").c_str());
    return kExitOk;
}

int cmd_verify(const std::string& scope, std::size_t n_random, std::uint64_t seed,
               bool break_mass_splitting) {
    std::vector<CheckResult> checks;
    if (scope == "golden" || scope == "all") {
        checks.push_back(check_golden_suite());
        checks.push_back(check_mass_splitting_fault());
        checks.push_back(check_kl_support());
    }
    if (scope == "random" || scope == "all") {
        checks.push_back(check_strong_duality(n_random, seed));
        checks.push_back(check_improvement(n_random, seed + 1));
        checks.push_back(check_lemma_properties(std::max<std::size_t>(1, n_random / 2), seed + 2));
    }
    if (checks.empty()) throw UsageError("unknown scope: " + scope + " (use golden|random|all)");

    if (break_mass_splitting) {
        // Fault injection into the live pipeline: the certification sweep is
        // expected to fail, demonstrating why mass splitting matters.
        CheckResult faulty{"strong-duality-with-fault", true, 0.0, ""};
        Rng rng(seed);
        DualSolveOptions opts;
        opts.break_mass_splitting = true;
        for (std::size_t i = 0; i < std::max<std::size_t>(1, n_random); ++i) {
            const Instance inst = i == 0 ? detail::example1_instance(0.3) : random_instance(rng);
            const DualSolution dual =
                solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon, opts);
            const UpdateReport rep =
                update_policy_discrete(inst.policy, inst.occupancy, inst.advantage, inst.cost, dual);
            const CertificationRecord cert = certify(inst.policy, inst.occupancy, inst.advantage,
                                                     inst.cost, inst.epsilon, dual, rep, 1e-6);
            detail::track(faulty, std::max(cert.update_lp_gap, rep.achieved_discrepancy - inst.epsilon),
                          cert.pass && rep.achieved_discrepancy <= inst.epsilon + 1e-7,
                          "instance " + std::to_string(i));
        }
        checks.push_back(faulty);
    }

    bool all_pass = true;
    for (const auto& c : checks) {
        std::printf("%-34s %s  worst_gap=%.3e%s%s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                    c.worst_gap, c.detail.empty() ? "" : "  ", c.detail.c_str());
        all_pass = all_pass && c.pass;
    }
    return all_pass ? kExitOk : kExitCheckFailure;
}

int cmd_sweep(const std::string& grid_path, ResolvedRun base) {
    std::ifstream in(grid_path);
    if (!in) throw UsageError("cannot open grid file: " + grid_path);
    std::vector<std::string> epsilons{base.params.at("epsilon")};
    std::vector<std::string> costs{base.cost_name};
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::vector<std::string> values;
        std::string v;
        while (ss >> v) values.push_back(v);
        if (values.empty()) throw UsageError("grid key without values: " + key);
        if (key == "epsilon")
            epsilons = values;
        else if (key == "cost")
            costs = values;
        else
            throw UsageError("unknown grid key: " + key + " (use epsilon|cost)");
    }
    for (const auto& e : epsilons)
        if (!(std::stod(e) > 0.0)) throw UsageError("grid epsilon must be > 0: " + e);

    std::filesystem::create_directories(base.out_dir);
    std::ofstream index(base.out_dir + "/index.csv");
    index << "epsilon,cost,file\n";
    for (const auto& eps : epsilons)
        for (const auto& cost : costs) {
            ResolvedRun cell = base;
            cell.params["epsilon"] = eps;
            cell.cost_name = cost;
            const std::string name = "eps" + eps + "_" + cost + ".csv";
            cell.out_dir = base.out_dir + "/eps" + eps + "_" + cost;
            run_discrete_training(cell, "curve.csv");
            std::filesystem::copy_file(cell.out_dir + "/curve.csv", base.out_dir + "/" + name,
                                       std::filesystem::copy_options::overwrite_existing);
            index << eps << ',' << cost << ',' << name << '\n';
            std::printf("sweep cell epsilon=%s cost=%s done\n", eps.c_str(), cost.c_str());
        }
    return kExitOk;
}

int cmd_eval(const std::string& policy_path, const std::string& env_name, std::size_t episodes,
             std::uint64_t seed) {
    const TabularMdp mdp = build_env(env_name);
    const TabularPolicy policy = read_policy_json(policy_path);
    if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
        throw UsageError("policy artifact does not match environment dimensions");
    const auto episodes_data = rollout(mdp, policy, episodes, seed);
    double mean = 0.0;
    for (const auto& t : episodes_data) mean += t.total_reward();
    mean /= static_cast<double>(episodes);
    double var = 0.0;
    for (const auto& t : episodes_data) {
        const double d = t.total_reward() - mean;
        var += d * d;
    }
    std::printf("episodes=%zu mean_return=%.3f std=%.3f\n", episodes, mean,
                std::sqrt(var / static_cast<double>(episodes)));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-transport trust-region policy optimization"};
    app.require_subcommand(1);

    std::string env = "cliffwalking", cost, config_path, out_dir = "out", seeds_text = "0";
    std::string epsilon, alpha, gamma_td, update_period, steps, eval_interval, eval_episodes;
    std::string advantage_mode, occupancy_mode, bootstrap_mode, warm_start;

    auto* train = app.add_subcommand("train", "Run a multi-seed training job");
    train->add_option("--env", env, "cliffwalking|taxi|chain|cont-toy");
    train->add_option("--cost", cost, "binary|equal|cheap|expensive|very-cheap|very-expensive|sq-euclid");
    train->add_option("--epsilon", epsilon, "trust-region radius");
    train->add_option("--alpha", alpha, "TD learning rate");
    train->add_option("--gamma-td", gamma_td, "TD/occupancy discount");
    train->add_option("--update-period", update_period, "episodes per policy update");
    train->add_option("--steps", steps, "total environment steps");
    train->add_option("--eval-interval", eval_interval, "evaluation cadence in steps");
    train->add_option("--eval-episodes", eval_episodes, "episodes per evaluation point");
    train->add_option("--advantage", advantage_mode, "td|exact");
    train->add_option("--occupancy", occupancy_mode, "empirical|exact");
    train->add_option("--bootstrap", bootstrap_mode, "qmax|sarsa TD target");
    train->add_option("--warm-start", warm_start, "1 keeps the Q table across updates");
    train->add_option("--seeds", seeds_text, "comma-separated seed list");
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--config", config_path, "key-value config file");

    std::string scope = "all";
    std::size_t n_random = 100;
    std::uint64_t verify_seed = 20240707;
    bool break_mass = false;
    auto* verify = app.add_subcommand("verify", "Run the certification and invariant suites");
    verify->add_option("--scope", scope, "golden|random|all");
    verify->add_option("--n", n_random, "number of random instances");
    verify->add_option("--seed", verify_seed, "random suite seed");
    verify->add_flag("--break-mass-splitting", break_mass,
                     "inject the no-splitting fault (the suite is expected to fail)");

    std::string grid_path;
    auto* sweep = app.add_subcommand("sweep", "Run a parameter grid of training jobs");
    sweep->add_option("--grid", grid_path, "grid file (lines: 'epsilon v...', 'cost v...')")->required();
    sweep->add_option("--env", env, "environment");
    sweep->add_option("--seeds", seeds_text, "comma-separated seed list");
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--config", config_path, "key-value config file");
    sweep->add_option("--steps", steps, "total environment steps");
    sweep->add_option("--eval-interval", eval_interval, "evaluation cadence in steps");

    std::string policy_path, eval_env = "cliffwalking";
    std::size_t eval_n = 100;
    std::uint64_t eval_seed = 0;
    auto* evalc = app.add_subcommand("eval", "Evaluate a stored policy artifact");
    evalc->add_option("--policy", policy_path, "policy JSON artifact")->required();
    evalc->add_option("--env", eval_env, "environment");
    evalc->add_option("--episodes", eval_n, "evaluation episodes");
    evalc->add_option("--seed", eval_seed, "evaluation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (verify->parsed()) return cmd_verify(scope, n_random, verify_seed, break_mass);
        if (evalc->parsed()) return cmd_eval(policy_path, eval_env, eval_n, eval_seed);

        // train / sweep share the layered configuration.
        std::map<std::string, std::string> file_kv;
        if (!config_path.empty()) {
            if (!std::filesystem::exists(config_path))
                throw UsageError("cannot open config file: " + config_path);
            file_kv = parse_config_file(config_path);
        }
        ResolvedRun run;
        run.env = file_kv.count("env") ? file_kv.at("env") : env;
        run.params = env_defaults(run.env);
        for (const auto& [k, v] : file_kv) {
            if (k == "env") continue;
            if (k == "seeds") seeds_text = v;
            else if (k == "out") out_dir = v;
            else if (k == "cost") run.params["cost"] = v;
            else {
                if (!run.params.count(k)) throw UsageError("unknown config key: " + k);
                run.params[k] = v;
            }
        }
        const auto override_if = [&](const std::string& key, const std::string& val) {
            if (!val.empty()) run.params[key] = val;
        };
        override_if("epsilon", epsilon);
        override_if("alpha", alpha);
        override_if("gamma_td", gamma_td);
        override_if("update_period", update_period);
        override_if("steps", steps);
        override_if("eval_interval", eval_interval);
        override_if("eval_episodes", eval_episodes);
        override_if("advantage", advantage_mode);
        override_if("occupancy", occupancy_mode);
        override_if("bootstrap", bootstrap_mode);
        override_if("warm_start", warm_start);
        if (!cost.empty()) run.params["cost"] = cost;
        run.cost_name = run.params.at("cost");
        run.seeds = parse_seed_list(seeds_text);
        run.out_dir = out_dir;

        if (sweep->parsed()) return cmd_sweep(grid_path, run);
        return cmd_train(run);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheckFailure;
    }
}
