#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ottrpo/mdp.hpp"
#include "ottrpo/train.hpp"

namespace ottrpo {

/**
 * Multi-seed curve aggregate in the figure-data layout: one row per
 * checkpoint with the across-seed mean and the mean +/- std band.
 */
struct AggregateCurve {
    std::vector<std::size_t> env_steps;
    std::vector<double> mean;
    std::vector<double> std_pos;
    std::vector<double> std_neg;
};

inline AggregateCurve aggregate_curves(const std::vector<std::vector<CurvePoint>>& curves) {
    if (curves.empty()) throw std::invalid_argument("aggregate_curves: no curves");
    const std::size_t n_points = curves.front().size();
    for (const auto& c : curves)
        if (c.size() != n_points) throw std::invalid_argument("aggregate_curves: ragged curves");

    AggregateCurve agg;
    for (std::size_t p = 0; p < n_points; ++p) {
        const std::size_t x = curves.front()[p].env_steps;
        double mean = 0.0;
        for (const auto& c : curves) {
            if (c[p].env_steps != x) throw std::invalid_argument("aggregate_curves: misaligned grids");
            mean += c[p].mean_return;
        }
        mean /= static_cast<double>(curves.size());
        double var = 0.0;
        for (const auto& c : curves) {
            const double d = c[p].mean_return - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(curves.size()));
        agg.env_steps.push_back(x);
        agg.mean.push_back(mean);
        agg.std_pos.push_back(mean + sd);
        agg.std_neg.push_back(mean - sd);
    }
    return agg;
}

/// Fixed-precision float formatting so identical runs emit identical bytes.
inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_curve_csv(const std::string& path, const AggregateCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "episodes,mean,std_pos,std_neg\n";
    for (std::size_t i = 0; i < curve.env_steps.size(); ++i)
        out << curve.env_steps[i] << ',' << format_float(curve.mean[i]) << ','
            << format_float(curve.std_pos[i]) << ',' << format_float(curve.std_neg[i]) << '\n';
}

/// Stable policy artifact: row-major probability matrix plus metadata, with
/// fixed key order.
inline void write_policy_json(const std::string& path, const TabularPolicy& policy,
                              const std::map<std::string, std::string>& metadata) {
    nlohmann::ordered_json doc;
    doc["n_states"] = policy.n_states();
    doc["n_actions"] = policy.n_actions();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < policy.n_states(); ++s) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t a = 0; a < policy.n_actions(); ++a) row.push_back(policy.probs(s, a));
        rows.push_back(std::move(row));
    }
    doc["probs"] = std::move(rows);
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metadata) meta[k] = v;
    doc["metadata"] = std::move(meta);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << doc.dump(2) << '\n';
}

inline TabularPolicy read_policy_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy artifact: " + path);
    nlohmann::json doc;
    in >> doc;
    TabularPolicy policy;
    const std::size_t S = doc.at("n_states").get<std::size_t>();
    const std::size_t A = doc.at("n_actions").get<std::size_t>();
    policy.probs = Matrix(S, A, 0.0);
    const auto& rows = doc.at("probs");
    if (rows.size() != S) throw std::runtime_error("policy artifact: row count mismatch");
    for (std::size_t s = 0; s < S; ++s) {
        if (rows[s].size() != A) throw std::runtime_error("policy artifact: column count mismatch");
        for (std::size_t a = 0; a < A; ++a) policy.probs(s, a) = rows[s][a].get<double>();
    }
    policy.validate();
    return policy;
}

/**
 * Flat key-value config file: one `key value` pair per line, `#` starts a
 * comment. Values keep everything after the first whitespace run.
 */
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        std::string value;
        std::getline(ss, value);
        const auto start = value.find_first_not_of(" \t");
        value = start == std::string::npos ? std::string{} : value.substr(start);
        const auto end = value.find_last_not_of(" \t\r");
        if (end != std::string::npos) value.erase(end + 1);
        if (value.empty()) throw std::runtime_error("config key without value: " + key);
        kv[key] = value;
    }
    return kv;
}

}  // namespace ottrpo
