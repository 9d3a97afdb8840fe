#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ottrpo/lp.hpp"
#include "ottrpo/matrix.hpp"
#include "ottrpo/mdp.hpp"

namespace ottrpo {

/**
 * Action-to-action transport cost. Zero on the diagonal, non-negative
 * everywhere; symmetry is not required (the taxi ablation costs are
 * deliberately asymmetric).
 */
struct CostMatrix {
    Matrix c;

    std::size_t size() const { return c.rows(); }
    double operator()(std::size_t a, std::size_t a2) const { return c(a, a2); }

    void validate() const {
        if (c.rows() != c.cols()) throw std::invalid_argument("CostMatrix: not square");
        for (std::size_t i = 0; i < c.rows(); ++i) {
            if (c(i, i) != 0.0) throw std::invalid_argument("CostMatrix: nonzero diagonal");
            for (std::size_t j = 0; j < c.cols(); ++j)
                if (c(i, j) < 0.0) throw std::invalid_argument("CostMatrix: negative entry");
        }
    }
};

/// 0 on the diagonal, 1 elsewhere; the induced discrepancy is total variation.
inline CostMatrix binary_cost(std::size_t n_actions) {
    if (n_actions == 0) throw std::invalid_argument("binary_cost: need at least one action");
    CostMatrix cm;
    cm.c = Matrix(n_actions, n_actions, 1.0);
    for (std::size_t i = 0; i < n_actions; ++i) cm.c(i, i) = 0.0;
    return cm;
}

enum class TaxiCostVariant { Equal, Cheap, Expensive, VeryCheap, VeryExpensive };

/**
 * Taxi costs over the split Move = {S,N,E,W} vs Passenger = {PickUp,DropOff}.
 * Within-class off-diagonal costs are 1 and c(move, passenger) is anchored at
 * 1; the variants shift c(passenger, move) by -/+ 0.2 (cheap/expensive) or
 * -/+ 0.5 (very cheap/very expensive), making the cost asymmetric.
 */
inline CostMatrix taxi_ablation_cost(TaxiCostVariant variant) {
    CostMatrix cm = binary_cost(6);
    double delta = 0.0;
    switch (variant) {
        case TaxiCostVariant::Equal: delta = 0.0; break;
        case TaxiCostVariant::Cheap: delta = -0.2; break;
        case TaxiCostVariant::Expensive: delta = 0.2; break;
        case TaxiCostVariant::VeryCheap: delta = -0.5; break;
        case TaxiCostVariant::VeryExpensive: delta = 0.5; break;
    }
    for (std::size_t p = 4; p < 6; ++p)
        for (std::size_t m = 0; m < 4; ++m) cm.c(p, m) = 1.0 + delta;
    cm.validate();
    return cm;
}

inline CostMatrix taxi_ablation_cost(const std::string& variant) {
    if (variant == "equal") return taxi_ablation_cost(TaxiCostVariant::Equal);
    if (variant == "cheap") return taxi_ablation_cost(TaxiCostVariant::Cheap);
    if (variant == "expensive") return taxi_ablation_cost(TaxiCostVariant::Expensive);
    if (variant == "very-cheap") return taxi_ablation_cost(TaxiCostVariant::VeryCheap);
    if (variant == "very-expensive") return taxi_ablation_cost(TaxiCostVariant::VeryExpensive);
    throw std::invalid_argument("unknown taxi cost variant: " + variant);
}

/**
 * Exact optimal transport discrepancy between two distributions on the same
 * finite support: min over couplings of the expected cost, solved as a small
 * transportation LP. Zero iff mu = nu whenever the cost is positive off the
 * diagonal.
 */
inline double ot_discrepancy(std::span<const double> mu, std::span<const double> nu,
                             const CostMatrix& cost) {
    const std::size_t n = cost.size();
    if (mu.size() != n || nu.size() != n)
        throw std::invalid_argument("ot_discrepancy: dimension mismatch");
    double smu = 0.0, snu = 0.0;
    bool equal = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (mu[i] < -1e-12 || nu[i] < -1e-12)
            throw std::invalid_argument("ot_discrepancy: negative mass");
        smu += mu[i];
        snu += nu[i];
        if (mu[i] != nu[i]) equal = false;
    }
    if (std::abs(smu - 1.0) > 1e-8 || std::abs(snu - 1.0) > 1e-8)
        throw std::invalid_argument("ot_discrepancy: inputs are not probability vectors");
    if (equal) return 0.0;  // identity coupling is optimal (zero diagonal)

    LinearProgram lp;
    lp.n_vars = n * n;
    lp.objective.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) lp.objective[j * n + k] = cost(j, k);
    lp.maximize = false;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> row(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) row[j * n + k] = 1.0;
        lp.a.push_back(std::move(row));
        lp.b.push_back(mu[j]);
        lp.kind.push_back(RowKind::Eq);
    }
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> row(n * n, 0.0);
        for (std::size_t j = 0; j < n; ++j) row[j * n + k] = 1.0;
        lp.a.push_back(std::move(row));
        lp.b.push_back(nu[k]);
        lp.kind.push_back(RowKind::Eq);
    }
    const LpResult res = SimplexSolver().solve(lp);
    if (res.status != LpStatus::Optimal)
        throw std::runtime_error("ot_discrepancy: transportation LP failed");
    return std::max(res.objective, 0.0);
}

/**
 * Occupancy-averaged transport discrepancy between two policies: the quantity
 * the trust region bounds. Used to audit feasibility of policy updates.
 */
inline double avg_trust_region_value(const TabularPolicy& old_policy,
                                     const TabularPolicy& new_policy,
                                     const OccupancyMeasure& occupancy, const CostMatrix& cost) {
    if (old_policy.n_states() != new_policy.n_states() ||
        old_policy.n_actions() != new_policy.n_actions() ||
        occupancy.weights.size() != old_policy.n_states() ||
        cost.size() != old_policy.n_actions())
        throw std::invalid_argument("avg_trust_region_value: dimension mismatch");
    double total = 0.0;
    for (std::size_t s = 0; s < old_policy.n_states(); ++s) {
        const double w = occupancy.weights[s];
        if (w == 0.0) continue;
        total += w * ot_discrepancy(old_policy.row(s), new_policy.row(s), cost);
    }
    return total;
}

/**
 * Occupancy-averaged KL(p(.|s) || q(.|s)). Returns +infinity as soon as some
 * weighted state has p-mass outside the support of q; this is the support
 * failure that makes KL trust regions unusable between deterministic
 * policies, while the transport discrepancy above stays finite.
 */
inline double avg_kl_divergence(const TabularPolicy& p, const TabularPolicy& q,
                                const OccupancyMeasure& occupancy) {
    if (p.n_states() != q.n_states() || p.n_actions() != q.n_actions() ||
        occupancy.weights.size() != p.n_states())
        throw std::invalid_argument("avg_kl_divergence: dimension mismatch");
    double total = 0.0;
    for (std::size_t s = 0; s < p.n_states(); ++s) {
        const double w = occupancy.weights[s];
        if (w == 0.0) continue;
        for (std::size_t a = 0; a < p.n_actions(); ++a) {
            const double pa = p.probs(s, a);
            if (pa == 0.0) continue;
            if (q.probs(s, a) == 0.0) return std::numeric_limits<double>::infinity();
            total += w * pa * std::log(pa / q.probs(s, a));
        }
    }
    return total;
}

}  // namespace ottrpo
