#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ottrpo/lp.hpp"
#include "ottrpo/matrix.hpp"
#include "ottrpo/mdp.hpp"
#include "ottrpo/transport.hpp"
#include "ottrpo/trust_region.hpp"

namespace ottrpo {

/**
 * Exact linear-programming certificate for the trust-region update. The LP is
 * over per-state couplings gamma_i(j, k) >= 0 moving the current policy mass
 * from source action j to destination k:
 *
 *   max  sum_{i,j,k} rho_i gamma_i(j,k) A(s_i, a_k)
 *   s.t. sum_k gamma_i(j,k) = pi_{i,j}          for every (i, j)
 *        sum_{i,j,k} rho_i gamma_i(j,k) c(a_j, a_k) <= epsilon
 *
 * This shares no code or structure with the scalar dual: its optimum is the
 * primal value the dual and the mass-splitting update must both attain.
 */
struct PrimalLpSolution {
    double optimal_value = 0.0;
    /// coupling[(i * A + j) * A + k] = gamma_i(j, k)
    std::vector<double> coupling;
    TabularPolicy induced_policy;
};

inline std::size_t coupling_lp_size(const TabularPolicy& policy) {
    return policy.n_states() * policy.n_actions() * policy.n_actions();
}

inline PrimalLpSolution solve_primal_lp(const TabularPolicy& policy,
                                        const OccupancyMeasure& occupancy,
                                        const Matrix& advantage, const CostMatrix& cost,
                                        double epsilon, std::size_t size_budget = 400) {
    const std::size_t S = policy.n_states(), A = policy.n_actions();
    if (advantage.rows() != S || advantage.cols() != A || occupancy.weights.size() != S ||
        cost.size() != A)
        throw std::invalid_argument("solve_primal_lp: dimension mismatch");
    if (epsilon < 0.0) throw std::invalid_argument("solve_primal_lp: epsilon must be >= 0");
    const std::size_t n_vars = coupling_lp_size(policy);
    if (n_vars > size_budget) throw std::invalid_argument("solve_primal_lp: size budget exceeded");

    const auto var = [A](std::size_t i, std::size_t j, std::size_t k) {
        return (i * A + j) * A + k;
    };

    LinearProgram lp;
    lp.n_vars = n_vars;
    lp.maximize = true;
    lp.objective.assign(n_vars, 0.0);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < A; ++j)
            for (std::size_t k = 0; k < A; ++k)
                lp.objective[var(i, j, k)] = occupancy.weights[i] * advantage(i, k);

    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < A; ++j) {
            std::vector<double> row(n_vars, 0.0);
            for (std::size_t k = 0; k < A; ++k) row[var(i, j, k)] = 1.0;
            lp.a.push_back(std::move(row));
            lp.b.push_back(policy.probs(i, j));
            lp.kind.push_back(RowKind::Eq);
        }
    {
        std::vector<double> budget(n_vars, 0.0);
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < A; ++j)
                for (std::size_t k = 0; k < A; ++k)
                    budget[var(i, j, k)] = occupancy.weights[i] * cost(j, k);
        lp.a.push_back(std::move(budget));
        lp.b.push_back(epsilon);
        lp.kind.push_back(RowKind::Le);
    }

    const LpResult res = SimplexSolver().solve(lp);
    if (res.status != LpStatus::Optimal)
        throw std::runtime_error("solve_primal_lp: LP not optimal (identity coupling is feasible)");

    PrimalLpSolution sol;
    sol.optimal_value = res.objective;
    sol.coupling = res.x;
    sol.induced_policy.probs = Matrix(S, A, 0.0);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t k = 0; k < A; ++k) {
            double mass = 0.0;
            for (std::size_t j = 0; j < A; ++j) mass += res.x[var(i, j, k)];
            sol.induced_policy.probs(i, k) = mass;
        }
    return sol;
}

struct CertificationRecord {
    bool checked = false;  ///< false when the size budget was exceeded
    bool pass = false;
    double lp_value = 0.0;
    double dual_value = 0.0;
    double update_value = 0.0;
    double lp_dual_gap = 0.0;      ///< |lp - dual| / (1 + |dual|)
    double update_lp_gap = 0.0;    ///< |update - lp| / (1 + |dual|)
    std::string status;
};

/**
 * Cross-implementation certification: the LP optimum, the dual minimum and
 * the surrogate value attained by the mass-splitting update must all agree
 * within the given relative tolerance. Instances above the LP size budget are
 * skipped with an explicit status rather than silently passed.
 */
inline CertificationRecord certify(const TabularPolicy& policy, const OccupancyMeasure& occupancy,
                                   const Matrix& advantage, const CostMatrix& cost, double epsilon,
                                   const DualSolution& dual, const UpdateReport& report,
                                   double tol = 1e-6, std::size_t size_budget = 400) {
    CertificationRecord rec;
    if (coupling_lp_size(policy) > size_budget) {
        rec.status = "skipped: LP size budget exceeded";
        return rec;
    }
    const PrimalLpSolution lp = solve_primal_lp(policy, occupancy, advantage, cost, epsilon, size_budget);
    rec.checked = true;
    rec.lp_value = lp.optimal_value;
    rec.dual_value = dual.dual_value;
    rec.update_value = report.primal_value;
    const double scale = 1.0 + std::abs(dual.dual_value);
    rec.lp_dual_gap = std::abs(lp.optimal_value - dual.dual_value) / scale;
    rec.update_lp_gap = std::abs(report.primal_value - lp.optimal_value) / scale;
    rec.pass = rec.lp_dual_gap <= tol && rec.update_lp_gap <= tol;
    rec.status = rec.pass ? "ok" : "gap above tolerance";
    return rec;
}

}  // namespace ottrpo
