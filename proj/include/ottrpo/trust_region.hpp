#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ottrpo/matrix.hpp"
#include "ottrpo/mdp.hpp"
#include "ottrpo/transport.hpp"

namespace ottrpo {

/**
 * Value and maximizer set of the lambda-regularized advantage at one (s, a):
 * max over destination actions a' of A(s, a') - lambda * c(a, a'). Exact ties
 * at the optimal multiplier are the generic case, so membership is decided up
 * to a tolerance; collapsing the set to a singleton is precisely the mistake
 * that breaks mass splitting.
 */
struct RegularizedAdvantage {
    double value = 0.0;
    std::vector<int> maximizers;
    double membership_tolerance = 0.0;
};

inline RegularizedAdvantage regularized_advantage(double lambda, std::size_t s, std::size_t a,
                                                  const Matrix& advantage, const CostMatrix& cost,
                                                  double tol = 1e-9) {
    if (lambda < 0.0) throw std::invalid_argument("regularized_advantage: lambda must be >= 0");
    if (tol <= 0.0) throw std::invalid_argument("regularized_advantage: tol must be > 0");
    RegularizedAdvantage out;
    out.value = -std::numeric_limits<double>::infinity();
    const std::size_t n = advantage.cols();
    for (std::size_t k = 0; k < n; ++k)
        out.value = std::max(out.value, advantage(s, k) - lambda * cost(a, k));
    out.membership_tolerance = tol * (1.0 + std::abs(out.value));
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(advantage(s, k) - lambda * cost(a, k) - out.value) <= out.membership_tolerance)
            out.maximizers.push_back(static_cast<int>(k));
    return out;
}

namespace detail {

inline double phi_value(double lambda, std::size_t s, std::size_t a, const Matrix& advantage,
                        const CostMatrix& cost) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < advantage.cols(); ++k)
        best = std::max(best, advantage(s, k) - lambda * cost(a, k));
    return best;
}

}  // namespace detail

/**
 * The scalar dual objective
 *   G(lambda) = lambda * epsilon + sum_i rho_i sum_j pi_{i,j} Phi_lambda(s_i, a_j),
 * convex and piecewise linear in lambda.
 */
inline double dual_objective(double lambda, const TabularPolicy& policy,
                             const OccupancyMeasure& occupancy, const Matrix& advantage,
                             const CostMatrix& cost, double epsilon) {
    if (lambda < 0.0) throw std::invalid_argument("dual_objective: lambda must be >= 0");
    if (policy.n_states() != advantage.rows() || policy.n_actions() != advantage.cols() ||
        occupancy.weights.size() != policy.n_states() || cost.size() != policy.n_actions())
        throw std::invalid_argument("dual_objective: dimension mismatch");
    double total = lambda * epsilon;
    for (std::size_t i = 0; i < policy.n_states(); ++i) {
        const double rho = occupancy.weights[i];
        if (rho == 0.0) continue;
        for (std::size_t j = 0; j < policy.n_actions(); ++j) {
            const double w = policy.probs(i, j);
            if (w == 0.0) continue;
            total += rho * w * detail::phi_value(lambda, i, j, advantage, cost);
        }
    }
    return total;
}

struct DualSolveOptions {
    /// Above this many breakpoint candidates the solver switches from exact
    /// enumeration to golden-section search refined on the local breakpoints.
    std::size_t candidate_budget = 1u << 20;
    /// Fault-injection mode: forces b_over = b_under, reproducing the
    /// no-splitting update that is suboptimal or infeasible.
    bool break_mass_splitting = false;
    double membership_tol = 1e-9;
};

/**
 * Solution of the one-dimensional dual together with everything the policy
 * update needs: the selected nearest/furthest maximizer maps, their weighted
 * transport costs c_under <= c_over, and the mixing weight t_star that makes
 * the trust-region constraint hold with equality.
 */
struct DualSolution {
    double lambda_star = 0.0;
    double dual_value = 0.0;
    IndexMatrix b_under;
    IndexMatrix b_over;
    double c_under = 0.0;
    double c_over = 0.0;
    double t_star = 1.0;
    double epsilon = 0.0;
};

namespace detail {

/// Breakpoint candidates of G: lambdas where two destination actions tie in
/// the regularized advantage at some visited (state, source-action) pair.
inline std::vector<double> dual_breakpoints(const TabularPolicy& policy,
                                            const OccupancyMeasure& occupancy,
                                            const Matrix& advantage, const CostMatrix& cost,
                                            double lo = 0.0,
                                            double hi = std::numeric_limits<double>::infinity()) {
    std::vector<double> cands;
    const std::size_t n = policy.n_actions();
    for (std::size_t i = 0; i < policy.n_states(); ++i) {
        if (occupancy.weights[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (policy.probs(i, j) == 0.0) continue;
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t k2 = 0; k2 < n; ++k2) {
                    const double dc = cost(j, k) - cost(j, k2);
                    if (dc <= 0.0) continue;
                    const double lam = (advantage(i, k) - advantage(i, k2)) / dc;
                    if (lam >= lo && lam <= hi) cands.push_back(lam);
                }
        }
    }
    return cands;
}

}  // namespace detail

/**
 * Minimizes G over [0, inf). G is convex piecewise linear with kinks only at
 * breakpoint candidates, so the minimum is attained at 0 or a breakpoint:
 * the candidates are enumerated, sorted, and searched exploiting convexity
 * (ties resolve to the smallest lambda). When the candidate count exceeds the
 * budget, a golden-section search brackets the minimum and the breakpoints
 * inside the bracket are then enumerated exactly.
 *
 * The selection maps then pick, inside each maximizer set at lambda_star, the
 * cheapest destination (preferring the source action itself, so a vacuous
 * update stays the identity) and the most expensive one; t_star mixes them so
 * the expected transport cost meets epsilon. When the constraint is slack
 * (lambda_star = 0) all mass travels through the nearest map, which the
 * right-derivative condition of G at zero guarantees feasible.
 */
inline DualSolution solve_dual(const TabularPolicy& policy, const OccupancyMeasure& occupancy,
                               const Matrix& advantage, const CostMatrix& cost, double epsilon,
                               const DualSolveOptions& opts = {}) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("solve_dual: epsilon must be > 0");
    if (policy.n_states() != advantage.rows() || policy.n_actions() != advantage.cols() ||
        occupancy.weights.size() != policy.n_states() || cost.size() != policy.n_actions())
        throw std::invalid_argument("solve_dual: dimension mismatch");

    const auto G = [&](double lam) {
        return dual_objective(lam, policy, occupancy, advantage, cost, epsilon);
    };

    // Weighted costs of the nearest/furthest selections inside the maximizer
    // sets at a given lambda. The one-sided slopes of G are eps - c_under
    // (right) and eps - c_over (left), which gives an exact optimality test:
    // lambda minimizes G iff c_under <= eps <= c_over (right slope only at 0).
    const auto selection_costs = [&](double lam) {
        double c_under = 0.0, c_over = 0.0;
        for (std::size_t i = 0; i < policy.n_states(); ++i) {
            const double rho = occupancy.weights[i];
            if (rho == 0.0) continue;
            for (std::size_t j = 0; j < policy.n_actions(); ++j) {
                const double w = policy.probs(i, j);
                if (w == 0.0) continue;
                const RegularizedAdvantage reg =
                    regularized_advantage(lam, i, j, advantage, cost, opts.membership_tol);
                double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
                for (int k : reg.maximizers) {
                    cmin = std::min(cmin, cost(j, static_cast<std::size_t>(k)));
                    cmax = std::max(cmax, cost(j, static_cast<std::size_t>(k)));
                }
                c_under += rho * w * cmin;
                c_over += rho * w * cmax;
            }
        }
        return std::pair<double, double>{c_under, c_over};
    };

    // Upper bound on the number of candidates without materializing them.
    std::size_t visited_pairs = 0;
    for (std::size_t i = 0; i < policy.n_states(); ++i) {
        if (occupancy.weights[i] == 0.0) continue;
        for (std::size_t j = 0; j < policy.n_actions(); ++j)
            if (policy.probs(i, j) != 0.0) ++visited_pairs;
    }
    const std::size_t n_act = policy.n_actions();
    const std::size_t bound = visited_pairs * n_act * n_act;

    double lambda_star = 0.0;
    double g_star = G(0.0);

    const auto scan_candidates = [&](std::vector<double>& cands) {
        cands.push_back(0.0);
        std::sort(cands.begin(), cands.end());
        cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
        // Convexity-guided narrowing with strict comparisons (a tolerance
        // here can cut off the minimizer: near-flat probes say nothing about
        // where the kink sits), then a left-to-right window scan so ties pick
        // the smallest lambda.
        std::vector<double> memo(cands.size(), std::numeric_limits<double>::quiet_NaN());
        const auto g_at = [&](std::size_t idx) {
            if (std::isnan(memo[idx])) memo[idx] = G(cands[idx]);
            return memo[idx];
        };
        std::size_t lo = 0, hi = cands.size() - 1;
        while (hi - lo > 16) {
            const std::size_t m1 = lo + (hi - lo) / 3;
            const std::size_t m2 = hi - (hi - lo) / 3;
            if (g_at(m1) < g_at(m2))
                hi = m2 - 1;
            else if (g_at(m2) < g_at(m1))
                lo = m1 + 1;
            else {
                lo = m1;
                hi = m2;
            }
        }
        std::size_t best = lo;
        for (std::size_t idx = lo; idx <= hi; ++idx)
            if (g_at(idx) < g_at(best)) best = idx;

        // Repair walk on the exact optimality test: a few ULPs of error in
        // the probes above can land one kink off, which would corrupt the
        // selected maps and overdraw the transport budget.
        for (int step = 0; step < 256; ++step) {
            const auto [cu, co] = selection_costs(cands[best]);
            if (cu > epsilon && best + 1 < cands.size())
                ++best;  // right slope still negative: minimum lies right
            else if (cands[best] > 0.0 && co < epsilon && best > 0)
                --best;  // left slope still positive: minimum lies left
            else
                break;
        }
        g_star = g_at(best);
        lambda_star = cands[best];
    };

    if (bound <= opts.candidate_budget) {
        auto cands = detail::dual_breakpoints(policy, occupancy, advantage, cost);
        scan_candidates(cands);
    } else {
        // Golden-section bracket over [0, lambda_max], then exact enumeration
        // of the breakpoints inside the final bracket.
        double a_max = -std::numeric_limits<double>::infinity();
        double a_min = std::numeric_limits<double>::infinity();
        double c_min_pos = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < advantage.rows(); ++i)
            for (std::size_t k = 0; k < advantage.cols(); ++k) {
                a_max = std::max(a_max, advantage(i, k));
                a_min = std::min(a_min, advantage(i, k));
            }
        for (std::size_t j = 0; j < cost.size(); ++j)
            for (std::size_t k = 0; k < cost.size(); ++k)
                if (cost(j, k) > 0.0) c_min_pos = std::min(c_min_pos, cost(j, k));
        if (std::isfinite(c_min_pos) && a_max > a_min) {
            double lam_hi = (a_max - a_min) / c_min_pos;
            // G is increasing with slope epsilon beyond the last breakpoint;
            // double the range until that is visible, as a safety net.
            while (G(lam_hi) < g_star && lam_hi < 1e12) lam_hi *= 2.0;
            const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
            const double tol = 1e-11 * (1.0 + lam_hi);
            double a = 0.0, b = lam_hi;
            double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
            double f1 = G(x1), f2 = G(x2);
            while (b - a > tol) {
                if (f1 < f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = G(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = G(x2);
                }
            }
            const double pad = 64.0 * tol + 1e-9;
            auto cands = detail::dual_breakpoints(policy, occupancy, advantage, cost,
                                                  std::max(0.0, a - pad), b + pad);
            cands.push_back(std::max(0.0, 0.5 * (a + b)));
            scan_candidates(cands);
        }
    }

    DualSolution sol;
    sol.lambda_star = lambda_star;
    sol.dual_value = g_star;
    sol.epsilon = epsilon;

    // Selection maps at lambda_star for every (state, source action).
    const std::size_t S = policy.n_states(), A = policy.n_actions();
    sol.b_under = IndexMatrix(S, A, 0);
    sol.b_over = IndexMatrix(S, A, 0);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < A; ++j) {
            const RegularizedAdvantage reg =
                regularized_advantage(lambda_star, i, j, advantage, cost, opts.membership_tol);
            int under = reg.maximizers.front(), over = reg.maximizers.front();
            for (int k : reg.maximizers) {
                const double ck = cost(j, static_cast<std::size_t>(k));
                const double cu = cost(j, static_cast<std::size_t>(under));
                const double co = cost(j, static_cast<std::size_t>(over));
                const bool k_is_self = static_cast<std::size_t>(k) == j;
                const bool under_is_self = static_cast<std::size_t>(under) == j;
                if (ck < cu || (ck == cu && k_is_self && !under_is_self)) under = k;
                if (ck > co) over = k;
            }
            sol.b_under(i, j) = under;
            sol.b_over(i, j) = opts.break_mass_splitting ? under : over;
        }

    sol.c_under = 0.0;
    sol.c_over = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double rho = occupancy.weights[i];
        if (rho == 0.0) continue;
        for (std::size_t j = 0; j < A; ++j) {
            const double w = policy.probs(i, j);
            if (w == 0.0) continue;
            sol.c_under += rho * w * cost(j, static_cast<std::size_t>(sol.b_under(i, j)));
            sol.c_over += rho * w * cost(j, static_cast<std::size_t>(sol.b_over(i, j)));
        }
    }

    if (sol.lambda_star > 0.0 && sol.c_over - sol.c_under > 1e-12 * (1.0 + sol.c_over)) {
        sol.t_star = std::clamp((sol.c_over - epsilon) / (sol.c_over - sol.c_under), 0.0, 1.0);
    } else {
        // Slack constraint or c_under == c_over: route everything through the
        // nearest map.
        sol.t_star = 1.0;
    }
    return sol;
}

/**
 * Outcome of one exact policy update: the new policy plus the quantities the
 * invariants talk about (primal value, dual value, audited transport spend).
 */
struct UpdateReport {
    TabularPolicy new_policy;
    double surrogate_gain = 0.0;
    double primal_value = 0.0;
    double dual_value = 0.0;
    double achieved_discrepancy = 0.0;
    double lambda_star = 0.0;
    double t_star = 1.0;
};

/**
 * The mass-splitting update: row i of the new policy is
 *   sum_j pi_{i,j} (t_star * delta_{b_under(i,j)} + (1 - t_star) * delta_{b_over(i,j)}).
 *
 * States with zero occupancy weight contribute to neither the objective nor
 * the constraint, so every row is optimal there; the update keeps such rows
 * unchanged. With estimated advantages this matters a great deal: remapping
 * unvisited states through stale values churns them between visits.
 */
inline UpdateReport update_policy_discrete(const TabularPolicy& policy,
                                           const OccupancyMeasure& occupancy,
                                           const Matrix& advantage, const CostMatrix& cost,
                                           const DualSolution& dual) {
    const std::size_t S = policy.n_states(), A = policy.n_actions();
    if (dual.b_under.rows() != S || dual.b_under.cols() != A)
        throw std::invalid_argument("update_policy_discrete: stale dual solution");

    UpdateReport rep;
    rep.new_policy.probs = Matrix(S, A, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
        if (occupancy.weights[i] == 0.0) {
            for (std::size_t k = 0; k < A; ++k) rep.new_policy.probs(i, k) = policy.probs(i, k);
            continue;
        }
        double row_sum = 0.0;
        for (std::size_t j = 0; j < A; ++j) {
            const double w = policy.probs(i, j);
            if (w == 0.0) continue;
            rep.new_policy.probs(i, static_cast<std::size_t>(dual.b_under(i, j))) += dual.t_star * w;
            rep.new_policy.probs(i, static_cast<std::size_t>(dual.b_over(i, j))) +=
                (1.0 - dual.t_star) * w;
            row_sum += w;
        }
        for (std::size_t k = 0; k < A; ++k) rep.new_policy.probs(i, k) /= row_sum;
    }

    rep.primal_value = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        const double rho = occupancy.weights[i];
        if (rho == 0.0) continue;
        for (std::size_t k = 0; k < A; ++k)
            rep.primal_value += rho * rep.new_policy.probs(i, k) * advantage(i, k);
    }
    rep.surrogate_gain = rep.primal_value;
    rep.dual_value = dual.dual_value;
    rep.achieved_discrepancy = avg_trust_region_value(policy, rep.new_policy, occupancy, cost);
    rep.lambda_star = dual.lambda_star;
    rep.t_star = dual.t_star;
    return rep;
}

struct ImprovementCertificate {
    double gain = 0.0;         ///< J(new) - J(old), exact evaluation
    double lower_bound = 0.0;  ///< (lambda*/(1-gamma)) * avg OT under the new occupancy
};

/**
 * Exact certificate for the improvement guarantee: when the update was
 * computed from the exact advantage, gain >= lower_bound >= 0 up to numerics.
 */
inline ImprovementCertificate improvement_certificate(const TabularMdp& mdp,
                                                      const TabularPolicy& old_policy,
                                                      const UpdateReport& report,
                                                      const CostMatrix& cost) {
    const ValueTables before = evaluate_exact(mdp, old_policy);
    const ValueTables after = evaluate_exact(mdp, report.new_policy);
    const OccupancyMeasure occ_new = occupancy_exact(mdp, report.new_policy);
    ImprovementCertificate cert;
    cert.gain = after.expected_return - before.expected_return;
    cert.lower_bound = report.lambda_star / (1.0 - mdp.discount) *
                       avg_trust_region_value(old_policy, report.new_policy, occ_new, cost);
    return cert;
}

}  // namespace ottrpo
