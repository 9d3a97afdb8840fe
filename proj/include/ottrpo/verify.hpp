#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ottrpo/envs.hpp"
#include "ottrpo/mdp.hpp"
#include "ottrpo/oracle.hpp"
#include "ottrpo/rng.hpp"
#include "ottrpo/transport.hpp"
#include "ottrpo/trust_region.hpp"

namespace ottrpo {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst_gap = 0.0;
    std::string detail;
};

/// One self-contained trust-region problem instance.
struct Instance {
    TabularPolicy policy;
    OccupancyMeasure occupancy;
    Matrix advantage;
    CostMatrix cost;
    double epsilon = 0.1;
};

inline TabularPolicy random_policy(Rng& rng, std::size_t n_states, std::size_t n_actions) {
    TabularPolicy pi;
    pi.probs = Matrix(n_states, n_actions, 0.0);
    for (std::size_t s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            pi.probs(s, a) = -std::log(1.0 - rng.uniform());
            sum += pi.probs(s, a);
        }
        for (std::size_t a = 0; a < n_actions; ++a) pi.probs(s, a) /= sum;
    }
    return pi;
}

inline CostMatrix random_cost(Rng& rng, std::size_t n_actions) {
    CostMatrix cm;
    cm.c = Matrix(n_actions, n_actions, 0.0);
    for (std::size_t i = 0; i < n_actions; ++i)
        for (std::size_t j = 0; j < n_actions; ++j)
            if (i != j) cm.c(i, j) = rng.uniform(0.05, 1.5);
    return cm;
}

/// Random dual instance: <= 4 states, <= 4 actions, advantage in [-1, 1],
/// asymmetric costs with zero diagonal, epsilon from {0.05, 0.1, ..., 0.5}.
inline Instance random_instance(Rng& rng, std::size_t max_states = 4, std::size_t max_actions = 4) {
    Instance inst;
    const std::size_t S = 1 + static_cast<std::size_t>(rng.next_u64() % max_states);
    const std::size_t A = 2 + static_cast<std::size_t>(rng.next_u64() % (max_actions - 1));
    inst.policy = random_policy(rng, S, A);
    inst.occupancy.weights.assign(S, 0.0);
    double sum = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        inst.occupancy.weights[s] = -std::log(1.0 - rng.uniform());
        sum += inst.occupancy.weights[s];
    }
    for (double& w : inst.occupancy.weights) w /= sum;
    inst.advantage = Matrix(S, A, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) inst.advantage(s, a) = rng.uniform(-1.0, 1.0);
    inst.cost = random_cost(rng, A);
    inst.epsilon = 0.05 * static_cast<double>(1 + rng.next_u64() % 10);
    return inst;
}

/// Random fully-ergodic MDP (no terminals) for exact-evaluation sweeps.
inline TabularMdp random_mdp(Rng& rng, std::size_t n_states, std::size_t n_actions, double gamma) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition.assign(n_states * n_actions * n_states, 0.0);
    mdp.reward = Matrix(n_states, n_actions, 0.0);
    mdp.start_dist.assign(n_states, 0.0);
    mdp.discount = gamma;
    mdp.terminal.assign(n_states, false);
    mdp.max_episode_steps = 200;
    double sum = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
        mdp.start_dist[s] = -std::log(1.0 - rng.uniform());
        sum += mdp.start_dist[s];
    }
    for (double& w : mdp.start_dist) w /= sum;
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
            double rowsum = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                mdp.p(s, a, s2) = -std::log(1.0 - rng.uniform());
                rowsum += mdp.p(s, a, s2);
            }
            for (std::size_t s2 = 0; s2 < n_states; ++s2) mdp.p(s, a, s2) /= rowsum;
        }
    mdp.validate();
    return mdp;
}

namespace detail {

inline void track(CheckResult& res, double gap, bool ok, const std::string& note) {
    res.worst_gap = std::max(res.worst_gap, gap);
    if (!ok && res.pass) {
        res.pass = false;
        res.detail = note;
    }
}

inline Instance example1_instance(double epsilon) {
    Instance inst;
    inst.policy.probs = Matrix(1, 2, 0.0);
    inst.policy.probs(0, 0) = 1.0;
    inst.occupancy.weights = {1.0};
    inst.advantage = Matrix(1, 2, 0.0);
    inst.advantage(0, 1) = 1.0;
    inst.cost = binary_cost(2);
    inst.epsilon = epsilon;
    return inst;
}

}  // namespace detail

/**
 * Golden analytic cases: the single-state two-action instance whose optimal
 * update moves exactly epsilon of mass, and the two-action chain with its
 * closed-form multiplier, update, and 1/epsilon convergence. Exact to 1e-9.
 */
inline CheckResult check_golden_suite() {
    CheckResult res{"golden-analytic", true, 0.0, ""};
    const double tol = 1e-9;

    // Example 1 across several radii.
    for (double eps : {0.1, 0.25, 0.3, 0.7}) {
        const Instance inst = detail::example1_instance(eps);
        const DualSolution dual =
            solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon);
        const UpdateReport rep =
            update_policy_discrete(inst.policy, inst.occupancy, inst.advantage, inst.cost, dual);
        detail::track(res, std::abs(dual.lambda_star - 1.0), std::abs(dual.lambda_star - 1.0) <= tol,
                      "example1 lambda");
        detail::track(res, std::abs(dual.t_star - (1.0 - eps)), std::abs(dual.t_star - (1.0 - eps)) <= tol,
                      "example1 t");
        detail::track(res, std::abs(rep.new_policy.probs(0, 0) - (1.0 - eps)),
                      std::abs(rep.new_policy.probs(0, 0) - (1.0 - eps)) <= tol, "example1 policy");
        detail::track(res, std::abs(rep.primal_value - eps), std::abs(rep.primal_value - eps) <= tol,
                      "example1 primal");
        detail::track(res, std::abs(rep.dual_value - eps), std::abs(rep.dual_value - eps) <= tol,
                      "example1 dual");
        detail::track(res, 0.0, dual.b_under(0, 0) == 0 && dual.b_over(0, 0) == 1, "example1 maps");
        const CertificationRecord cert = certify(inst.policy, inst.occupancy, inst.advantage,
                                                 inst.cost, inst.epsilon, dual, rep, 1e-9);
        detail::track(res, std::max(cert.lp_dual_gap, cert.update_lp_gap), cert.checked && cert.pass,
                      "example1 lp certificate");
    }

    // Chain: lambda* = 2 iff theta >= eps else 0, update pi(L) = max(theta - eps, 0).
    const TabularMdp chain = build_two_action_chain();
    for (const auto& [theta, eps] : std::vector<std::pair<double, double>>{
             {0.5, 0.1}, {0.3, 0.1}, {0.05, 0.1}, {0.8, 0.25}, {0.1, 0.4}}) {
        const TabularPolicy pi = chain_policy(theta);
        const ValueTables tables = evaluate_exact(chain, pi);
        const OccupancyMeasure occ = occupancy_exact(chain, pi);
        detail::track(res, std::abs(occ.weights[0] - 1.0), std::abs(occ.weights[0] - 1.0) <= tol,
                      "chain occupancy");
        const CostMatrix cost = binary_cost(2);
        const DualSolution dual = solve_dual(pi, occ, tables.advantage, cost, eps);
        const double lam_expected = theta >= eps ? 2.0 : 0.0;
        detail::track(res, std::abs(dual.lambda_star - lam_expected),
                      std::abs(dual.lambda_star - lam_expected) <= tol, "chain lambda");
        const UpdateReport rep = update_policy_discrete(pi, occ, tables.advantage, cost, dual);
        const double new_left = std::max(theta - eps, 0.0);
        detail::track(res, std::abs(rep.new_policy.probs(0, chain::kLeft) - new_left),
                      std::abs(rep.new_policy.probs(0, chain::kLeft) - new_left) <= tol,
                      "chain update");
        if (theta >= eps) {
            detail::track(res, std::abs(dual.c_under), std::abs(dual.c_under) <= tol, "chain c_under");
            detail::track(res, std::abs(dual.c_over - theta), std::abs(dual.c_over - theta) <= tol,
                          "chain c_over");
            const double t_expected = (theta - eps) / theta;
            detail::track(res, std::abs(dual.t_star - t_expected),
                          std::abs(dual.t_star - t_expected) <= tol, "chain t");
        }
        const double gain =
            evaluate_exact(chain, rep.new_policy).expected_return - tables.expected_return;
        const double gain_expected = 2.0 * (theta - new_left);
        detail::track(res, std::abs(gain - gain_expected), std::abs(gain - gain_expected) <= tol,
                      "chain improvement");
    }

    // Convergence from theta = 1 with eps = 0.25 in ceil(1/eps) = 4 updates.
    {
        const CostMatrix cost = binary_cost(2);
        TabularPolicy pi = chain_policy(1.0);
        int updates_to_optimal = 0;
        for (int k = 1; k <= 6; ++k) {
            const ValueTables tables = evaluate_exact(chain, pi);
            const OccupancyMeasure occ = occupancy_exact(chain, pi);
            const DualSolution dual = solve_dual(pi, occ, tables.advantage, cost, 0.25);
            pi = update_policy_discrete(pi, occ, tables.advantage, cost, dual).new_policy;
            if (updates_to_optimal == 0 && std::abs(pi.probs(0, chain::kRight) - 1.0) <= tol)
                updates_to_optimal = k;
        }
        detail::track(res, std::abs(updates_to_optimal - 4.0), updates_to_optimal == 4,
                      "chain convergence in 4 updates");
    }
    return res;
}

/**
 * Strong-duality certification sweep: on seeded random instances the LP
 * optimum, the dual minimum and the value attained by the mass-splitting
 * update agree to 1e-6 relative, and every update stays inside the trust
 * region (audited with the exact transport solver).
 */
inline CheckResult check_strong_duality(std::size_t n_instances, std::uint64_t seed) {
    CheckResult res{"strong-duality-certification", true, 0.0, ""};
    Rng rng(seed);
    for (std::size_t i = 0; i < n_instances; ++i) {
        const Instance inst = random_instance(rng);
        const DualSolution dual =
            solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon);
        const UpdateReport rep =
            update_policy_discrete(inst.policy, inst.occupancy, inst.advantage, inst.cost, dual);
        const CertificationRecord cert = certify(inst.policy, inst.occupancy, inst.advantage,
                                                 inst.cost, inst.epsilon, dual, rep, 1e-6);
        detail::track(res, std::max(cert.lp_dual_gap, cert.update_lp_gap), cert.checked && cert.pass,
                      "certification gap, instance " + std::to_string(i));
        detail::track(res, rep.achieved_discrepancy - inst.epsilon,
                      rep.achieved_discrepancy <= inst.epsilon + 1e-7,
                      "feasibility, instance " + std::to_string(i));
        // DualSolution internal consistency.
        detail::track(res, dual.c_under - dual.c_over, dual.c_under <= dual.c_over + 1e-10,
                      "c_under <= c_over");
        if (dual.lambda_star > 0.0) {
            detail::track(res, std::max(dual.c_under - inst.epsilon, inst.epsilon - dual.c_over),
                          dual.c_under - 1e-8 <= inst.epsilon && inst.epsilon <= dual.c_over + 1e-8,
                          "KKT bracket");
            const double mix = dual.t_star * dual.c_under + (1.0 - dual.t_star) * dual.c_over;
            detail::track(res, std::abs(mix - inst.epsilon), std::abs(mix - inst.epsilon) <= 1e-8,
                          "budget mix");
        }
    }
    return res;
}

/**
 * Improvement sweep: on random ergodic MDPs with the exact advantage, the
 * update never degrades the return and clears the multiplier-weighted
 * transport lower bound.
 */
inline CheckResult check_improvement(std::size_t n_instances, std::uint64_t seed) {
    CheckResult res{"monotonic-improvement", true, 0.0, ""};
    Rng rng(seed);
    for (std::size_t i = 0; i < n_instances; ++i) {
        const std::size_t S = 2 + rng.next_u64() % 3;
        const std::size_t A = 2 + rng.next_u64() % 2;
        const double gamma = rng.uniform(0.2, 0.9);
        const TabularMdp mdp = random_mdp(rng, S, A, gamma);
        const TabularPolicy pi = random_policy(rng, S, A);
        const ValueTables tables = evaluate_exact(mdp, pi);
        const OccupancyMeasure occ = occupancy_exact(mdp, pi);
        const CostMatrix cost = random_cost(rng, A);
        const double eps = rng.uniform(0.05, 0.5);
        const DualSolution dual = solve_dual(pi, occ, tables.advantage, cost, eps);
        const UpdateReport rep = update_policy_discrete(pi, occ, tables.advantage, cost, dual);
        const ImprovementCertificate cert = improvement_certificate(mdp, pi, rep, cost);
        detail::track(res, -cert.gain, cert.gain >= -1e-7,
                      "gain negative, instance " + std::to_string(i));
        detail::track(res, cert.lower_bound - cert.gain, cert.gain >= cert.lower_bound - 1e-6,
                      "bound violated, instance " + std::to_string(i));
        detail::track(res, rep.achieved_discrepancy - eps, rep.achieved_discrepancy <= eps + 1e-7,
                      "feasibility, instance " + std::to_string(i));
    }
    return res;
}

/**
 * Scalar-dual structure: convexity of G in lambda, monotonicity and uniform
 * boundedness of the regularized advantage, and the one-sided derivative
 * identities at the optimum against (eps - c_under) / (eps - c_over).
 */
inline CheckResult check_lemma_properties(std::size_t n_instances, std::uint64_t seed) {
    CheckResult res{"dual-structure", true, 0.0, ""};
    Rng rng(seed);
    const double h = 1e-6;
    std::size_t done = 0;
    std::size_t attempts = 0;
    while (done < n_instances && attempts < n_instances * 50) {
        ++attempts;
        const Instance inst = random_instance(rng);
        const auto G = [&](double lam) {
            return dual_objective(lam, inst.policy, inst.occupancy, inst.advantage, inst.cost,
                                  inst.epsilon);
        };

        double a_abs = 0.0;
        for (double v : inst.advantage.data()) a_abs = std::max(a_abs, std::abs(v));
        const double lam_cap = 2.0 * (1.0 + a_abs) / 0.05;

        // Convexity via midpoints and Phi monotonicity/bound at random draws.
        for (int k = 0; k < 8; ++k) {
            const double l1 = rng.uniform(0.0, lam_cap);
            const double l2 = rng.uniform(0.0, lam_cap);
            const double gap = G(0.5 * (l1 + l2)) - 0.5 * (G(l1) + G(l2));
            detail::track(res, gap, gap <= 1e-10, "G convexity");

            const std::size_t s = rng.next_u64() % inst.policy.n_states();
            const std::size_t a = rng.next_u64() % inst.policy.n_actions();
            const double lo = std::min(l1, l2), hi = std::max(l1, l2);
            const double phi_lo = regularized_advantage(lo, s, a, inst.advantage, inst.cost).value;
            const double phi_hi = regularized_advantage(hi, s, a, inst.advantage, inst.cost).value;
            detail::track(res, phi_hi - phi_lo, phi_hi <= phi_lo + 1e-12, "Phi monotonicity");
            detail::track(res, std::abs(phi_lo) - a_abs, std::abs(phi_lo) <= a_abs + 1e-12,
                          "Phi bound");
        }

        // One-sided derivatives at lambda*, away from neighbouring kinks.
        const DualSolution dual =
            solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon);
        auto kinks = detail::dual_breakpoints(inst.policy, inst.occupancy, inst.advantage, inst.cost);
        bool isolated = true;
        for (double k : kinks)
            if (std::abs(k - dual.lambda_star) > 1e-9 && std::abs(k - dual.lambda_star) < 10.0 * h)
                isolated = false;
        if (!isolated) continue;  // resample: finite differences would straddle a kink

        const double g_star = dual.dual_value;
        const double right = (G(dual.lambda_star + h) - g_star) / h;
        detail::track(res, std::abs(right - (inst.epsilon - dual.c_under)),
                      std::abs(right - (inst.epsilon - dual.c_under)) <= 1e-6, "right derivative");
        if (dual.lambda_star >= h) {
            const double left = (g_star - G(dual.lambda_star - h)) / h;
            detail::track(res, std::abs(left - (inst.epsilon - dual.c_over)),
                          std::abs(left - (inst.epsilon - dual.c_over)) <= 1e-6, "left derivative");
        }
        ++done;
    }
    if (done < n_instances) {
        res.pass = false;
        res.detail = "could not isolate enough instances";
    }
    return res;
}

/**
 * Fault injection: collapsing b_over onto b_under (no mass splitting) must
 * break optimality or feasibility on the golden single-state instance.
 */
inline CheckResult check_mass_splitting_fault() {
    CheckResult res{"mass-splitting-fault-detected", true, 0.0, ""};
    const Instance inst = detail::example1_instance(0.3);
    DualSolveOptions opts;
    opts.break_mass_splitting = true;
    const DualSolution dual =
        solve_dual(inst.policy, inst.occupancy, inst.advantage, inst.cost, inst.epsilon, opts);
    const UpdateReport rep =
        update_policy_discrete(inst.policy, inst.occupancy, inst.advantage, inst.cost, dual);
    const CertificationRecord cert = certify(inst.policy, inst.occupancy, inst.advantage, inst.cost,
                                             inst.epsilon, dual, rep, 1e-6);
    const bool infeasible = rep.achieved_discrepancy > inst.epsilon + 1e-7;
    const bool suboptimal = cert.checked && cert.update_lp_gap > 1e-6;
    res.pass = infeasible || suboptimal;
    res.worst_gap = cert.update_lp_gap;
    res.detail = res.pass ? (infeasible ? "update infeasible" : "update suboptimal")
                          : "fault not detected";
    return res;
}

/**
 * Support regression: for the CliffWalking optimal/candidate pair, which
 * differ at a single visited state, the averaged transport discrepancy is
 * finite and positive while the same-direction averaged KL divergence is
 * infinite (support mismatch).
 */
inline CheckResult check_kl_support() {
    CheckResult res{"ot-finite-kl-infinite", true, 0.0, ""};
    const TabularMdp mdp = build_cliffwalking();
    const TabularPolicy optimal = cliffwalking_optimal_policy();
    const TabularPolicy candidate = cliffwalking_candidate_policy();
    const OccupancyMeasure occ = occupancy_exact(mdp, candidate);
    const CostMatrix cost = binary_cost(4);
    const double ot = avg_trust_region_value(candidate, optimal, occ, cost);
    const double kl = avg_kl_divergence(optimal, candidate, occ);
    res.pass = std::isfinite(ot) && ot > 0.0 && std::isinf(kl);
    res.worst_gap = ot;
    std::ostringstream note;
    note << "ot=" << ot << " kl=" << (std::isinf(kl) ? "inf" : "finite");
    res.detail = note.str();
    return res;
}

}  // namespace ottrpo
