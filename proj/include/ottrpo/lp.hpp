#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ottrpo {

enum class RowKind { Eq, Le };
enum class LpStatus { Optimal, Infeasible, Unbounded };

/// min (or max) objective^T x  subject to  a[i] x {=,<=} b[i],  x >= 0.
struct LinearProgram {
    std::size_t n_vars = 0;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    std::vector<RowKind> kind;
    std::vector<double> objective;
    bool maximize = false;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

/**
 * Two-phase dense-tableau simplex with Bland's anti-cycling rule. Built for
 * tiny instances (tens of variables): every reduced-cost row is re-priced
 * from scratch, entering columns are chosen by smallest index, and ratio-test
 * ties resolve to the smallest basic index, which guarantees termination on
 * the heavily degenerate transportation bases this library feeds it.
 */
class SimplexSolver {
public:
    explicit SimplexSolver(double pivot_tol = 1e-10) : tol_(pivot_tol) {}

    LpResult solve(const LinearProgram& lp) const {
        const std::size_t m = lp.a.size();
        if (lp.b.size() != m || lp.kind.size() != m || lp.objective.size() != lp.n_vars)
            throw std::invalid_argument("SimplexSolver: inconsistent problem dimensions");

        std::size_t n_slack = 0;
        for (RowKind k : lp.kind)
            if (k == RowKind::Le) ++n_slack;
        const std::size_t n_struct = lp.n_vars + n_slack;
        const std::size_t n_total = n_struct + m;  // one artificial per row
        const std::size_t rhs = n_total;

        // Tableau rows: structural | artificial | rhs, with rhs >= 0.
        std::vector<std::vector<double>> t(m, std::vector<double>(n_total + 1, 0.0));
        std::vector<std::size_t> basis(m);
        {
            std::size_t slack = lp.n_vars;
            for (std::size_t i = 0; i < m; ++i) {
                const double sign = lp.b[i] < 0.0 ? -1.0 : 1.0;
                for (std::size_t j = 0; j < lp.n_vars; ++j) t[i][j] = sign * lp.a[i][j];
                t[i][rhs] = sign * lp.b[i];
                if (lp.kind[i] == RowKind::Le) t[i][slack++] = sign;
                t[i][n_struct + i] = 1.0;
                basis[i] = n_struct + i;
            }
        }

        // Phase 1: minimize the sum of artificials.
        std::vector<double> phase1_cost(n_total, 0.0);
        for (std::size_t i = 0; i < m; ++i) phase1_cost[n_struct + i] = 1.0;
        if (!iterate(t, basis, phase1_cost, n_total, rhs, n_total))
            throw std::runtime_error("SimplexSolver: phase 1 unbounded");  // cannot happen
        double infeas = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] >= n_struct) infeas += t[i][rhs];
        if (infeas > 1e-7) return {LpStatus::Infeasible, 0.0, {}};

        // Drive zero-level artificials out of the basis where possible. Rows
        // whose artificial cannot leave are redundant and stay inert.
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] < n_struct) continue;
            for (std::size_t j = 0; j < n_struct; ++j) {
                if (std::abs(t[i][j]) > tol_) {
                    pivot(t, basis, i, j, rhs);
                    break;
                }
            }
        }

        // Phase 2 over the real objective; artificial columns are banned.
        std::vector<double> cost(n_total, 0.0);
        for (std::size_t j = 0; j < lp.n_vars; ++j)
            cost[j] = lp.maximize ? -lp.objective[j] : lp.objective[j];
        if (!iterate(t, basis, cost, n_struct, rhs, n_total))
            return {LpStatus::Unbounded, 0.0, {}};

        LpResult res;
        res.status = LpStatus::Optimal;
        res.x.assign(lp.n_vars, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] < lp.n_vars) res.x[basis[i]] = t[i][rhs];
        res.objective = 0.0;
        for (std::size_t j = 0; j < lp.n_vars; ++j) res.objective += lp.objective[j] * res.x[j];
        return res;
    }

private:
    double tol_;

    void pivot(std::vector<std::vector<double>>& t, std::vector<std::size_t>& basis,
               std::size_t row, std::size_t col, std::size_t rhs) const {
        const std::size_t m = t.size();
        const double piv = t[row][col];
        for (std::size_t j = 0; j <= rhs; ++j) t[row][j] /= piv;
        t[row][col] = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == row) continue;
            const double f = t[i][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= rhs; ++j) t[i][j] -= f * t[row][j];
            t[i][col] = 0.0;
        }
        basis[row] = col;
    }

    /// Runs simplex iterations for the given cost vector over columns
    /// [0, n_enterable). Returns false when unbounded.
    bool iterate(std::vector<std::vector<double>>& t, std::vector<std::size_t>& basis,
                 const std::vector<double>& cost, std::size_t n_enterable, std::size_t rhs,
                 std::size_t n_total) const {
        const std::size_t m = t.size();
        std::vector<double> reduced(n_total, 0.0);
        const std::size_t max_iters = 10000 + 200 * (m + n_total);
        for (std::size_t iter = 0;; ++iter) {
            if (iter > max_iters) throw std::runtime_error("SimplexSolver: iteration cap exceeded");
            // Price: reduced_j = c_j - c_B^T B^{-1} A_j (tableau is canonical).
            for (std::size_t j = 0; j < n_total; ++j) reduced[j] = cost[j];
            for (std::size_t i = 0; i < m; ++i) {
                const double cb = cost[basis[i]];
                if (cb == 0.0) continue;
                for (std::size_t j = 0; j < n_total; ++j) reduced[j] -= cb * t[i][j];
            }
            // Bland: smallest improving index enters.
            std::size_t enter = n_total;
            for (std::size_t j = 0; j < n_enterable; ++j) {
                if (reduced[j] < -tol_) {
                    enter = j;
                    break;
                }
            }
            if (enter == n_total) return true;  // optimal

            // Ratio test; ties resolve to the smallest basic index.
            std::size_t leave = m;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (t[i][enter] > tol_) {
                    const double ratio = t[i][rhs] / t[i][enter];
                    if (ratio < best - tol_ ||
                        (ratio < best + tol_ && (leave == m || basis[i] < basis[leave]))) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m) return false;  // unbounded
            pivot(t, basis, leave, enter, rhs);
        }
    }
};

}  // namespace ottrpo
