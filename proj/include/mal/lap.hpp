#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mal/errors.hpp"
#include "mal/matrix.hpp"

namespace mal {

/// An injective column→row assignment: map[j] is the row claimed by column j.
struct Assignment {
    int target_dim = 0;   // m rows
    std::vector<int> map; // length n ≤ m, distinct entries in [0, m)

    int source_dim() const { return static_cast<int>(map.size()); }

    void validate() const {
        std::vector<char> seen(target_dim, 0);
        for (int r : map) {
            if (r < 0 || r >= target_dim)
                throw ContractError("assignment entry " + std::to_string(r) + " outside [0, " +
                                    std::to_string(target_dim) + ")");
            if (seen[r]++) throw ContractError("assignment maps two columns to row " + std::to_string(r));
        }
    }

    bool operator==(const Assignment&) const = default;
};

namespace detail {

/// Shortest-augmenting-path assignment with dual potentials, O(n·m²).
/// Minimizes over injective row→column maps of an n × m matrix, n ≤ m.
/// Scan order is fixed, so the result is deterministic for a fixed input.
inline std::vector<int> min_assign_rows(int n, int m,
                                        const std::vector<std::vector<double>>& a) {
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0); // 1-based; p[j] = row matched to column j
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

} // namespace detail

/// Exact maximization LAP: picks an injective column→row assignment of the
/// m × n cost matrix (m ≥ n) maximizing Σ_j cost[map(j), j]. Rectangular
/// inputs reduce to the square zero-padded problem; padded columns stand for
/// dead units that absorb leftover rows. Deterministic for fixed input.
inline std::pair<Assignment, double> solve_lap_max(const MatD& cost) {
    const int m = cost.rows, n = cost.cols;
    if (m < n)
        throw ShapeError("solve_lap_max: cost is " + std::to_string(m) + "x" + std::to_string(n) +
                         "; columns must not outnumber rows");
    if (!cost.all_finite()) throw NumericError("solve_lap_max: cost has non-finite entries");
    Assignment out;
    out.target_dim = m;
    if (n == 0) return {out, 0.0};

    // Columns of `cost` become rows of the minimization problem, negated.
    std::vector<std::vector<double>> a(n, std::vector<double>(m));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) a[j][i] = -cost(i, j);
    out.map = detail::min_assign_rows(n, m, a);
    double objective = 0.0;
    for (int j = 0; j < n; ++j) objective += cost(out.map[j], j);
    return {out, objective};
}

/// Exhaustive maximum over all injective column→row maps; the test oracle for
/// solve_lap_max. Enumerates maps in lexicographic order and keeps the first
/// optimum, so ties break deterministically.
inline std::pair<Assignment, double> brute_force_lap(const MatD& cost) {
    const int m = cost.rows, n = cost.cols;
    if (m < n)
        throw ShapeError("brute_force_lap: cost is " + std::to_string(m) + "x" +
                         std::to_string(n) + "; columns must not outnumber rows");
    if (n > 8)
        throw ConfigError("brute_force_lap: " + std::to_string(n) +
                          " columns exceeds the enumeration bound of 8");
    if (!cost.all_finite()) throw NumericError("brute_force_lap: cost has non-finite entries");
    Assignment best;
    best.target_dim = m;
    if (n == 0) return {best, 0.0};

    std::vector<int> current(n, -1);
    std::vector<char> used(m, 0);
    double best_obj = -std::numeric_limits<double>::infinity();
    std::vector<int> best_map;
    auto recurse = [&](auto&& self, int j, double acc) -> void {
        if (j == n) {
            if (acc > best_obj) {
                best_obj = acc;
                best_map = current;
            }
            return;
        }
        for (int i = 0; i < m; ++i) {
            if (used[i]) continue;
            used[i] = 1;
            current[j] = i;
            self(self, j + 1, acc + cost(i, j));
            used[i] = 0;
        }
    };
    recurse(recurse, 0, 0.0);
    best.map = std::move(best_map);
    return {best, best_obj};
}

} // namespace mal
