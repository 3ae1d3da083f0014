#pragma once

// Shared helpers for the unit and acceptance suites: random distributions and
// an exhaustive vertex search over the transportation polytope, used as an
// independent check that no coupling beats the maximal one.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mixlab/rng.hpp"

namespace testsupport {

inline std::vector<double> random_distribution(std::size_t n, mixlab::SplitMix64& rng) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) {
        x = -std::log(1.0 - rng.next_double() + 1e-300);
        total += x;
    }
    for (auto& x : p) x /= total;
    return p;
}

/// Solves for the unique coupling supported on `support` (row-major cells) by
/// leaf stripping; returns false when the support is not a forest matching
/// the marginals. On success `out` holds the coupling.
inline bool solve_on_support(const std::vector<double>& mu, const std::vector<double>& nu,
                             const std::vector<std::size_t>& support, std::vector<double>& out) {
    const std::size_t n = mu.size();
    out.assign(n * n, 0.0);
    std::vector<double> row_rem = mu, col_rem = nu;
    std::vector<char> active(support.size(), 1);
    std::vector<int> row_deg(n, 0), col_deg(n, 0);
    for (std::size_t cell : support) {
        ++row_deg[cell / n];
        ++col_deg[cell % n];
    }
    std::size_t remaining = support.size();
    while (remaining > 0) {
        bool stripped = false;
        for (std::size_t i = 0; i < support.size(); ++i) {
            if (!active[i]) continue;
            const std::size_t r = support[i] / n, c = support[i] % n;
            double value;
            if (row_deg[r] == 1)
                value = row_rem[r];
            else if (col_deg[c] == 1)
                value = col_rem[c];
            else
                continue;
            if (value < -1e-12) return false;
            out[support[i]] = value;
            row_rem[r] -= value;
            col_rem[c] -= value;
            --row_deg[r];
            --col_deg[c];
            active[i] = 0;
            --remaining;
            stripped = true;
        }
        if (!stripped) return false; // cycle: not a vertex support
    }
    for (std::size_t r = 0; r < n; ++r)
        if (std::abs(row_rem[r]) > 1e-9) return false;
    for (std::size_t c = 0; c < n; ++c)
        if (std::abs(col_rem[c]) > 1e-9) return false;
    for (double v : out)
        if (v < -1e-12) return false;
    return true;
}

/// Largest diagonal mass over all vertices of the transportation polytope,
/// found by enumerating every support of size <= 2n-1 (vertex supports are
/// forests). Exponential in n^2; intended for n <= 3.
inline double best_diagonal_by_vertex_search(const std::vector<double>& mu,
                                             const std::vector<double>& nu) {
    const std::size_t n = mu.size();
    const std::size_t cells = n * n;
    const std::size_t max_support = 2 * n - 1;
    double best = 0.0;
    std::vector<double> candidate;
    std::vector<std::size_t> support;
    for (std::size_t mask = 1; mask < (std::size_t{1} << cells); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountll(mask)) > max_support) continue;
        support.clear();
        for (std::size_t c = 0; c < cells; ++c)
            if (mask & (std::size_t{1} << c)) support.push_back(c);
        if (!solve_on_support(mu, nu, support, candidate)) continue;
        double diag = 0.0;
        for (std::size_t a = 0; a < n; ++a) diag = diag + candidate[a * n + a];
        if (diag > best) best = diag;
    }
    return best;
}

} // namespace testsupport
