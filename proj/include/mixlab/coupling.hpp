#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <type_traits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mixlab/chain.hpp"
#include "mixlab/context.hpp"
#include "mixlab/gamma.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/schedule.hpp"

namespace mixlab {

/// Joint law on A x A with prescribed marginals. matrix[a*|A|+b] = P(U=a, V=b);
/// row sums are the first marginal, column sums the second.
struct JointDistribution {
    std::size_t size = 0;
    std::vector<double> matrix;

    double at(std::size_t a, std::size_t b) const { return matrix[a * size + b]; }
};

/// Total mass the joint puts on the diagonal.
inline double diagonal_weight(const JointDistribution& joint) {
    double s = 0.0;
    for (std::size_t a = 0; a < joint.size; ++a) s += joint.at(a, a);
    return s;
}

namespace detail {

inline void check_distribution(const std::vector<double>& p, const char* who) {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(who) + ": negative entry");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(who) + ": probabilities do not sum to 1");
}

} // namespace detail

/// The coupling of mu and nu with the largest possible diagonal: diagonal
/// entries min(mu, nu), off-diagonal mass (mu-nu)^+ (x) (nu-mu)^+ normalized
/// by the positive-part total. When mu = nu the coupling is purely diagonal.
/// The diagonal weight equals 1 - TV(mu, nu).
inline JointDistribution maximal_coupling(const std::vector<double>& mu,
                                          const std::vector<double>& nu) {
    if (mu.size() != nu.size())
        throw std::invalid_argument("maximal_coupling: mismatched supports");
    detail::check_distribution(mu, "maximal_coupling mu");
    detail::check_distribution(nu, "maximal_coupling nu");
    const std::size_t n = mu.size();
    JointDistribution j{n, std::vector<double>(n * n, 0.0)};
    double excess = 0.0; // sum of (mu - nu)^+
    for (std::size_t a = 0; a < n; ++a) {
        j.matrix[a * n + a] = std::min(mu[a], nu[a]);
        excess += std::max(mu[a] - nu[a], 0.0);
    }
    if (excess > 0.0) {
        for (std::size_t a = 0; a < n; ++a) {
            const double pa = std::max(mu[a] - nu[a], 0.0);
            if (pa == 0.0) continue;
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                const double qb = std::max(nu[b] - mu[b], 0.0);
                if (qb > 0.0) j.matrix[a * n + b] = pa * qb / excess;
            }
        }
    }
    return j;
}

/// Coupled pair of paths with pasts (x, y) plus the backward disagreement
/// clock: clock[t] = how many steps behind t (through the pasts) one must go
/// to find u != v; 0 exactly when u[t] != v[t].
struct CoupledPath {
    Context past_x;
    Context past_y;
    std::vector<int> u_samples;
    std::vector<int> v_samples;
    std::vector<std::int64_t> clock;
    std::uint64_t seed = 0;
};

namespace detail {

/// Samples (a, b) from the maximal coupling of two rows without materializing
/// the joint: with probability Delta draw one shared symbol from the overlap
/// min(mu,nu)/Delta, otherwise draw the two sides independently from the
/// normalized positive parts.
inline std::pair<int, int> draw_maximal_pair(const std::vector<double>& mu,
                                             const std::vector<double>& nu, SplitMix64& rng) {
    const std::size_t n = mu.size();
    double delta = 0.0;
    for (std::size_t a = 0; a < n; ++a) delta += std::min(mu[a], nu[a]);
    const double u0 = rng.next_double();
    if (u0 < delta) {
        double target = u0; // reuse the uniform: it is < delta, uniform on [0, delta)
        for (std::size_t a = 0; a + 1 < n; ++a) {
            target -= std::min(mu[a], nu[a]);
            if (target < 0.0) return {static_cast<int>(a), static_cast<int>(a)};
        }
        // walk fell through: return last index with positive overlap
        for (std::size_t a = n; a-- > 0;)
            if (std::min(mu[a], nu[a]) > 0.0) return {static_cast<int>(a), static_cast<int>(a)};
        return {static_cast<int>(n - 1), static_cast<int>(n - 1)};
    }
    const double excess = 1.0 - delta;
    auto draw_positive_part = [&](const std::vector<double>& hi, const std::vector<double>& lo,
                                  double u) {
        double acc = 0.0;
        int last = -1;
        for (std::size_t a = 0; a < n; ++a) {
            const double w = std::max(hi[a] - lo[a], 0.0) / excess;
            if (w > 0.0) last = static_cast<int>(a);
            acc += w;
            if (u < acc) return static_cast<int>(a);
        }
        return last;
    };
    const int a = draw_positive_part(mu, nu, rng.next_double());
    const int b = draw_positive_part(nu, mu, rng.next_double());
    return {a, b};
}

} // namespace detail

/// Steps the pair chain whose transitions are the maximal coupling of the two
/// conditional rows. Each marginal path has exactly the law of the single
/// chain with the corresponding past. Deterministic given the seed.
inline CoupledPath sample_coupled_chain(const TransitionKernel& kernel, const Context& x,
                                        const Context& y, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_coupled_chain: need n >= 1");
    const std::size_t depth = kernel.effective_depth();
    CoupledPath out{x, y, {}, {}, {}, seed};
    out.u_samples.reserve(n);
    out.v_samples.reserve(n);
    out.clock.reserve(n);
    detail::RollingPast wu(x, depth), wv(y, depth);
    std::int64_t clock = agreement_length(x, y);
    SplitMix64 rng(seed);
    std::vector<double> mu, nu;
    for (std::size_t t = 0; t < n; ++t) {
        kernel.probability_row([&](std::int64_t j) { return wu.at(j); }, mu);
        kernel.probability_row([&](std::int64_t j) { return wv.at(j); }, nu);
        const auto [a, b] = detail::draw_maximal_pair(mu, nu, rng);
        out.u_samples.push_back(a);
        out.v_samples.push_back(b);
        clock = (a == b) ? clock + 1 : 0;
        out.clock.push_back(clock);
        wu.push(a);
        wv.push(b);
    }
    return out;
}

/// Monte-Carlo estimate of P(u_n != v_n) for the coupled pair, with binomial
/// standard error and the dominating-chain ceiling gamma*_n alongside.
struct DisagreementEstimate {
    std::size_t n = 0;
    std::size_t runs = 0;
    double probability = 0.0;
    double standard_error = 0.0;
};

inline DisagreementEstimate disagreement_probability(const TransitionKernel& kernel,
                                                     const Context& x, const Context& y,
                                                     std::size_t n, std::size_t runs,
                                                     std::uint64_t seed, unsigned threads = 1) {
    if (runs < 1) throw std::invalid_argument("disagreement_probability: need runs >= 1");
    std::vector<unsigned char> disagree(runs, 0);
    parallel_runs(runs, threads, [&](std::size_t r) {
        const CoupledPath path =
            sample_coupled_chain(kernel, x, y, n + 1, SplitMix64::substream(seed, r));
        disagree[r] = path.u_samples[n] != path.v_samples[n] ? 1 : 0;
    });
    std::size_t count = 0;
    for (unsigned char d : disagree) count += d;
    DisagreementEstimate est;
    est.n = n;
    est.runs = runs;
    est.probability = static_cast<double>(count) / static_cast<double>(runs);
    est.standard_error =
        std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(runs));
    return est;
}

namespace detail {

template <class PastAt>
void block_row_descend(const TransitionKernel& kernel, std::size_t n, PastAt& past_at,
                       std::vector<int>& word, std::vector<std::vector<double>>& rows,
                       std::size_t level, std::size_t idx, double p, std::vector<double>& out) {
    const std::size_t asize = kernel.alphabet().size();
    kernel.probability_row(
        [&](std::int64_t j) -> int {
            const std::int64_t into = static_cast<std::int64_t>(level) + j;
            return into >= 0 ? word[static_cast<std::size_t>(into)] : past_at(into);
        },
        rows[level]);
    for (std::size_t a = 0; a < asize; ++a) {
        const double pa = p * rows[level][a];
        word[level] = static_cast<int>(a);
        if (level + 1 == n)
            out[idx * asize + a] = pa;
        else
            block_row_descend(kernel, n, past_at, word, rows, level + 1, idx * asize + a, pa, out);
    }
}

} // namespace detail

/// Block transition row: P(a_1..a_n | past) as the product of one-step rows,
/// materialized over A^n in block-word order (a_1 most significant).
/// past_at(j) supplies the past, j <= -1.
template <class PastAt>
    requires std::is_invocable_r_v<int, PastAt, std::int64_t>
std::vector<double> block_row(const TransitionKernel& kernel, std::size_t n, PastAt&& past_at,
                              std::size_t budget = kEnumerationBudget) {
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t cells = checked_power(asize, n, budget);
    std::vector<double> out(cells, 0.0);
    std::vector<int> word(n, 0);
    std::vector<std::vector<double>> rows(n);
    detail::block_row_descend(kernel, n, past_at, word, rows, 0, 0, 1.0, out);
    return out;
}

inline std::vector<double> block_row(const TransitionKernel& kernel, std::size_t n,
                                     const Context& past, std::size_t budget = kEnumerationBudget) {
    return block_row(kernel, n, [&](std::int64_t j) { return past.at(j); }, budget);
}

/// Modulus for block couplings on a schedule:
/// block_gamma_k = 1 - exp(-3 sum_{j >= n_k} var_j(phi)), nonincreasing.
/// Throws when the rests are not summable under the schedule.
inline GammaSequence block_gamma(const Potential& phi, const BlockSchedule& schedule) {
    return GammaSequence::block(phi.variations(), schedule, 3.0);
}

/// Block-coupled pair: per block, the pair of blocks is drawn from the maximal
/// coupling of the two block rows conditioned on everything drawn so far.
/// clock[] holds the block-level disagreement clock.
inline CoupledPath sample_block_coupled_chain(const TransitionKernel& kernel, const Context& x,
                                              const Context& y, const BlockSchedule& schedule,
                                              std::size_t blocks, std::uint64_t seed,
                                              std::size_t budget = kEnumerationBudget) {
    if (blocks < 1) throw std::invalid_argument("sample_block_coupled_chain: need blocks >= 1");
    CoupledPath out{x, y, {}, {}, {}, seed};
    SplitMix64 rng(seed);
    const std::size_t asize = kernel.alphabet().size();

    // Initial block-level agreement: number of whole past blocks inside the
    // symbol-level agreement of the pasts.
    const std::int64_t m0 = agreement_length(x, y);
    std::int64_t clock = 0;
    while (static_cast<std::size_t>(clock + 1) < schedule.defined_blocks() &&
           schedule.time(static_cast<std::size_t>(clock + 1)) <= static_cast<std::size_t>(m0) &&
           clock < static_cast<std::int64_t>(1) << 20)
        ++clock;

    for (std::size_t m = 0; m < blocks; ++m) {
        const std::size_t len = schedule.time(m + 1) - schedule.time(m);
        auto past_u = [&](std::int64_t j) -> int {
            const std::int64_t into = static_cast<std::int64_t>(out.u_samples.size()) + j;
            return into >= 0 ? out.u_samples[static_cast<std::size_t>(into)] : x.at(into);
        };
        auto past_v = [&](std::int64_t j) -> int {
            const std::int64_t into = static_cast<std::int64_t>(out.v_samples.size()) + j;
            return into >= 0 ? out.v_samples[static_cast<std::size_t>(into)] : y.at(into);
        };
        const std::vector<double> mu = block_row(kernel, len, past_u, budget);
        const std::vector<double> nu = block_row(kernel, len, past_v, budget);
        const auto [ua, vb] = detail::draw_maximal_pair(mu, nu, rng);
        // unpack block words (a_1 most significant)
        std::vector<int> ub(len), vb2(len);
        std::size_t ru = static_cast<std::size_t>(ua), rv = static_cast<std::size_t>(vb);
        for (std::size_t i = len; i-- > 0;) {
            ub[i] = static_cast<int>(ru % asize);
            ru /= asize;
            vb2[i] = static_cast<int>(rv % asize);
            rv /= asize;
        }
        for (std::size_t i = 0; i < len; ++i) {
            out.u_samples.push_back(ub[i]);
            out.v_samples.push_back(vb2[i]);
        }
        clock = (ua == vb) ? clock + 1 : 0;
        out.clock.push_back(clock);
    }
    return out;
}

} // namespace mixlab
