#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mixlab/coupling.hpp"
#include "mixlab/gamma.hpp"
#include "mixlab/numeric.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

/// The dominating reset chain S starts at 0 and, from state i, climbs to i+1
/// with probability 1-gamma_i or falls back to 0 with probability gamma_i.
/// gamma_star_n = P(S_n = 0) and tau is the first return time to 0:
///   P(tau = 1) = gamma_0
///   P(tau = n) = gamma_{n-1} prod_{m=0}^{n-2} (1 - gamma_m),  n >= 2
///   P(tau = infinity) = prod_{m>=0} (1 - gamma_m).
struct RenewalProfile {
    std::vector<double> gamma;       // gamma_0..gamma_N
    std::vector<double> gamma_star;  // P(S_n = 0), n = 0..N; gamma_star[0] = 1
    std::vector<double> tau_pmf;     // P(tau = n), n = 0..N; entry 0 is 0
    double tau_infinity = 0.0;
    double renewal_residual = 0.0;   // max_n |gamma*_n - sum_k P(tau=k) gamma*_{n-k}|

    std::size_t horizon() const { return gamma_star.size() - 1; }
};

namespace detail {

inline void require_valid_gamma0(const GammaSequence& gamma) {
    if (!(gamma.value(0) < 1.0))
        throw std::domain_error("renewal: gamma_0 must be < 1");
}

/// Distribution of S_n for n = 0..n_max; row n has support {0..n}.
/// Exact: the chain cannot exceed its age, so no truncation is involved.
inline std::vector<std::vector<double>> s_distributions(const std::vector<double>& gamma,
                                                        std::size_t n_max) {
    std::vector<std::vector<double>> dist(n_max + 1);
    dist[0] = {1.0};
    std::vector<double> cur = {1.0};
    for (std::size_t t = 0; t < n_max; ++t) {
        std::vector<double> nxt(t + 2, 0.0);
        KahanSum reset;
        for (std::size_t j = 0; j <= t; ++j) {
            reset.add(cur[j] * gamma[j]);
            nxt[j + 1] = cur[j] * (1.0 - gamma[j]);
        }
        nxt[0] = reset.value();
        dist[t + 1] = nxt;
        cur.swap(nxt);
    }
    return dist;
}

} // namespace detail

/// First-return law of the dominating chain, evaluated in log space; the
/// infinite product P(tau = infinity) comes from the gamma sequence's
/// closed-form survival tail.
inline RenewalProfile tau_distribution(const GammaSequence& gamma, std::size_t n_max) {
    detail::require_valid_gamma0(gamma);
    RenewalProfile out;
    out.gamma = gamma.values_up_to(n_max);
    out.tau_pmf.assign(n_max + 1, 0.0);
    double log_prod = 0.0; // log prod_{m=0}^{n-2}(1-gamma_m)
    for (std::size_t n = 1; n <= n_max; ++n) {
        out.tau_pmf[n] = out.gamma[n - 1] * std::exp(log_prod);
        log_prod += std::log1p(-out.gamma[n - 1]);
    }
    const double log_survival = gamma.log_survival_tail(0);
    out.tau_infinity = log_survival == -kInf ? 0.0 : std::exp(log_survival);
    return out;
}

/// Exact gamma*_n by forward propagation of the state distribution, cross-
/// validated at every n against the renewal convolution
/// gamma*_n = sum_{k=1}^n P(tau = k) gamma*_{n-k}.
inline RenewalProfile renewal_profile(const GammaSequence& gamma, std::size_t n_max) {
    RenewalProfile out = tau_distribution(gamma, n_max);
    out.gamma_star.assign(n_max + 1, 0.0);
    out.gamma_star[0] = 1.0;
    std::vector<double> cur = {1.0};
    for (std::size_t t = 0; t < n_max; ++t) {
        std::vector<double> nxt(t + 2, 0.0);
        KahanSum reset;
        for (std::size_t j = 0; j <= t; ++j) {
            reset.add(cur[j] * out.gamma[j]);
            nxt[j + 1] = cur[j] * (1.0 - out.gamma[j]);
        }
        nxt[0] = reset.value();
        out.gamma_star[t + 1] = nxt[0];
        cur.swap(nxt);
    }
    double resid = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        KahanSum conv;
        for (std::size_t k = 1; k <= n; ++k) conv.add(out.tau_pmf[k] * out.gamma_star[n - k]);
        resid = std::max(resid, std::abs(conv.value() - out.gamma_star[n]));
    }
    out.renewal_residual = resid;
    return out;
}

/// Alias emphasizing the gamma* part of the profile.
inline RenewalProfile return_probabilities(const GammaSequence& gamma, std::size_t n_max) {
    return renewal_profile(gamma, n_max);
}

/// P(S_n <= k), exact from the forward state distribution.
inline double s_below(const GammaSequence& gamma, std::size_t n, std::size_t k) {
    detail::require_valid_gamma0(gamma);
    const auto dist = detail::s_distributions(gamma.values_up_to(n), n);
    KahanSum s;
    for (std::size_t j = 0; j <= std::min(k, n); ++j) s.add(dist[n][j]);
    return s.value();
}

/// Which climb product enters the small-state expansion
/// P(S_n <= k) = sum_{j<=k} (climb product of length j) * gamma*_{n-j}.
///   ChainExact:       prod_{m=0}^{j-1} (1 - gamma_m)  (true chain probabilities)
///   DisplayedProduct: prod_{m=1}^{j-1} (1 - gamma_m)  (drops the first climb
///                     factor; an upper bound, kept for comparison)
enum class ClimbConvention { ChainExact, DisplayedProduct };

inline double small_state_expansion(const RenewalProfile& profile, std::size_t n, std::size_t k,
                                    ClimbConvention convention) {
    KahanSum s;
    for (std::size_t j = 0; j <= std::min({k, n}); ++j) {
        double prod = 1.0;
        const std::size_t m0 = convention == ClimbConvention::ChainExact ? 0 : 1;
        for (std::size_t m = m0; m + 1 <= j; ++m) prod *= 1.0 - profile.gamma[m];
        s.add(prod * profile.gamma_star[n - j]);
    }
    return s.value();
}

/// Exact P(S_n >= k) tables against Monte-Carlo clock tails P(T_n >= k) of a
/// coupled pair; any cell with exact > estimate + 3 sigma is a violation.
struct DominationReport {
    std::size_t n_max = 0;
    std::size_t k_max = 0;
    std::size_t runs = 0;
    std::vector<std::vector<double>> s_tail;     // [n][k] = P(S_n >= k)
    std::vector<std::vector<double>> clock_tail; // [n][k] = MC P(T_n >= k)
    std::vector<std::vector<double>> std_error;  // [n][k]
    std::vector<std::pair<std::size_t, std::size_t>> violations;
    bool ok = true;
};

inline DominationReport domination_test(const TransitionKernel& kernel, const Context& x,
                                        const Context& y, std::size_t n_max, std::size_t k_max,
                                        std::size_t runs, std::uint64_t seed,
                                        GammaIndexing indexing = GammaIndexing::Conservative,
                                        unsigned threads = 1) {
    const GammaSequence gamma = kernel.gamma(indexing);
    detail::require_valid_gamma0(gamma);
    DominationReport rep;
    rep.n_max = n_max;
    rep.k_max = k_max;
    rep.runs = runs;

    const auto dist = detail::s_distributions(gamma.values_up_to(n_max), n_max);
    rep.s_tail.assign(n_max + 1, std::vector<double>(k_max + 1, 0.0));
    for (std::size_t n = 0; n <= n_max; ++n) {
        double tail = 0.0;
        std::vector<double> tails(n + 2, 0.0);
        for (std::size_t j = n + 1; j-- > 0;) {
            tail += dist[n][j];
            tails[j] = tail;
        }
        for (std::size_t k = 0; k <= k_max; ++k) rep.s_tail[n][k] = k <= n ? tails[k] : 0.0;
    }

    // Clock histogram: counts[w][n][c] = #runs on worker w with min(T_n, k_max+1) = c.
    // Integer counts merge order-independently, so the result is deterministic.
    const unsigned nthreads = std::max(1u, threads);
    std::vector<std::vector<std::vector<std::int64_t>>> counts(
        nthreads, std::vector<std::vector<std::int64_t>>(
                      n_max + 1, std::vector<std::int64_t>(k_max + 2, 0)));
    parallel_runs_indexed(runs, nthreads, [&](std::size_t r, unsigned wid) {
        const CoupledPath path =
            sample_coupled_chain(kernel, x, y, n_max + 1, SplitMix64::substream(seed, r));
        auto& local = counts[wid];
        for (std::size_t n = 0; n <= n_max; ++n) {
            const std::int64_t c = std::min<std::int64_t>(path.clock[n],
                                                          static_cast<std::int64_t>(k_max) + 1);
            ++local[n][static_cast<std::size_t>(c)];
        }
    });

    rep.clock_tail.assign(n_max + 1, std::vector<double>(k_max + 1, 0.0));
    rep.std_error.assign(n_max + 1, std::vector<double>(k_max + 1, 0.0));
    for (std::size_t n = 0; n <= n_max; ++n) {
        std::vector<std::int64_t> hist(k_max + 2, 0);
        for (unsigned t = 0; t < nthreads; ++t)
            for (std::size_t c = 0; c <= k_max + 1; ++c) hist[c] += counts[t][n][c];
        std::int64_t tail = 0;
        for (std::size_t k = k_max + 2; k-- > 1;) {
            tail += hist[k];
            if (k <= k_max) {
                const double p = static_cast<double>(tail) / static_cast<double>(runs);
                rep.clock_tail[n][k] = p;
                rep.std_error[n][k] = std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
            }
        }
        rep.clock_tail[n][0] = 1.0;
        rep.std_error[n][0] = 0.0;
        for (std::size_t k = 0; k <= k_max; ++k) {
            if (rep.s_tail[n][k] > rep.clock_tail[n][k] + 3.0 * rep.std_error[n][k] + 1e-12) {
                rep.violations.emplace_back(n, k);
                rep.ok = false;
            }
        }
    }
    return rep;
}

/// Truncated generating functions F(s) = sum P(tau=n) s^n and
/// G(s) = sum gamma*_n s^n, with remainder bounds where certifiable and the
/// gap of the identity G = 1/(1-F).
struct GeneratingFunctions {
    double s = 0.0;
    double f_trunc = 0.0;
    double g_trunc = 0.0;
    double f_remainder = 0.0; // certified upper bound
    double g_remainder = 0.0; // certified for s < 1; estimate otherwise
    bool g_remainder_certified = true;
    double identity_gap = 0.0;     // |G_trunc - 1/(1-F_trunc)|
    double combined_bound = 0.0;   // gap implied by the truncation remainders
    bool identity_ok = false;
};

inline GeneratingFunctions generating_functions(const GammaSequence& gamma, double s,
                                                std::size_t n_max) {
    if (!(s >= 0.0)) throw std::invalid_argument("generating_functions: s must be >= 0");
    const RenewalProfile prof = renewal_profile(gamma, n_max);
    GeneratingFunctions out;
    out.s = s;
    KahanSum f, g;
    g.add(1.0); // gamma*_0
    double spow = 1.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        spow *= s;
        f.add(prof.tau_pmf[n] * spow);
        g.add(prof.gamma_star[n] * spow);
    }
    out.f_trunc = f.value();
    out.g_trunc = g.value();

    // Remainders.
    double tau_tail_mass = 1.0 - prof.tau_infinity;
    for (std::size_t n = 1; n <= n_max; ++n) tau_tail_mass -= prof.tau_pmf[n];
    tau_tail_mass = std::max(tau_tail_mass, 0.0);
    if (s > 1.0 && tau_tail_mass > 0.0)
        throw std::domain_error("generating_functions: s above the certified radius");
    out.f_remainder =
        s <= 1.0 ? tau_tail_mass * std::pow(s, static_cast<double>(n_max) + 1.0) : 0.0;
    if (s < 1.0) {
        out.g_remainder = std::pow(s, static_cast<double>(n_max) + 1.0) / (1.0 - s);
        out.g_remainder_certified = true;
    } else {
        // Geometric extrapolation of the observed terms; diagnostic only.
        out.g_remainder_certified = false;
        out.g_remainder = kInf;
        const double last = prof.gamma_star[n_max] * std::pow(s, static_cast<double>(n_max));
        const double prev =
            prof.gamma_star[n_max - 1] * std::pow(s, static_cast<double>(n_max) - 1.0);
        if (prev > 0.0 && last < prev) out.g_remainder = last * (last / prev) / (1.0 - last / prev);
    }
    if (out.f_trunc + out.f_remainder >= 1.0)
        throw std::domain_error("generating_functions: F(s) >= 1 at this s");
    out.identity_gap = std::abs(out.g_trunc - 1.0 / (1.0 - out.f_trunc));
    // |G - 1/(1-F)| <= G_tail + F_tail / ((1-F)(1-F-F_tail)) with F >= F_trunc,
    // plus rounding slack for the evaluated sums themselves (the analytic
    // remainders routinely sit far below double precision).
    const double denom = (1.0 - out.f_trunc) *
                         std::max(1.0 - out.f_trunc - out.f_remainder, 1e-300);
    const double rounding = 1e-13 * (1.0 + std::abs(out.g_trunc));
    out.combined_bound = out.g_remainder + out.f_remainder / denom + rounding;
    out.identity_ok = out.identity_gap <= out.combined_bound;
    return out;
}

/// Numerical radius lim gamma_n^{-1/n} over a trailing window. Defined for
/// summable gamma; reports +infinity when the window diverges upward
/// (super-exponential decay, or gamma with finite support).
struct RadiusEstimate {
    double radius = 0.0;
    bool is_infinite = false;
    bool converged = false;
    double window_drift = 0.0; // |r(end)/r(mid) - 1|
};

inline RadiusEstimate radius_estimate(const GammaSequence& gamma, std::size_t horizon = 4096) {
    if (!gamma.summable())
        throw std::domain_error("radius_estimate: gamma not summable");
    RadiusEstimate out;
    // Pull the horizon in while gamma underflows double precision there; a
    // sequence that is zero already at depth 8 is treated as finite support.
    while (horizon >= 16 && gamma.value(horizon) == 0.0) horizon /= 2;
    const std::size_t mid = horizon / 2;
    const double g_end = gamma.value(horizon);
    const double g_mid = gamma.value(mid);
    if (g_end == 0.0) { // finite support: F is a polynomial
        out.is_infinite = true;
        out.converged = true;
        out.radius = kInf;
        return out;
    }
    const double r_end = std::pow(g_end, -1.0 / static_cast<double>(horizon));
    const double r_mid = std::pow(g_mid, -1.0 / static_cast<double>(mid));
    out.radius = r_end;
    out.window_drift = std::abs(r_end / r_mid - 1.0);
    if (r_end > 1e6 || r_end > 10.0 * r_mid) {
        out.is_infinite = true;
        out.radius = kInf;
        out.converged = true;
        return out;
    }
    out.converged = out.window_drift < 0.05;
    return out;
}

/// Heuristic decay-regime report for gamma*_n, with the windows and fit
/// quality always attached so callers can treat it as a diagnostic.
struct DecayClassification {
    std::string regime; // "zero", "non-relaxing", "exponential", "polynomial", "undetermined"
    bool weak_relaxation = false;   // partial sums of climb products diverge
    bool gamma_summable = false;
    bool gamma_star_summable = false; // partial-sum trend
    double exp_rate = 0.0;            // -slope of log gamma*_n vs n
    double exp_r2 = 0.0;
    double loglog_r2 = 0.0;           // fit of log gamma*_n vs log n (power law)
    double poly_ratio_first = 0.0;    // max gamma*_n/gamma_n over first half window
    double poly_ratio_second = 0.0;   // ... second half
    std::size_t window_lo = 0;
    std::size_t window_hi = 0;
    double gamma_star_tail = 0.0;     // gamma*_horizon
};

inline DecayClassification classify_decay(const GammaSequence& gamma, std::size_t horizon) {
    if (horizon < 100) throw std::invalid_argument("classify_decay: horizon must be >= 100");
    detail::require_valid_gamma0(gamma);
    const RenewalProfile prof = renewal_profile(gamma, horizon);
    DecayClassification out;
    out.gamma_summable = gamma.summable();
    out.window_lo = horizon / 2;
    out.window_hi = horizon;
    out.gamma_star_tail = prof.gamma_star[horizon];

    // Divergence of sum_m prod_{k<=m}(1-gamma_k): compare half-sums.
    {
        double log_prod = 0.0;
        KahanSum first, second;
        for (std::size_t m = 0; m <= horizon; ++m) {
            log_prod += std::log1p(-prof.gamma[m]);
            (m < horizon / 2 ? first : second).add(std::exp(log_prod));
        }
        out.weak_relaxation = second.value() > 0.05 * first.value();
    }
    // Summability trend of gamma*: the trailing half adds little mass.
    {
        KahanSum first, second;
        for (std::size_t n = 0; n <= horizon; ++n)
            (n < horizon / 2 ? first : second).add(prof.gamma_star[n]);
        out.gamma_star_summable = second.value() < 0.2 * first.value();
    }

    bool all_zero = true;
    for (std::size_t n = 1; n <= horizon; ++n)
        if (prof.gamma_star[n] != 0.0) all_zero = false;
    if (all_zero) {
        out.regime = "zero";
        return out;
    }

    // Two regressions over the trailing window (where gamma* > 0):
    // log gamma* vs n (exponential decay) and vs log n (power-law decay).
    std::vector<double> xs_n, xs_logn, ys;
    for (std::size_t n = out.window_lo; n <= out.window_hi; ++n) {
        if (prof.gamma_star[n] > 0.0) {
            xs_n.push_back(static_cast<double>(n));
            xs_logn.push_back(std::log(static_cast<double>(n)));
            ys.push_back(std::log(prof.gamma_star[n]));
        }
    }
    if (xs_n.size() >= 10) {
        const LinearFit fit_exp = linear_fit(xs_n, ys);
        out.exp_rate = -fit_exp.slope;
        out.exp_r2 = fit_exp.r2;
        out.loglog_r2 = linear_fit(xs_logn, ys).r2;
    }
    // Ratio boundedness gamma*_n / gamma_n over window halves.
    const std::size_t quarter = out.window_lo + (out.window_hi - out.window_lo) / 2;
    for (std::size_t n = out.window_lo; n <= out.window_hi; ++n) {
        if (prof.gamma[n] <= 0.0) continue;
        const double r = prof.gamma_star[n] / prof.gamma[n];
        (n <= quarter ? out.poly_ratio_first : out.poly_ratio_second) =
            std::max(n <= quarter ? out.poly_ratio_first : out.poly_ratio_second, r);
    }
    const bool ratio_bounded =
        out.poly_ratio_first > 0.0 && out.poly_ratio_second <= 1.1 * out.poly_ratio_first;

    const double total_drop = out.exp_rate * static_cast<double>(out.window_hi - out.window_lo);
    if (out.gamma_star_tail > 1e-8 && std::abs(total_drop) < 0.1) {
        out.regime = "non-relaxing";
    } else if (out.exp_r2 > 0.99 && out.exp_rate > 1e-6 && out.exp_r2 >= out.loglog_r2) {
        out.regime = "exponential";
    } else if (ratio_bounded && out.loglog_r2 > 0.9) {
        out.regime = "polynomial";
    } else {
        out.regime = "undetermined";
    }
    return out;
}

/// Finite-window estimate of alpha = sup_i limsup_k [P(tau=i)/P(tau=ki)]^{1/k}
/// and the threshold 1/P(tau < infinity) it must stay below for the
/// polynomial-regime criterion. Heuristic: the limsup is read off the trailing
/// k-window.
struct PolynomialCriterion {
    double alpha = 0.0;
    double threshold = 0.0;
    bool holds = false;
};

inline PolynomialCriterion condpoly_alpha(const GammaSequence& gamma, std::size_t i_max,
                                          std::size_t k_max) {
    detail::require_valid_gamma0(gamma);
    const std::size_t need = i_max * k_max;
    const RenewalProfile prof = tau_distribution(gamma, need);
    // log pmf to dodge underflow
    std::vector<double> log_tau(need + 1, -kInf);
    {
        double log_prod = 0.0;
        for (std::size_t n = 1; n <= need; ++n) {
            log_tau[n] = prof.gamma[n - 1] > 0.0 ? std::log(prof.gamma[n - 1]) + log_prod : -kInf;
            log_prod += std::log1p(-prof.gamma[n - 1]);
        }
    }
    PolynomialCriterion out;
    if (prof.tau_infinity >= 1.0)
        throw std::domain_error("condpoly_alpha: tau is almost surely infinite");
    out.threshold = 1.0 / (1.0 - prof.tau_infinity);
    for (std::size_t i = 1; i <= i_max; ++i) {
        if (log_tau[i] == -kInf)
            throw std::domain_error("condpoly_alpha: P(tau = i) vanishes in the window");
        double limsup = 0.0;
        for (std::size_t k = std::max<std::size_t>(2, k_max / 2); k <= k_max; ++k) {
            if (log_tau[k * i] == -kInf)
                throw std::domain_error("condpoly_alpha: P(tau = k i) vanishes in the window");
            limsup = std::max(limsup,
                              std::exp((log_tau[i] - log_tau[k * i]) / static_cast<double>(k)));
        }
        out.alpha = std::max(out.alpha, limsup);
    }
    out.holds = out.alpha < out.threshold;
    return out;
}

/// Recomputes gamma*_n = sum_k (tau pmf)^{*k}[n] by iterated self-convolution
/// and returns the largest deviation from the forward-propagation values.
inline double convolution_check(const GammaSequence& gamma, std::size_t n_max) {
    const RenewalProfile prof = renewal_profile(gamma, n_max);
    std::vector<double> acc(n_max + 1, 0.0);
    std::vector<double> conv(prof.tau_pmf); // k = 1
    for (std::size_t k = 1; k <= n_max; ++k) {
        bool any = false;
        for (std::size_t n = k; n <= n_max; ++n) {
            acc[n] += conv[n];
            if (conv[n] != 0.0) any = true;
        }
        if (!any) break;
        // conv <- conv * tau, truncated to n_max
        std::vector<double> nxt(n_max + 1, 0.0);
        for (std::size_t a = k; a <= n_max; ++a) {
            if (conv[a] == 0.0) continue;
            for (std::size_t b = 1; a + b <= n_max; ++b)
                nxt[a + b] += conv[a] * prof.tau_pmf[b];
        }
        conv.swap(nxt);
    }
    double resid = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n)
        resid = std::max(resid, std::abs(acc[n] - prof.gamma_star[n]));
    return resid;
}

} // namespace mixlab
