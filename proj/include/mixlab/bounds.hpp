#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mixlab/chain.hpp"
#include "mixlab/coupling.hpp"
#include "mixlab/potential.hpp"
#include "mixlab/renewal.hpp"
#include "mixlab/schedule.hpp"

namespace mixlab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// ||f||_1 of a cylinder function under the stationary law of the kernel.
inline double l1_norm(const TransitionKernel& kernel, const CylinderFunction& f) {
    const std::size_t width = std::max({std::max<std::size_t>(*kernel.memory_order(), 1),
                                        f.depth(), std::size_t{1}});
    const std::vector<double> mu = stationary_word_measure(kernel, width);
    double s = 0.0;
    for (std::size_t u = 0; u < mu.size(); ++u) s += mu[u] * std::abs(f.at_window(u));
    return s;
}

/// ||g||_phi = sup_k var_k(g)/var_k(phi) for a cylinder g (finite ratio range).
inline double g_seminorm(const CylinderFunction& g, const VariationSequence& phi_vars) {
    return seminorm_ratio(g.variations(), phi_vars, std::max<std::size_t>(g.depth(), 1));
}

/// Smallest constant kappa with var_k(g) <= kappa theta^k; the Hoelder norm of
/// a cylinder function at exponent theta.
inline double g_theta_norm(const CylinderFunction& g, double theta) {
    if (!(theta > 0.0) || !(theta < 1.0))
        throw std::invalid_argument("g_theta_norm: theta must lie in (0,1)");
    const VariationSequence v = g.variations();
    double best = 0.0;
    for (std::size_t k = 0; k < g.depth(); ++k)
        best = std::max(best, v.value(k) / std::pow(theta, static_cast<double>(k)));
    return best;
}

namespace detail {

struct CertifiedConstant {
    double value = kInf;       // var term + sup-ratio term
    double window_max = 0.0;   // max ratio observed up to the cutoff
    double tail_bound = 0.0;   // certified ceiling of the ratios beyond it
    std::size_t cutoff = 0;
};

/// C = var(0) + sup_k var(k)/P(tau = k) for var-derived reset moduli.
/// The sup is scanned up to a cutoff; beyond it the ratios are capped by
/// (1 + var(cutoff)) / P(tau = infinity), which is below 1.01/P(tau = infinity)
/// once var(cutoff) <= 0.01. The cutoff doubles until the trailing ratio
/// window has < 1% relative oscillation and the cap applies, then the larger
/// of window maximum and cap is certified.
inline CertifiedConstant certify_constant(
    const std::vector<double>& var_at,      // var(k), k = 0..cutoff candidates (grows on demand)
    const GammaSequence& gamma, double survival_probability) {
    if (!(survival_probability > 0.0))
        throw std::domain_error("bound constant: no-return probability vanishes (C infinite)");
    const double limit = 1.0 / survival_probability;
    for (std::size_t cutoff = 256; cutoff <= (std::size_t{1} << 15); cutoff *= 2) {
        if (cutoff + 1 > var_at.size()) break;
        const RenewalProfile tau = tau_distribution(gamma, cutoff);
        std::vector<double> ratio(cutoff + 1, 0.0);
        double window_max_all = 0.0;
        for (std::size_t k = 1; k <= cutoff; ++k) {
            if (var_at[k] == 0.0) continue;
            if (tau.tau_pmf[k] <= 0.0)
                throw std::domain_error("bound constant: var_k > 0 with P(tau=k) = 0");
            ratio[k] = var_at[k] / tau.tau_pmf[k];
            window_max_all = std::max(window_max_all, ratio[k]);
        }
        double w_lo = kInf, w_hi = 0.0;
        for (std::size_t k = cutoff / 2; k <= cutoff; ++k) {
            w_lo = std::min(w_lo, ratio[k]);
            w_hi = std::max(w_hi, ratio[k]);
        }
        const double osc = w_hi == 0.0 ? 0.0 : (w_hi - w_lo) / w_hi;
        // Settled when the window oscillates < 1%, or when the ratios are
        // visibly decaying across it (their maximum sits at the left edge);
        // either way the cap below covers everything past the cutoff.
        const bool settled = osc < 0.01 || w_hi <= ratio[cutoff / 2] * (1.0 + 1e-9);
        const double var_cut = var_at[cutoff];
        if (settled && var_cut <= 0.01) {
            CertifiedConstant out;
            out.cutoff = cutoff;
            out.window_max = window_max_all;
            out.tail_bound = var_cut == 0.0 ? 0.0 : 1.01 * limit;
            out.value = var_at[0] + std::max(out.window_max, out.tail_bound);
            return out;
        }
    }
    throw std::domain_error("bound constant: ratio window failed to settle (C not certified)");
}

} // namespace detail

/// Correlation bound machinery for a normalized potential psi with summable
/// variations: with gamma_m = 1 - exp(-var_m(psi)),
///   |corr(n)| <= ||f||_1 ||g||_psi sum_{k=0}^n var_k(psi) gamma*_{n-k}
///             <= C ||f||_1 ||g||_psi gamma*_n.
class NormalizedBound {
public:
    NormalizedBound(const Potential& psi, std::size_t n_max, double gamma_scale = 1.0)
        : NormalizedBound(check_normalized(psi).variations(), n_max, gamma_scale) {}

    NormalizedBound(const VariationSequence& vars, std::size_t n_max, double gamma_scale = 1.0)
        : vars_(vars) {
        if (!vars_.summable())
            throw std::domain_error("NormalizedBound: variations not summable");
        GammaSequence gamma = GammaSequence::from_variations(vars_, 0);
        double survival = std::exp(gamma.log_survival_tail(0));
        const std::size_t span = std::max<std::size_t>(n_max, std::size_t{1} << 15);
        if (gamma_scale != 1.0) {
            std::vector<double> scaled = gamma.values_up_to(span);
            for (double& v : scaled) v *= gamma_scale;
            gamma = GammaSequence::from_values(std::move(scaled));
            survival = std::exp(gamma.log_survival_tail(0));
        }
        profile_ = renewal_profile(gamma, n_max);
        std::vector<double> var_at(span + 1);
        for (std::size_t k = 0; k <= span; ++k) var_at[k] = vars_.value(k);
        constant_ = detail::certify_constant(var_at, gamma, survival);
    }

    double sum_bound(double f_norm1, double g_norm, std::size_t n) const {
        KahanSum s;
        for (std::size_t k = 0; k <= n; ++k) {
            const double v = vars_.value(k);
            if (v == 0.0) continue;
            s.add(v * profile_.gamma_star[n - k]);
        }
        return f_norm1 * g_norm * s.value();
    }

    double c_bound(double f_norm1, double g_norm, std::size_t n) const {
        return constant_.value * f_norm1 * g_norm * profile_.gamma_star[n];
    }

    double constant() const { return constant_.value; }
    const RenewalProfile& profile() const { return profile_; }
    const VariationSequence& variations() const { return vars_; }

private:
    static const Potential& check_normalized(const Potential& psi) {
        if (!psi.normalized())
            throw std::invalid_argument("NormalizedBound: potential not normalized");
        return psi;
    }

    VariationSequence vars_;
    RenewalProfile profile_;
    detail::CertifiedConstant constant_;
};

/// Block analogue for general (not necessarily normalized) potentials with
/// summable variations: blocks on a subadditive schedule, modulus
/// gbar_k = 1 - exp(-3 sum_{j>=n_k} var_j(phi)),
///   |corr| <= ||f||_1 ||g||_phi sum_{k=0}^m var_{n_k}(phi) gbar*_{m-k}
///          <= Cbar ||f||_1 ||g||_phi gbar*_m,
/// where m is the index on the block clock (unit time n maps to the last
/// block started by n).
class BlockBound {
public:
    BlockBound(const Potential& phi, BlockSchedule schedule, std::size_t m_max)
        : BlockBound(phi.variations(), std::move(schedule), m_max) {}

    BlockBound(const VariationSequence& vars, BlockSchedule schedule, std::size_t m_max)
        : vars_(vars), schedule_(std::move(schedule)) {
        if (!schedule_.is_linear()) {
            const std::size_t last = schedule_.defined_blocks() - 1;
            if (m_max > last)
                throw std::invalid_argument("BlockBound: explicit schedule shorter than range");
            if (vars_.tail_sum(schedule_.time(last)) != 0.0)
                throw std::domain_error(
                    "BlockBound: explicit schedule ends before the variations run out");
        }
        const GammaSequence gbar = GammaSequence::block(vars_, schedule_, 3.0);
        const double survival = std::exp(gbar.log_survival_tail(0));
        profile_ = renewal_profile(gbar, m_max);
        const std::size_t span = std::max<std::size_t>(m_max, std::size_t{1} << 15);
        std::vector<double> var_at(span + 1);
        for (std::size_t k = 0; k <= span; ++k)
            var_at[k] = k < schedule_.defined_blocks() ? vars_.value(schedule_.time(k)) : 0.0;
        constant_ = detail::certify_constant(var_at, gbar, survival);
    }

    double sum_bound(double f_norm1, double g_norm, std::size_t m_blocks) const {
        KahanSum s;
        for (std::size_t k = 0; k <= m_blocks; ++k) {
            const double v = vars_.value(schedule_.time(k));
            if (v == 0.0) continue;
            s.add(v * profile_.gamma_star[m_blocks - k]);
        }
        return f_norm1 * g_norm * s.value();
    }

    double c_bound(double f_norm1, double g_norm, std::size_t m_blocks) const {
        return constant_.value * f_norm1 * g_norm * profile_.gamma_star[m_blocks];
    }

    std::size_t block_index(std::size_t n) const { return schedule_.block_index(n); }
    double constant() const { return constant_.value; }
    const RenewalProfile& profile() const { return profile_; }
    const BlockSchedule& schedule() const { return schedule_; }

private:
    VariationSequence vars_;
    BlockSchedule schedule_;
    RenewalProfile profile_;
    detail::CertifiedConstant constant_;
};

/// ||f||_1 ||g||_theta theta^n sum_{k=0}^n theta^{-k} gamma*_k, for g with
/// geometrically decaying variations var_k(g) <= ||g||_theta theta^k.
inline double holder_bound(const RenewalProfile& profile, double f_norm1, double g_theta,
                           double theta, std::size_t n) {
    if (!(theta > 0.0) || !(theta < 1.0))
        throw std::invalid_argument("holder_bound: theta must lie in (0,1)");
    KahanSum s;
    for (std::size_t k = 0; k <= n; ++k)
        s.add(std::pow(theta, static_cast<double>(n - k)) * profile.gamma_star[k]);
    return f_norm1 * g_theta * s.value();
}

/// ||f||_1 ||g||_inf gamma*_n, for g depending on the most recent symbol only.
inline double single_coordinate_bound(const RenewalProfile& profile, double f_norm1, double g_sup,
                                      std::size_t n) {
    return f_norm1 * g_sup * profile.gamma_star[n];
}

/// Picks a block schedule whose rests sum_m tail(n_m) are summable: n_m = m
/// works for finite-support and geometric variation tails and for polynomial
/// tails with exponent > 2. Polynomial exponents <= 2 admit no subadditive
/// schedule (subadditivity pins n_m between m and m*n_1), so they are
/// rejected with a diagnostic.
inline BlockSchedule auto_schedule(const VariationSequence& vars) {
    if (!vars.summable()) throw std::domain_error("auto_schedule: variations not summable");
    const auto& t = vars.tail();
    if (t.kind == VariationSequence::TailKind::Polynomial && t.coeff > 0.0 && t.param <= 2.0)
        throw std::domain_error(
            "auto_schedule: polynomial variation tail with exponent <= 2; rests "
            "sum_m tail(n_m) diverge for every subadditive schedule");
    return BlockSchedule::linear(1);
}

inline BlockSchedule auto_schedule(const Potential& phi) { return auto_schedule(phi.variations()); }

enum class MeasureMethod { Exact, MonteCarlo };

struct BoundRow {
    std::size_t n = 0;
    double measured = kNaN;
    double ci = 0.0; // 3-sigma half width for Monte-Carlo rows
    double sum_bound = kNaN;
    double c_bound = kNaN;
    double block_sum_bound = kNaN;
    double block_c_bound = kNaN;
    double holder = kNaN;
    double single_coord = kNaN;
    bool violation = false;
};

struct BoundReport {
    std::vector<BoundRow> rows;
    double constant_c = kNaN;
    double block_constant = kNaN;
    double f_norm1 = 0.0;
    double g_norm_normalized = kNaN; // ||g|| against the normalized potential's variations
    double g_norm_block = kNaN;      // ||g|| against the input potential's variations
    double g_theta = kNaN;
    double g_sup = 0.0;
    double theta = 0.5;
    std::string schedule_desc;
    std::uint64_t seed = 0;
    std::size_t runs = 0;
    bool any_violation = false;
    // The block-route columns live on the block clock: unit time n is mapped
    // to the last block index m with n_m <= n before evaluating them.
    std::string clock_note = "direct bounds on unit time; block bounds at block_index(n)";
};

/// Measures |corr(n)| for n in [n_min, n_max] (exactly, or by seeded
/// Monte-Carlo with 3-sigma intervals) and evaluates every applicable bound
/// alongside. A measurement exceeding any applicable bound beyond tolerance
/// marks the row and the report as violated.
///
/// gamma_scale rescales the modulus fed into the dominating chain; it exists
/// so integration tests can verify that corrupted inputs are caught, and must
/// be 1 for honest reports.
inline BoundReport verify_bounds(const Potential& phi, const CylinderFunction& f,
                                 const CylinderFunction& g, std::size_t n_min, std::size_t n_max,
                                 MeasureMethod method, std::uint64_t seed,
                                 std::size_t runs = 100000, double theta = 0.5,
                                 std::optional<BlockSchedule> schedule = std::nullopt,
                                 double gamma_scale = 1.0, unsigned threads = 1) {
    if (n_min > n_max) throw std::invalid_argument("verify_bounds: empty n range");
    BoundReport rep;
    rep.seed = seed;
    rep.theta = theta;

    // Normalized version psi (the input itself when already normalized).
    const bool already_normalized = phi.normalized() || is_normalized(phi, 1e-9).normalized;
    const Potential psi =
        already_normalized ? phi.with_normalized_flag(true) : normalize(phi).psi;
    const TransitionKernel kernel = TransitionKernel::from_potential(psi);

    rep.f_norm1 = l1_norm(kernel, f);
    rep.g_sup = g.sup_norm();
    rep.g_theta = g_theta_norm(g, theta);

    std::optional<NormalizedBound> direct;
    if (psi.variations().summable()) {
        direct.emplace(psi, n_max, gamma_scale);
        rep.constant_c = direct->constant();
        rep.g_norm_normalized = g_seminorm(g, psi.variations());
    }
    std::optional<BlockBound> block;
    if (phi.variations().summable()) {
        BlockSchedule sched = schedule ? *schedule : auto_schedule(phi);
        const std::size_t m_max = sched.block_index(n_max);
        block.emplace(phi, sched, m_max);
        rep.block_constant = block->constant();
        rep.g_norm_block = g_seminorm(g, phi.variations());
        rep.schedule_desc = sched.is_linear()
                                ? "linear step " + std::to_string(sched.step())
                                : "explicit (" + std::to_string(sched.defined_blocks()) + " times)";
    }

    // Measurements.
    const std::size_t count = n_max - n_min + 1;
    std::vector<double> measured(count, kNaN), ci(count, 0.0);
    if (method == MeasureMethod::Exact) {
        for (std::size_t n = n_min; n <= n_max; ++n)
            measured[n - n_min] = std::abs(exact_correlation(kernel, f, g, n));
    } else {
        rep.runs = runs;
        const std::size_t width = std::max(
            {std::max<std::size_t>(*kernel.memory_order(), 1), f.depth(), g.depth()});
        const std::vector<double> mu = stationary_word_measure(kernel, width);
        double int_f = 0.0, int_g = 0.0;
        for (std::size_t u = 0; u < mu.size(); ++u) {
            int_f += mu[u] * f.at_window(u);
            int_g += mu[u] * g.at_window(u);
        }
        // products[r*count + i] = f(start window) * g(window at time n_min + i)
        std::vector<double> products(runs * count);
        const std::size_t depth = kernel.effective_depth();
        parallel_runs(runs, threads, [&](std::size_t r) {
            SplitMix64 rng(SplitMix64::substream(seed, r));
            // stationary start: one CDF walk over the window cells
            std::size_t u0 = 0;
            {
                double target = rng.next_double();
                double acc = 0.0;
                for (std::size_t u = 0; u < mu.size(); ++u) {
                    acc += mu[u];
                    if (target < acc) { u0 = u; break; }
                    u0 = u;
                }
            }
            std::vector<int> word(width);
            std::size_t rest = u0;
            const std::size_t asize = kernel.alphabet().size();
            for (std::size_t j = 0; j < width; ++j) {
                word[width - 1 - j] = static_cast<int>(rest % asize);
                rest /= asize;
            }
            const double f_val = f.at_window(u0);
            Context start(kernel.alphabet(), word, Extension::Periodic, 0);
            detail::RollingPast window(start, std::max(depth, g.depth()));
            std::vector<double> row;
            for (std::size_t t = 1; t <= n_max; ++t) {
                kernel.probability_row([&](std::int64_t j) { return window.at(j); }, row);
                const int a = detail::draw_from_row(row, rng.next_double());
                window.push(a);
                if (t >= n_min) {
                    std::size_t gi = 0;
                    for (std::size_t j = g.depth(); j >= 1; --j)
                        gi = gi * asize +
                             static_cast<std::size_t>(window.at(-static_cast<std::int64_t>(j)));
                    products[r * count + (t - n_min)] = f_val * g.at_window(gi);
                }
            }
            if (n_min == 0) products[r * count] = f_val * g.at_window(static_cast<std::size_t>(u0));
        });
        for (std::size_t i = 0; i < count; ++i) {
            KahanSum s, s2;
            for (std::size_t r = 0; r < runs; ++r) {
                s.add(products[r * count + i]);
                s2.add(products[r * count + i] * products[r * count + i]);
            }
            const double mean = s.value() / static_cast<double>(runs);
            const double var =
                std::max(0.0, s2.value() / static_cast<double>(runs) - mean * mean);
            measured[i] = std::abs(mean - int_f * int_g);
            ci[i] = 3.0 * std::sqrt(var / static_cast<double>(runs));
        }
    }

    // Assemble rows and check dominance.
    const double slack = 1e-10;
    for (std::size_t n = n_min; n <= n_max; ++n) {
        BoundRow row;
        row.n = n;
        row.measured = measured[n - n_min];
        row.ci = ci[n - n_min];
        if (direct) {
            row.sum_bound = direct->sum_bound(rep.f_norm1, rep.g_norm_normalized, n);
            row.c_bound = direct->c_bound(rep.f_norm1, rep.g_norm_normalized, n);
            row.holder = holder_bound(direct->profile(), rep.f_norm1, rep.g_theta, theta, n);
            if (g.depth() <= 1)
                row.single_coord =
                    single_coordinate_bound(direct->profile(), rep.f_norm1, rep.g_sup, n);
        }
        if (block) {
            const std::size_t m = block->block_index(n);
            row.block_sum_bound = block->sum_bound(rep.f_norm1, rep.g_norm_block, m);
            row.block_c_bound = block->c_bound(rep.f_norm1, rep.g_norm_block, m);
        }
        const double floor_measured = row.measured - row.ci;
        for (double b : {row.sum_bound, row.c_bound, row.block_sum_bound, row.block_c_bound,
                         row.holder, row.single_coord}) {
            if (!std::isnan(b) && floor_measured > b + slack) row.violation = true;
        }
        rep.any_violation = rep.any_violation || row.violation;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace mixlab
