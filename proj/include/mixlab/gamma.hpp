#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mixlab/numeric.hpp"
#include "mixlab/schedule.hpp"
#include "mixlab/variations.hpp"

namespace mixlab {

/// Continuity-modulus sequence gamma_m in [0,1), nonincreasing. It drives the
/// dominating reset chain: from state i the chain falls to 0 with probability
/// gamma_i and climbs to i+1 otherwise.
///
/// Three representations:
///  * Plain: explicit table plus analytic tail (zero / constant / geometric /
///    polynomial with an optional index shift).
///  * FromVariations: gamma_m = 1 - exp(-var(m + offset)) for a potential's
///    variation sequence; survival products then reduce to variation tails,
///    exactly.
///  * Block: gamma_m = 1 - exp(-multiplier * tail_sum(n_m)) over a block
///    schedule, the modulus of block transition probabilities.
class GammaSequence {
public:
    enum class TailKind { Zero, Constant, Geometric, Polynomial };

    struct Tail {
        TailKind kind = TailKind::Zero;
        double coeff = 0.0;
        double param = 0.0;
        double shift = 0.0; // polynomial only: gamma_m = coeff*(m+1+shift)^{-param}
    };

    GammaSequence(std::vector<double> table, Tail tail)
        : repr_(Repr::Plain), table_(std::move(table)), tail_(tail) {
        validate_plain();
    }

    static GammaSequence zero() { return GammaSequence({}, Tail{}); }
    static GammaSequence from_values(std::vector<double> values) {
        return GammaSequence(std::move(values), Tail{});
    }
    static GammaSequence constant(double g) {
        return GammaSequence({}, Tail{TailKind::Constant, g, 0.0, 0.0});
    }
    static GammaSequence geometric(double coeff, double ratio) {
        return GammaSequence({}, Tail{TailKind::Geometric, coeff, ratio, 0.0});
    }
    static GammaSequence polynomial(double coeff, double exponent, double shift = 0.0) {
        return GammaSequence({}, Tail{TailKind::Polynomial, coeff, exponent, shift});
    }

    /// gamma_m = 1 - exp(-var(m + index_offset)).
    static GammaSequence from_variations(VariationSequence vars, std::size_t index_offset) {
        GammaSequence g;
        g.repr_ = Repr::FromVariations;
        g.vars_ = std::move(vars);
        g.offset_ = index_offset;
        return g;
    }

    /// gamma_m = 1 - exp(-multiplier * sum_{k >= n_m} var_k) on a schedule.
    /// Requires summable variations whose tails of tails remain summable along
    /// the schedule; explicit (non-linear) schedules additionally require
    /// variations of finite support, so every rest is a finite sum.
    static GammaSequence block(VariationSequence vars, BlockSchedule schedule,
                               double multiplier = 3.0) {
        if (!vars.summable())
            throw std::domain_error("GammaSequence::block: variations not summable");
        if (!schedule.is_linear() && vars.zero_from() == VariationSequence::npos)
            throw std::domain_error(
                "GammaSequence::block: explicit schedules require finite-support variations");
        if (vars.tail().kind == VariationSequence::TailKind::Polynomial &&
            vars.tail().coeff > 0.0 && vars.tail().param <= 2.0)
            throw std::domain_error(
                "GammaSequence::block: rests not summable (polynomial tail exponent <= 2)");
        GammaSequence g;
        g.repr_ = Repr::Block;
        g.vars_ = std::move(vars);
        g.schedule_ = std::move(schedule);
        g.multiplier_ = multiplier;
        return g;
    }

    double value(std::size_t m) const {
        switch (repr_) {
            case Repr::Plain:
                if (m < table_.size()) return table_[m];
                return plain_tail_value(m);
            case Repr::FromVariations:
                return -std::expm1(-vars_->value(m + offset_));
            case Repr::Block: {
                if (m >= schedule_->defined_blocks()) {
                    // Beyond an explicit schedule the modulus is defined only
                    // when the variations have already run out.
                    if (vars_->tail_sum(schedule_->time(schedule_->defined_blocks() - 1)) == 0.0)
                        return 0.0;
                    throw std::out_of_range("GammaSequence::block: index beyond schedule");
                }
                return -std::expm1(-multiplier_ * vars_->tail_sum(schedule_->time(m)));
            }
        }
        return 0.0;
    }

    std::vector<double> values_up_to(std::size_t n_max) const {
        std::vector<double> v(n_max + 1);
        for (std::size_t m = 0; m <= n_max; ++m) v[m] = value(m);
        return v;
    }

    bool summable() const {
        switch (repr_) {
            case Repr::Plain:
                switch (tail_.kind) {
                    case TailKind::Zero: return true;
                    case TailKind::Constant: return tail_.coeff == 0.0;
                    case TailKind::Geometric: return true;
                    case TailKind::Polynomial: return tail_.param > 1.0 || tail_.coeff == 0.0;
                }
                return false;
            case Repr::FromVariations:
                return vars_->summable();
            case Repr::Block:
                // value(m) <= multiplier * rest(m); rests summable was enforced.
                return true;
        }
        return false;
    }

    /// Certified upper bound on sum_{k>=m} gamma_k (exact for Plain kinds).
    double tail_sum_upper(std::size_t m) const {
        if (!summable()) return kInf;
        switch (repr_) {
            case Repr::Plain: {
                KahanSum s;
                for (std::size_t k = m; k < table_.size(); ++k) s.add(table_[k]);
                const std::size_t start = std::max(m, table_.size());
                switch (tail_.kind) {
                    case TailKind::Zero:
                    case TailKind::Constant: // coeff == 0 here
                        break;
                    case TailKind::Geometric:
                        s.add(tail_.coeff * std::pow(tail_.param, static_cast<double>(start)) /
                              (1.0 - tail_.param));
                        break;
                    case TailKind::Polynomial:
                        if (tail_.coeff > 0.0)
                            s.add(tail_.coeff *
                                  power_tail_sum(tail_.param, static_cast<double>(start) + 1.0 + tail_.shift));
                        break;
                }
                return s.value();
            }
            case Repr::FromVariations:
                return vars_->tail_sum(m + offset_); // 1 - e^{-v} <= v
            case Repr::Block:
                return multiplier_ * rest_sum_upper(m);
        }
        return kInf;
    }

    /// sum_{k>=m} log(1 - gamma_k), the log of the survival product that gives
    /// P(no reset ever after m). Exact to ~1e-12 for Plain and FromVariations;
    /// a certified lower bound for Block sequences (their rests are bounded
    /// from above). -infinity whenever gamma is not summable.
    double log_survival_tail(std::size_t m) const {
        if (!summable()) return -kInf;
        switch (repr_) {
            case Repr::FromVariations:
                return -vars_->tail_sum(m + offset_); // log(1-gamma_k) = -var(k+offset)
            case Repr::Block:
                return -multiplier_ * rest_sum_upper(m);
            case Repr::Plain:
                break;
        }
        KahanSum s;
        std::size_t k = m;
        for (; k < table_.size(); ++k) s.add(std::log1p(-table_[k]));
        // Walk the analytic tail until terms are small, then close with the
        // power-series sums sum_j gamma^j / j, each of which is in closed form.
        while (plain_tail_value(k) > 1e-4) {
            s.add(std::log1p(-plain_tail_value(k)));
            ++k;
        }
        switch (tail_.kind) {
            case TailKind::Zero:
            case TailKind::Constant:
                break;
            case TailKind::Geometric: {
                const double theta = tail_.param;
                for (int j = 1; j <= 8; ++j) {
                    const double term = std::pow(tail_.coeff, j) *
                                        std::pow(theta, static_cast<double>(j) * static_cast<double>(k)) /
                                        (static_cast<double>(j) * (1.0 - std::pow(theta, j)));
                    s.add(-term);
                    if (term < 1e-17) break;
                }
                break;
            }
            case TailKind::Polynomial: {
                if (tail_.coeff > 0.0) {
                    for (int j = 1; j <= 8; ++j) {
                        const double term =
                            std::pow(tail_.coeff, j) / static_cast<double>(j) *
                            power_tail_sum(static_cast<double>(j) * tail_.param,
                                           static_cast<double>(k) + 1.0 + tail_.shift);
                        s.add(-term);
                        if (term < 1e-17) break;
                    }
                }
                break;
            }
        }
        return s.value();
    }

private:
    enum class Repr { Plain, FromVariations, Block };

    GammaSequence() : repr_(Repr::Plain) {}

    void validate_plain() {
        double prev = 1.0;
        for (double g : table_) {
            if (!(g >= 0.0) || !(g < 1.0))
                throw std::invalid_argument("GammaSequence: entries must lie in [0,1)");
            if (g > prev) throw std::invalid_argument("GammaSequence: table not nonincreasing");
            prev = g;
        }
        switch (tail_.kind) {
            case TailKind::Zero:
                break;
            case TailKind::Constant:
                if (!(tail_.coeff >= 0.0) || !(tail_.coeff < 1.0))
                    throw std::invalid_argument("GammaSequence: constant tail must lie in [0,1)");
                break;
            case TailKind::Geometric:
                if (!(tail_.coeff >= 0.0) || !(tail_.param > 0.0) || !(tail_.param < 1.0))
                    throw std::invalid_argument("GammaSequence: geometric tail needs ratio in (0,1)");
                break;
            case TailKind::Polynomial:
                if (!(tail_.coeff >= 0.0) || !(tail_.param > 0.0) || !(tail_.shift >= 0.0))
                    throw std::invalid_argument("GammaSequence: polynomial tail needs exponent > 0, shift >= 0");
                break;
        }
        const double junction = plain_tail_value(table_.size());
        if (!(junction < 1.0))
            throw std::invalid_argument("GammaSequence: tail value must stay below 1");
        if (!table_.empty() && junction > table_.back() * (1.0 + 1e-12) + 1e-300)
            throw std::invalid_argument("GammaSequence: tail exceeds last table entry");
    }

    double plain_tail_value(std::size_t m) const {
        switch (tail_.kind) {
            case TailKind::Zero: return 0.0;
            case TailKind::Constant: return tail_.coeff;
            case TailKind::Geometric:
                return tail_.coeff * std::pow(tail_.param, static_cast<double>(m));
            case TailKind::Polynomial:
                return tail_.coeff * std::pow(static_cast<double>(m) + 1.0 + tail_.shift, -tail_.param);
        }
        return 0.0;
    }

    /// Upper bound on sum_{k>=m} tail_sum(n_k) for the Block representation.
    double rest_sum_upper(std::size_t m) const {
        const auto& v = *vars_;
        const auto& sched = *schedule_;
        const std::size_t zero_at = v.zero_from();
        if (zero_at != VariationSequence::npos) {
            KahanSum s;
            for (std::size_t k = m; k < sched.defined_blocks(); ++k) {
                const std::size_t n = sched.time(k);
                if (n >= zero_at) break;
                s.add(v.tail_sum(n));
            }
            return s.value();
        }
        // Linear schedule with an infinite analytic tail.
        const std::size_t step = sched.step();
        const auto& t = v.tail();
        KahanSum s;
        std::size_t k = m;
        while (step * k < v.table_size()) {
            s.add(v.tail_sum(step * k));
            ++k;
        }
        if (t.kind == VariationSequence::TailKind::Geometric) {
            // sum_{j>=k} C theta^{step j} / (1-theta)
            const double theta_s = std::pow(t.param, static_cast<double>(step));
            s.add(t.coeff / (1.0 - t.param) *
                  std::pow(t.param, static_cast<double>(step) * static_cast<double>(k)) /
                  (1.0 - theta_s));
            return s.value();
        }
        // Polynomial, exponent p > 2: explicit stretch, then the integral bound
        // tail_sum(n) <= C n^{1-p} / (p-1).
        const double p = t.param;
        const std::size_t k_explicit = k + 4096;
        for (; k < k_explicit; ++k) s.add(v.tail_sum(step * k));
        s.add(t.coeff / (p - 1.0) * std::pow(static_cast<double>(step), 1.0 - p) *
              power_tail_sum(p - 1.0, static_cast<double>(k)));
        return s.value();
    }

    Repr repr_;
    // Plain
    std::vector<double> table_;
    Tail tail_{};
    // FromVariations / Block
    std::optional<VariationSequence> vars_;
    std::size_t offset_ = 0;
    std::optional<BlockSchedule> schedule_;
    double multiplier_ = 3.0;
};

} // namespace mixlab
