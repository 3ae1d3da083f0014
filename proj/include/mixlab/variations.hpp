#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mixlab/numeric.hpp"

namespace mixlab {

/// Nonincreasing, nonnegative sequence var_0 >= var_1 >= ... >= 0 stored as an
/// explicit table with an analytic tail, so that tail sums sum_{k>=m} var_k are
/// available in closed form whenever they are finite.
///
/// Tail kinds, indexed by the absolute position m >= table size:
///   Zero:        var_m = 0
///   Geometric:   var_m = coeff * param^m,        0 < param < 1
///   Polynomial:  var_m = coeff * (m+1)^{-param}, param > 0 (summable iff > 1)
class VariationSequence {
public:
    enum class TailKind { Zero, Geometric, Polynomial };

    struct Tail {
        TailKind kind = TailKind::Zero;
        double coeff = 0.0;
        double param = 0.0;
    };

    VariationSequence(std::vector<double> table, Tail tail)
        : table_(std::move(table)), tail_(tail) {
        validate();
    }

    static VariationSequence from_table(std::vector<double> values) {
        return VariationSequence(std::move(values), Tail{TailKind::Zero, 0.0, 0.0});
    }
    static VariationSequence zero() { return from_table({}); }
    static VariationSequence geometric(double coeff, double ratio) {
        return VariationSequence({}, Tail{TailKind::Geometric, coeff, ratio});
    }
    static VariationSequence polynomial(double coeff, double exponent) {
        return VariationSequence({}, Tail{TailKind::Polynomial, coeff, exponent});
    }

    double value(std::size_t m) const {
        if (m < table_.size()) return table_[m];
        return tail_value(m);
    }

    /// sum_{k>=m} value(k); +infinity when the sequence is not summable.
    double tail_sum(std::size_t m) const {
        if (!summable()) return kInf;
        if (m >= table_.size()) return analytic_tail_sum(m);
        KahanSum s;
        for (std::size_t k = m; k < table_.size(); ++k) s.add(table_[k]);
        s.add(analytic_tail_sum(table_.size()));
        return s.value();
    }

    bool summable() const {
        switch (tail_.kind) {
            case TailKind::Zero: return true;
            case TailKind::Geometric: return true; // ratio < 1 enforced
            case TailKind::Polynomial: return tail_.param > 1.0;
        }
        return false;
    }

    /// Smallest m with value(k) = 0 for all k >= m, if the sequence has finite
    /// support; npos otherwise.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t zero_from() const {
        if (tail_.kind != TailKind::Zero && tail_.coeff != 0.0) return npos;
        std::size_t m = table_.size();
        while (m > 0 && table_[m - 1] == 0.0) --m;
        return m;
    }

    std::size_t table_size() const { return table_.size(); }
    const Tail& tail() const { return tail_; }

private:
    void validate() const {
        double prev = kInf;
        for (double v : table_) {
            if (!(v >= 0.0)) throw std::invalid_argument("VariationSequence: negative or NaN entry");
            if (v > prev) throw std::invalid_argument("VariationSequence: table not nonincreasing");
            prev = v;
        }
        switch (tail_.kind) {
            case TailKind::Zero:
                break;
            case TailKind::Geometric:
                if (!(tail_.coeff >= 0.0) || !(tail_.param > 0.0) || !(tail_.param < 1.0))
                    throw std::invalid_argument("VariationSequence: geometric tail needs coeff >= 0, ratio in (0,1)");
                break;
            case TailKind::Polynomial:
                if (!(tail_.coeff >= 0.0) || !(tail_.param > 0.0))
                    throw std::invalid_argument("VariationSequence: polynomial tail needs coeff >= 0, exponent > 0");
                break;
        }
        if (!table_.empty()) {
            const double junction = tail_value(table_.size());
            if (junction > table_.back() * (1.0 + 1e-12) + 1e-300)
                throw std::invalid_argument("VariationSequence: tail exceeds last table entry");
        }
    }

    double tail_value(std::size_t m) const {
        switch (tail_.kind) {
            case TailKind::Zero: return 0.0;
            case TailKind::Geometric:
                return tail_.coeff * std::pow(tail_.param, static_cast<double>(m));
            case TailKind::Polynomial:
                return tail_.coeff * std::pow(static_cast<double>(m) + 1.0, -tail_.param);
        }
        return 0.0;
    }

    double analytic_tail_sum(std::size_t m) const {
        switch (tail_.kind) {
            case TailKind::Zero: return 0.0;
            case TailKind::Geometric:
                return tail_.coeff * std::pow(tail_.param, static_cast<double>(m)) / (1.0 - tail_.param);
            case TailKind::Polynomial:
                // sum_{k>=m} coeff*(k+1)^{-p} = coeff * sum_{j>=m+1} j^{-p}
                return tail_.coeff * power_tail_sum(tail_.param, static_cast<double>(m) + 1.0);
        }
        return 0.0;
    }

    std::vector<double> table_;
    Tail tail_;
};

/// sup_{0 <= k <= k_max} var_k(g) / var_k(phi), with 0/0 read as 0 and
/// positive/0 as +infinity. Explicit scan through the tabulated region; in the
/// analytic-tail region the ratio is evaluated only at the segment endpoints
/// and at its single interior critical point (the tail families make the ratio
/// piecewise monotone there).
inline double seminorm_ratio(const VariationSequence& g_vars, const VariationSequence& phi_vars,
                             std::size_t k_max) {
    const auto ratio_at = [&](std::size_t k) -> double {
        const double num = g_vars.value(k);
        const double den = phi_vars.value(k);
        if (num == 0.0) return 0.0;
        if (den == 0.0) return kInf;
        return num / den;
    };

    const std::size_t explicit_to =
        std::min(k_max, std::max(g_vars.table_size(), phi_vars.table_size()) + 64);
    double best = 0.0;
    for (std::size_t k = 0; k <= explicit_to; ++k) best = std::max(best, ratio_at(k));
    if (explicit_to == k_max || best == kInf) return best;

    // Both sequences are in their analytic tails on (explicit_to, k_max].
    // ratio(k) = A * s^k * (k+c)^q for constants depending on the tail kinds;
    // its log-derivative ln s + q/(k+c) has at most one zero.
    double log_s = 0.0, q = 0.0;
    const auto& gt = g_vars.tail();
    const auto& pt = phi_vars.tail();
    if (gt.kind == VariationSequence::TailKind::Geometric) log_s += std::log(gt.param);
    if (gt.kind == VariationSequence::TailKind::Polynomial) q -= gt.param;
    if (pt.kind == VariationSequence::TailKind::Geometric) log_s -= std::log(pt.param);
    if (pt.kind == VariationSequence::TailKind::Polynomial) q += pt.param;

    std::vector<std::size_t> candidates{explicit_to + 1, k_max};
    if (log_s < 0.0 && q > 0.0) {
        const double kc = q / (-log_s) - 1.0;
        if (kc > static_cast<double>(explicit_to) && kc < static_cast<double>(k_max)) {
            candidates.push_back(static_cast<std::size_t>(std::floor(kc)));
            candidates.push_back(static_cast<std::size_t>(std::ceil(kc)));
        }
    }
    for (std::size_t k : candidates) best = std::max(best, ratio_at(std::min(k, k_max)));
    return best;
}

} // namespace mixlab
