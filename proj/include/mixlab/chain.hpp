#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mixlab/context.hpp"
#include "mixlab/gamma.hpp"
#include "mixlab/potential.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

inline constexpr std::size_t kPropagationBudget = std::size_t{100'000'000};

/// Which variation index certifies the transition-ratio modulus of a kernel
/// built from a normalized potential psi.
///   Sharp:        gamma_m = 1 - exp(-var_{m+1}(psi)); pasts agreeing to depth
///                 m pin m+1 history coordinates once the next symbol is fixed,
///                 so this is the exact modulus.
///   Conservative: gamma_m = 1 - exp(-var_m(psi)); dominates the sharp one
///                 since variations are nonincreasing. Default.
enum class GammaIndexing { Conservative, Sharp };

/// Function of finitely many most-recent coordinates, tabulated over the
/// length-`depth` window (oldest..newest); depth 0 means a constant.
class CylinderFunction {
public:
    CylinderFunction(Alphabet alphabet, std::size_t depth, std::vector<double> values)
        : alphabet_(std::move(alphabet)), depth_(depth), values_(std::move(values)) {
        if (values_.size() != checked_power(alphabet_.size(), depth_))
            throw std::invalid_argument("CylinderFunction: table has wrong size");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("CylinderFunction: non-finite value");
    }

    static CylinderFunction constant(Alphabet alphabet, double c) {
        return CylinderFunction(std::move(alphabet), 0, {c});
    }
    static CylinderFunction indicator_last(Alphabet alphabet, int symbol) {
        std::vector<double> v(alphabet.size(), 0.0);
        v.at(static_cast<std::size_t>(symbol)) = 1.0;
        return CylinderFunction(std::move(alphabet), 1, std::move(v));
    }

    const Alphabet& alphabet() const { return alphabet_; }
    std::size_t depth() const { return depth_; }
    const std::vector<double>& values() const { return values_; }

    /// Value from a window index; idx may index a window longer than depth,
    /// in which case the low digits (the newest symbols) select the cell.
    double at_window(std::size_t idx) const { return values_[idx % values_.size()]; }

    double eval(const Context& history) const {
        std::size_t idx = 0;
        for (std::size_t j = depth_; j >= 1; --j)
            idx = idx * alphabet_.size() +
                  static_cast<std::size_t>(history.at(-static_cast<std::int64_t>(j)));
        return values_[idx];
    }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Exact variations of the cylinder function on histories (zero from depth on).
    VariationSequence variations() const {
        const std::size_t asize = alphabet_.size();
        std::vector<double> vars(depth_ + 1, 0.0);
        std::size_t suffix = 1;
        for (std::size_t m = 0; m < depth_; ++m) {
            std::vector<double> lo(suffix, kInf), hi(suffix, -kInf);
            for (std::size_t idx = 0; idx < values_.size(); ++idx) {
                const std::size_t g = idx % suffix;
                lo[g] = std::min(lo[g], values_[idx]);
                hi[g] = std::max(hi[g], values_[idx]);
            }
            for (std::size_t g = 0; g < suffix; ++g) vars[m] = std::max(vars[m], hi[g] - lo[g]);
            suffix *= asize;
        }
        for (std::size_t m = 1; m < vars.size(); ++m) vars[m] = std::min(vars[m], vars[m - 1]);
        return VariationSequence::from_table(std::move(vars));
    }

private:
    Alphabet alphabet_;
    std::size_t depth_;
    std::vector<double> values_;
};

/// Transition probabilities P(a|x) = e^{psi(xa)} of a normalized potential,
/// with the certified continuity modulus gamma attached. Immutable.
class TransitionKernel {
public:
    static TransitionKernel from_potential(Potential psi) {
        if (!psi.normalized())
            throw std::invalid_argument("TransitionKernel: potential not flagged normalized");
        TransitionKernel k;
        k.psi_ = std::move(psi);
        if (k.psi_.memory_order()) {
            const auto& vals = k.psi_.raw_table();
            k.probs_.resize(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) k.probs_[i] = std::exp(vals[i]);
        }
        return k;
    }

    /// rows: probabilities over A for each of the |A|^order contexts,
    /// context-major. Checked row-stochastic to 1e-9, then renormalized so
    /// that downstream row sums are exact to machine precision.
    static TransitionKernel from_stochastic_table(Alphabet alphabet, std::size_t order,
                                                  std::vector<double> rows) {
        const std::size_t asize = alphabet.size();
        const std::size_t contexts = checked_power(asize, order);
        if (rows.size() != contexts * asize)
            throw std::invalid_argument("TransitionKernel: probability table has wrong size");
        std::vector<double> logs(rows.size());
        for (std::size_t u = 0; u < contexts; ++u) {
            double s = 0.0;
            for (std::size_t a = 0; a < asize; ++a) {
                const double p = rows[u * asize + a];
                if (!(p >= 0.0)) throw std::invalid_argument("TransitionKernel: negative probability");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw std::invalid_argument("TransitionKernel: row does not sum to 1");
            for (std::size_t a = 0; a < asize; ++a) {
                const double p = rows[u * asize + a] / s;
                logs[u * asize + a] = p > 0.0 ? std::log(p) : -kInf;
            }
        }
        return from_potential(Potential::table(std::move(alphabet), order, std::move(logs), true));
    }

    const Potential& potential() const { return psi_; }
    const Alphabet& alphabet() const { return psi_.alphabet(); }
    std::optional<std::size_t> memory_order() const { return psi_.memory_order(); }
    std::size_t effective_depth() const { return psi_.effective_depth(); }

    /// P(.|past) written into out; past_at(j) supplies symbols at j <= -1.
    template <class PastAt>
    void probability_row(PastAt&& past_at, std::vector<double>& out) const {
        if (!probs_.empty()) {
            const auto k = *psi_.memory_order();
            const std::size_t asize = alphabet().size();
            std::size_t idx = 0;
            for (std::size_t j = k; j >= 1; --j)
                idx = idx * asize + static_cast<std::size_t>(past_at(-static_cast<std::int64_t>(j)));
            out.assign(probs_.begin() + static_cast<std::ptrdiff_t>(idx * asize),
                       probs_.begin() + static_cast<std::ptrdiff_t>((idx + 1) * asize));
            return;
        }
        psi_.evaluate_row(past_at, out);
        for (double& v : out) v = std::exp(v);
    }

    double prob(int a, const Context& past) const {
        std::vector<double> row;
        probability_row([&](std::int64_t j) { return past.at(j); }, row);
        return row[static_cast<std::size_t>(a)];
    }

    /// Probability row by lifted-state index (finite memory only); the state
    /// is the last `memory_order` symbols encoded oldest-most-significant.
    const double* row_by_state(std::size_t state) const {
        return probs_.data() + state * alphabet().size();
    }

    /// Certified continuity modulus of the transition ratios.
    GammaSequence gamma(GammaIndexing indexing = GammaIndexing::Conservative) const {
        return GammaSequence::from_variations(psi_.variations(),
                                              indexing == GammaIndexing::Sharp ? 1 : 0);
    }

private:
    TransitionKernel() : psi_(Potential::table(Alphabet("01"), 0, {0.0, 0.0})) {}
    Potential psi_;
    std::vector<double> probs_;
};

/// One sampled path: past, the symbols at times 0..n-1, and the seed that
/// produced them. depth_used / truncation_error document how deeply the past
/// was read (the error radius is the potential's variation tail there).
struct Trajectory {
    Context past;
    std::vector<int> samples;
    std::uint64_t seed = 0;
    std::size_t depth_used = 0;
    double truncation_error = 0.0;
};

namespace detail {

/// Rolling window of the last `depth` symbols, seeded from a context.
class RollingPast {
public:
    RollingPast(const Context& start, std::size_t depth) : buf_(std::max<std::size_t>(depth, 1)) {
        const auto d = static_cast<std::int64_t>(buf_.size());
        for (std::int64_t j = -d; j <= -1; ++j)
            buf_[static_cast<std::size_t>(j + d)] = start.at(j);
        head_ = 0; // buf_[head_] is the oldest
    }
    int at(std::int64_t j) const { // j in [-depth, -1]
        const auto d = static_cast<std::int64_t>(buf_.size());
        return buf_[static_cast<std::size_t>((head_ + d + j) % d)];
    }
    void push(int a) {
        buf_[static_cast<std::size_t>(head_)] = a;
        head_ = (head_ + 1) % static_cast<std::int64_t>(buf_.size());
    }

private:
    std::vector<int> buf_;
    std::int64_t head_;
};

inline int draw_from_row(const std::vector<double>& row, double u) {
    double acc = 0.0;
    for (std::size_t a = 0; a + 1 < row.size(); ++a) {
        acc += row[a];
        if (u < acc) return static_cast<int>(a);
    }
    return static_cast<int>(row.size() - 1);
}

} // namespace detail

/// Samples Z_0..Z_{n-1} of the chain with the given past; bit-reproducible
/// for a fixed seed.
inline Trajectory sample_chain(const TransitionKernel& kernel, const Context& past, std::size_t n,
                               std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_chain: need n >= 1");
    if (past.alphabet() != kernel.alphabet())
        throw std::invalid_argument("sample_chain: past over a different alphabet");
    const std::size_t depth = kernel.effective_depth();
    Trajectory out{past, {}, seed, depth,
                   kernel.memory_order() ? 0.0 : kernel.potential().truncation_error(depth)};
    out.samples.reserve(n);
    detail::RollingPast window(past, depth);
    SplitMix64 rng(seed);
    std::vector<double> row;
    for (std::size_t t = 0; t < n; ++t) {
        kernel.probability_row([&](std::int64_t j) { return window.at(j); }, row);
        const int a = detail::draw_from_row(row, rng.next_double());
        out.samples.push_back(a);
        window.push(a);
    }
    return out;
}

/// Invariant law of the last `order` symbols; order = max(memory order, 1).
struct StationaryMeasure {
    std::size_t order = 1;
    std::vector<double> weights; // over A^order, oldest-most-significant
};

/// Unique invariant probability vector of the lifted finite-state chain.
/// Requires finite memory and a primitive lift.
inline StationaryMeasure stationary_measure(const TransitionKernel& kernel) {
    const auto order = kernel.memory_order();
    if (!order) throw std::domain_error("stationary_measure: infinite-memory kernel");
    const std::size_t k = std::max<std::size_t>(*order, 1);
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t states = checked_power(asize, k);

    // Lifted transition matrix P[u][v], v = shift(u) append a.
    std::vector<std::vector<double>> p(states, std::vector<double>(states, 0.0));
    std::vector<double> row;
    bool any_zero = false;
    const std::size_t wrap = states / asize;
    std::vector<int> word(k);
    for (std::size_t u = 0; u < states; ++u) {
        std::size_t rest = u;
        for (std::size_t j = 0; j < k; ++j) {
            word[k - 1 - j] = static_cast<int>(rest % asize);
            rest /= asize;
        }
        kernel.probability_row(
            [&](std::int64_t j) {
                const std::int64_t idx = static_cast<std::int64_t>(k) + j;
                return idx >= 0 ? word[static_cast<std::size_t>(idx)] : word[0];
            },
            row);
        for (std::size_t a = 0; a < asize; ++a) {
            p[u][(u % wrap) * asize + a] += row[a];
            if (row[a] == 0.0) any_zero = true;
        }
    }
    if (any_zero && !detail::is_primitive(p))
        throw std::domain_error("stationary_measure: lifted chain is reducible or periodic");

    // Solve pi (P - I) = 0 with sum(pi) = 1: transpose system, last row replaced.
    std::vector<std::vector<double>> a(states, std::vector<double>(states, 0.0));
    std::vector<double> rhs(states, 0.0);
    for (std::size_t i = 0; i + 1 < states; ++i) {
        for (std::size_t j = 0; j < states; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
    }
    for (std::size_t j = 0; j < states; ++j) a[states - 1][j] = 1.0;
    rhs[states - 1] = 1.0;
    std::vector<double> pi = detail::solve_linear(std::move(a), std::move(rhs));
    for (double& w : pi) {
        if (w < 0.0 && w > -1e-10) w = 0.0;
        if (w < 0.0) throw std::domain_error("stationary_measure: negative stationary weight");
    }
    double total = 0.0;
    for (double w : pi) total += w;
    for (double& w : pi) w /= total;

    // Fixed-point residual in sup norm.
    double resid = 0.0;
    for (std::size_t v = 0; v < states; ++v) {
        double s = 0.0;
        for (std::size_t u = 0; u < states; ++u) s += pi[u] * p[u][v];
        resid = std::max(resid, std::abs(s - pi[v]));
    }
    if (resid > 1e-10) throw std::domain_error("stationary_measure: invariance residual too large");
    return StationaryMeasure{k, std::move(pi)};
}

/// Stationary law of the last `width` symbols, width >= 1.
inline std::vector<double> stationary_word_measure(const TransitionKernel& kernel,
                                                   std::size_t width) {
    const StationaryMeasure pi = stationary_measure(kernel);
    const std::size_t asize = kernel.alphabet().size();
    if (width <= pi.order) {
        const std::size_t cells = checked_power(asize, width);
        std::vector<double> out(cells, 0.0);
        for (std::size_t u = 0; u < pi.weights.size(); ++u) out[u % cells] += pi.weights[u];
        return out;
    }
    std::vector<double> cur = pi.weights;
    std::size_t len = pi.order;
    const std::size_t kcells = checked_power(asize, *kernel.memory_order());
    while (len < width) {
        const std::size_t cells = checked_power(asize, len + 1);
        std::vector<double> nxt(cells, 0.0);
        for (std::size_t u = 0; u < cur.size(); ++u) {
            if (cur[u] == 0.0) continue;
            const double* r = kernel.row_by_state(u % kcells);
            for (std::size_t a = 0; a < asize; ++a) nxt[u * asize + a] += cur[u] * r[a];
        }
        cur = std::move(nxt);
        ++len;
    }
    return cur;
}

namespace detail {

/// One forward step of a weighted measure on length-W windows.
inline void propagate_window_measure(const TransitionKernel& kernel, std::size_t width,
                                     std::vector<double>& dist, std::vector<double>& scratch) {
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t kcells = checked_power(asize, *kernel.memory_order());
    const std::size_t wrap = dist.size() / asize;
    scratch.assign(dist.size(), 0.0);
    for (std::size_t u = 0; u < dist.size(); ++u) {
        if (dist[u] == 0.0) continue;
        const double* r = kernel.row_by_state(u % kcells);
        const std::size_t base = (u % wrap) * asize;
        for (std::size_t a = 0; a < asize; ++a) scratch[base + a] += dist[u] * r[a];
    }
    dist.swap(scratch);
    (void)width;
}

inline std::size_t window_index_of(const Context& past, std::size_t width, std::size_t asize) {
    std::size_t idx = 0;
    for (std::size_t j = width; j >= 1; --j)
        idx = idx * asize + static_cast<std::size_t>(past.at(-static_cast<std::int64_t>(j)));
    return idx;
}

} // namespace detail

/// n-th transfer-operator iterate at x: the expectation of g over the chain
/// with past x after n steps, computed exactly by propagating the conditional
/// law on windows of width max(memory order, depth of g, 1).
inline double transfer_iterate(const TransitionKernel& kernel, const CylinderFunction& g,
                               const Context& x, std::size_t n,
                               std::size_t budget = kPropagationBudget) {
    const auto order = kernel.memory_order();
    if (!order) throw std::domain_error("transfer_iterate: infinite-memory kernel");
    if (n == 0) return g.eval(x);
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t width = std::max({std::max<std::size_t>(*order, 1), g.depth(), std::size_t{1}});
    const std::size_t cells = checked_power(asize, width);
    if (n * cells * asize > budget) throw std::length_error("transfer_iterate: budget exceeded");

    std::vector<double> dist(cells, 0.0), scratch;
    dist[detail::window_index_of(x, width, asize)] = 1.0;
    for (std::size_t t = 0; t < n; ++t) detail::propagate_window_measure(kernel, width, dist, scratch);
    double out = 0.0;
    for (std::size_t u = 0; u < cells; ++u)
        if (dist[u] != 0.0) out += dist[u] * g.at_window(u);
    return out;
}

/// Law of Z_n given the past (exact, finite memory).
inline std::vector<double> marginal_at(const TransitionKernel& kernel, const Context& past,
                                       std::size_t n, std::size_t budget = kPropagationBudget) {
    const auto order = kernel.memory_order();
    if (!order) throw std::domain_error("marginal_at: infinite-memory kernel");
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t width = std::max<std::size_t>(*order, 1);
    const std::size_t cells = checked_power(asize, width);
    if ((n + 1) * cells * asize > budget) throw std::length_error("marginal_at: budget exceeded");
    std::vector<double> dist(cells, 0.0), scratch;
    dist[detail::window_index_of(past, width, asize)] = 1.0;
    for (std::size_t t = 0; t < n; ++t) detail::propagate_window_measure(kernel, width, dist, scratch);
    std::vector<double> law(asize, 0.0);
    const std::size_t kcells = checked_power(asize, *order);
    for (std::size_t u = 0; u < cells; ++u) {
        if (dist[u] == 0.0) continue;
        const double* r = kernel.row_by_state(u % kcells);
        for (std::size_t a = 0; a < asize; ++a) law[a] += dist[u] * r[a];
    }
    return law;
}

/// Exact stationary covariance  int f o T^n . g dmu - int f dmu int g dmu:
/// start from the stationary window law weighted by f, push it n steps, then
/// integrate g.
inline double exact_correlation(const TransitionKernel& kernel, const CylinderFunction& f,
                                const CylinderFunction& g, std::size_t n,
                                std::size_t budget = kPropagationBudget) {
    const auto order = kernel.memory_order();
    if (!order) throw std::domain_error("exact_correlation: infinite-memory kernel");
    const std::size_t asize = kernel.alphabet().size();
    const std::size_t width =
        std::max({std::max<std::size_t>(*order, 1), f.depth(), g.depth(), std::size_t{1}});
    const std::size_t cells = checked_power(asize, width);
    if ((n + 1) * cells * asize > budget) throw std::length_error("exact_correlation: budget exceeded");

    const std::vector<double> mu = stationary_word_measure(kernel, width);
    double int_f = 0.0, int_g = 0.0;
    for (std::size_t u = 0; u < cells; ++u) {
        int_f += mu[u] * f.at_window(u);
        int_g += mu[u] * g.at_window(u);
    }
    std::vector<double> dist(cells), scratch;
    for (std::size_t u = 0; u < cells; ++u) dist[u] = mu[u] * f.at_window(u);
    for (std::size_t t = 0; t < n; ++t) detail::propagate_window_measure(kernel, width, dist, scratch);
    double joint = 0.0;
    for (std::size_t u = 0; u < cells; ++u)
        if (dist[u] != 0.0) joint += dist[u] * g.at_window(u);
    return joint - int_f * int_g;
}

} // namespace mixlab
