#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mixlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Compensated accumulator for long sums of small terms.
class KahanSum {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Tail of the Hurwitz-type sum: sum_{j >= 0} (start + j)^{-p}, for p > 1 and
/// start >= 1. Explicit terms up to a pivot, then Euler-Maclaurin through the
/// B4 term; absolute error is far below 1e-13 for the pivot used here.
inline double power_tail_sum(double p, double start) {
    if (p <= 1.0) return kInf;
    if (start < 1.0) start = 1.0;
    KahanSum head;
    double x = start;
    while (x < 64.0) {
        head.add(std::pow(x, -p));
        x += 1.0;
    }
    double tail = std::pow(x, 1.0 - p) / (p - 1.0);
    tail += 0.5 * std::pow(x, -p);
    tail += p / 12.0 * std::pow(x, -p - 1.0);
    tail -= p * (p + 1.0) * (p + 2.0) / 720.0 * std::pow(x, -p - 3.0);
    return head.value() + tail;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = slope*x + intercept with coefficient of determination.
inline LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("linear_fit: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) { sx += xs[i]; sy += ys[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

} // namespace mixlab
