#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mixlab {

/// Strictly increasing block times n_0 = 0 < n_1 < n_2 < ... used to cut a
/// chain into blocks. Valid schedules are subadditive:
/// n_{m+k} - n_m <= n_k, which forces n_m <= m * n_1 while n_m >= m always.
class BlockSchedule {
public:
    static BlockSchedule linear(std::size_t step) {
        if (step == 0) throw std::invalid_argument("BlockSchedule: step must be positive");
        BlockSchedule s;
        s.step_ = step;
        return s;
    }

    static BlockSchedule explicit_times(std::vector<std::size_t> times) {
        if (times.empty() || times.front() != 0)
            throw std::invalid_argument("BlockSchedule: times must start at n_0 = 0");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] <= times[i - 1])
                throw std::invalid_argument("BlockSchedule: times must be strictly increasing");
        for (std::size_t m = 0; m < times.size(); ++m)
            for (std::size_t k = 0; m + k < times.size(); ++k)
                if (times[m + k] - times[m] > times[k])
                    throw std::invalid_argument("BlockSchedule: times are not subadditive");
        BlockSchedule s;
        s.times_ = std::move(times);
        return s;
    }

    bool is_linear() const { return times_.empty(); }
    std::size_t step() const { return step_; }

    /// n_m.
    std::size_t time(std::size_t m) const {
        if (is_linear()) return step_ * m;
        if (m >= times_.size())
            throw std::out_of_range("BlockSchedule: block index beyond explicit schedule");
        return times_[m];
    }

    /// Largest m with n_m <= n.
    std::size_t block_index(std::size_t n) const {
        if (is_linear()) return n / step_;
        if (n >= times_.back()) return times_.size() - 1;
        std::size_t lo = 0, hi = times_.size() - 1;
        while (lo + 1 < hi) {
            const std::size_t mid = (lo + hi) / 2;
            (times_[mid] <= n ? lo : hi) = mid;
        }
        return times_[hi] <= n ? hi : lo;
    }

    /// Number of block indices with a defined time (SIZE_MAX for linear).
    std::size_t defined_blocks() const {
        return is_linear() ? std::numeric_limits<std::size_t>::max() : times_.size();
    }

private:
    BlockSchedule() = default;
    std::size_t step_ = 1;
    std::vector<std::size_t> times_; // empty <=> linear
};

} // namespace mixlab
