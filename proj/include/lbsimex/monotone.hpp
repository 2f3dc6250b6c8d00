#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lbsimex {

// Non-decreasing step function with jumps at the distinct uncensored
// times; value(t) = -inf below the first jump.
class MonotoneStep {
public:
    MonotoneStep() = default;

    MonotoneStep(std::vector<double> event_times, std::vector<double> values)
        : times_(std::move(event_times)), values_(std::move(values)) {
        if (times_.size() != values_.size())
            throw std::invalid_argument("monotone step: size mismatch");
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (times_[k] <= times_[k - 1])
                throw std::invalid_argument("monotone step: times not increasing");
            if (values_[k] < values_[k - 1])
                throw std::invalid_argument("monotone step: values decrease");
        }
    }

    double value(double t) const {
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return -std::numeric_limits<double>::infinity();
        return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    std::size_t size() const { return times_.size(); }
    const std::vector<double>& event_times() const { return times_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> times_, values_;
};

// Pool-adjacent-violators projection onto non-decreasing sequences
// (L2, unit weights). Returns the largest pointwise adjustment made.
inline double pool_adjacent_violators(std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const std::vector<double> original = values;
    std::vector<double> level;
    std::vector<std::size_t> count;
    for (std::size_t k = 0; k < n; ++k) {
        level.push_back(values[k]);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged = (level[level.size() - 2] * count[count.size() - 2] +
                                   level.back() * count.back()) /
                                  static_cast<double>(count[count.size() - 2] + count.back());
            count[count.size() - 2] += count.back();
            level[level.size() - 2] = merged;
            level.pop_back();
            count.pop_back();
        }
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < level.size(); ++b)
        for (std::size_t r = 0; r < count[b]; ++r) values[pos++] = level[b];
    double max_adjust = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        max_adjust = std::max(max_adjust, std::abs(values[k] - original[k]));
    return max_adjust;
}

}  // namespace lbsimex
