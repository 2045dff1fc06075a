#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gprice {

/// A trajectory sampled on a strictly increasing time grid.
class SampledPath {
public:
    SampledPath() = default;
    /// Throws InvalidArgument on length mismatch, non-increasing or non-finite
    /// times, non-finite values, or (when `positive`) a value <= 0.
    SampledPath(std::vector<double> times, std::vector<double> values, bool positive = false);

    static SampledPath from_function(std::vector<double> times,
                                     const std::function<double(double)>& f,
                                     bool positive = false);

    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    bool positive() const noexcept { return positive_; }
    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> values() const noexcept { return values_; }
    double time(std::size_t i) const { return times_.at(i); }
    double value(std::size_t i) const { return values_.at(i); }
    double start() const { return times_.front(); }
    double horizon() const { return times_.back(); }

    /// Linear interpolation; flat outside the sampled range.
    double at_time(double t) const;
    SampledPath resampled(std::span<const double> times) const;
    /// Every `stride`-th sample plus the last one.
    SampledPath coarsened(std::size_t stride) const;

    bool operator==(const SampledPath&) const = default;

private:
    std::vector<double> times_;
    std::vector<double> values_;
    bool positive_ = false;
};

/// Uniform grid {0, T/n, ..., T}.
std::vector<double> uniform_times(double horizon, std::size_t n_steps);

/// Throws InvalidArgument unless `times` is finite, strictly increasing and
/// starts at 0.
void validate_time_grid(std::span<const double> times, const char* what);

}  // namespace gprice
