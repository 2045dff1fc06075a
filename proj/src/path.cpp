#include "gprice/path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gprice/errors.hpp"

namespace gprice {

SampledPath::SampledPath(std::vector<double> times, std::vector<double> values, bool positive)
    : times_(std::move(times)), values_(std::move(values)), positive_(positive) {
    if (times_.size() != values_.size()) {
        throw InvalidArgument("path: times and values differ in length");
    }
    if (times_.empty()) throw InvalidArgument("path: no samples");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
            throw InvalidArgument("path: non-finite sample at index " + std::to_string(i));
        }
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw InvalidArgument("path: times not strictly increasing at index " +
                                  std::to_string(i));
        }
        if (positive_ && !(values_[i] > 0.0)) {
            throw InvalidArgument("path: nonpositive value at index " + std::to_string(i));
        }
    }
}

SampledPath SampledPath::from_function(std::vector<double> times,
                                       const std::function<double(double)>& f, bool positive) {
    std::vector<double> v(times.size());
    std::transform(times.begin(), times.end(), v.begin(), f);
    return SampledPath(std::move(times), std::move(v), positive);
}

double SampledPath::at_time(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * values_[lo] + w * values_[hi];
}

SampledPath SampledPath::resampled(std::span<const double> times) const {
    std::vector<double> t(times.begin(), times.end());
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) v[i] = at_time(t[i]);
    return SampledPath(std::move(t), std::move(v), positive_);
}

SampledPath SampledPath::coarsened(std::size_t stride) const {
    if (stride == 0) throw InvalidArgument("coarsened: stride must be >= 1");
    std::vector<double> t;
    std::vector<double> v;
    for (std::size_t i = 0; i < times_.size(); i += stride) {
        t.push_back(times_[i]);
        v.push_back(values_[i]);
    }
    if (t.back() != times_.back()) {
        t.push_back(times_.back());
        v.push_back(values_.back());
    }
    return SampledPath(std::move(t), std::move(v), positive_);
}

std::vector<double> uniform_times(double horizon, std::size_t n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon) || n_steps == 0) {
        throw InvalidArgument("uniform_times: need horizon > 0 and n_steps >= 1");
    }
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    }
    t.back() = horizon;
    return t;
}

void validate_time_grid(std::span<const double> times, const char* what) {
    const std::string name(what);
    if (times.size() < 2) throw InvalidArgument(name + ": need at least two times");
    if (times.front() != 0.0) throw InvalidArgument(name + ": must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !(times[i] > times[i - 1])) {
            throw InvalidArgument(name + ": times must be finite and strictly increasing");
        }
    }
}

}  // namespace gprice
