#pragma once

// Consistent price systems for sampled positive price paths.
//
// The shadow path is anchored at the stopping times tau_n, where it equals the
// retirement-walk level X_n. Between anchors the ratio S~/S is interpolated
// geometrically in time, which keeps S~ continuous and positive and keeps the
// ratio between the bounds reached at the anchors. After the last anchor S~
// is frozen at X_N.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gprice/grid.hpp"
#include "gprice/path.hpp"
#include "gprice/pde.hpp"

namespace gprice {

struct StoppingTimes {
    /// Indices of tau_1, tau_2, ...; tau_0 = 0 is implicit. The last entry is
    /// always the horizon index, with sign 0.
    std::vector<std::size_t> tau_indices;
    std::vector<int> signs;
    /// |log(S_tau_n / S_tau_{n-1})| - log(1 + eps) for each crossing; 0 at the
    /// horizon entry.
    std::vector<double> overshoot;
};

/// Scans up to `horizon_index` (default: last sample).
StoppingTimes extract_stopping_times(const SampledPath& path, double eps,
                                     std::optional<std::size_t> horizon_index = std::nullopt);

/// X_n = X0 (1 + eps)^(R_1 + ... + R_n), computed from integer partial sums.
/// Throws InvalidArgument on a nonzero sign after a zero.
std::vector<double> retirement_walk(std::span<const int> signs, double x0, double eps);

struct Crossing {
    std::size_t index;
    double time;
    int sign;
    double level;
    double overshoot;
};

class ConsistentPriceSystem {
public:
    ConsistentPriceSystem(double epsilon, StoppingTimes stops, std::vector<double> levels,
                          SampledPath shadow, SampledPath source);

    double epsilon() const noexcept { return epsilon_; }
    std::span<const std::size_t> tau_indices() const noexcept { return stops_.tau_indices; }
    std::span<const int> signs() const noexcept { return stops_.signs; }
    std::span<const double> levels() const noexcept { return levels_; }
    std::span<const double> overshoot() const noexcept { return stops_.overshoot; }
    const SampledPath& shadow() const noexcept { return shadow_; }
    const SampledPath& source() const noexcept { return source_; }

    std::vector<Crossing> crossings() const;
    double min_ratio() const noexcept { return min_ratio_; }
    double max_ratio() const noexcept { return max_ratio_; }
    /// (1+eps)^-3 <= S~/S <= (1+eps)^3 at every grid time.
    bool sandwich_ok() const noexcept;

private:
    double epsilon_;
    StoppingTimes stops_;
    std::vector<double> levels_;
    SampledPath shadow_;
    SampledPath source_;
    double min_ratio_ = 1.0;
    double max_ratio_ = 1.0;
};

/// Throws ConsistencyFailure if the constructed shadow path breaks the
/// sandwich bound. `horizon` truncates the scan; S~ is frozen after it.
ConsistentPriceSystem build_shadow_path(const SampledPath& path, double eps,
                                        std::optional<double> horizon = std::nullopt);

struct DeltaDiagnostics {
    SampledPath delta1;              // S / S~ - 1 at every grid time
    std::vector<double> step_times;  // left end of each step
    std::vector<double> delta2;      // dS / (2 dS~); NaN where dS~ = 0
    std::size_t flagged_steps = 0;
    double delta1_within = 0.0;  // fraction of times with |delta1| <= eps
    double delta2_within = 0.0;  // fraction of defined steps with |delta2| <= 2 eps
};

DeltaDiagnostics delta_processes(const ConsistentPriceSystem& cps);

struct PriceInterval {
    double value;
    double lower;
    double upper;
};

struct CpsPrice {
    PriceInterval ask;
    PriceInterval bid;
    double shadow_spot;
    ConsistentPriceSystem cps;
};

/// Builds the eps-CPS on [0, maturity], solves the bid/ask equations with the
/// problem's band and reads them at S~_0. Each interval is
/// [v (1+eps)^-3, v (1+eps)^3].
CpsPrice cps_price(const SampledPath& path, const PricingProblem& problem, double eps,
                   const GridSpec& grid);

}  // namespace gprice
