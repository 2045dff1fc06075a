#pragma once

// Classical scenarios of the sublinear model: controls, simulated paths,
// deflated Monte Carlo prices and pathwise diagnostics.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gprice/path.hpp"
#include "gprice/pde.hpp"
#include "gprice/sublinear.hpp"

namespace gprice {

/// Piecewise-constant (sigma, mu). Level k applies on
/// [breakpoints[k], breakpoints[k+1]); the last level extends indefinitely.
class ControlProcess {
public:
    ControlProcess(std::vector<double> breakpoints, std::vector<double> sigma_levels,
                   std::vector<double> mu_levels, std::string id = {});

    static ControlProcess constant(double sigma, double mu, std::string id = {});

    std::span<const double> breakpoints() const noexcept { return breakpoints_; }
    std::span<const double> sigma_levels() const noexcept { return sigma_; }
    std::span<const double> mu_levels() const noexcept { return mu_; }
    const std::string& id() const noexcept { return id_; }

    std::size_t interval(double t) const;
    double sigma_at(double t) const { return sigma_[interval(t)]; }
    double mu_at(double t) const { return mu_[interval(t)]; }

    /// Throws InvalidArgument naming the offending level.
    void check_band(const UncertaintyBand& band) const;
    /// Throws InvalidArgument unless every breakpoint inside the grid's span
    /// coincides with a grid time.
    void check_alignment(std::span<const double> grid) const;

private:
    std::vector<double> breakpoints_;
    std::vector<double> sigma_;
    std::vector<double> mu_;
    std::string id_;
};

/// State feedback sigma(t, x) read off the sign of the discrete curvature of a
/// pricing surface: the maximising volatility for an ask surface, the
/// minimising one for a bid surface. Drift is held at `mu`.
class FeedbackRule {
public:
    FeedbackRule(std::shared_ptr<const PriceSurface> surface, double mu, std::string id = {});

    double sigma(double t, double x) const;
    double mu() const noexcept { return mu_; }
    const std::string& id() const noexcept { return id_; }
    const PriceSurface& surface() const noexcept { return *surface_; }

private:
    std::shared_ptr<const PriceSurface> surface_;
    double mu_;
    std::string id_;
};

using Scenario = std::variant<ControlProcess, FeedbackRule>;

const std::string& scenario_id(const Scenario& s);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::string control_id;
};

struct McAskBid {
    McEstimate ask;
    McEstimate bid;
    std::vector<McEstimate> per_scenario;
};

/// Driving G-Brownian scenario B with B_0 = 0 and independent increments
/// N(0, sigma_i^2 dt_i). Path p uses RandomStream(seed, p).
std::vector<SampledPath> simulate_gbm_increments(const ControlProcess& control,
                                                 const UncertaintyBand& band,
                                                 std::span<const double> grid,
                                                 std::uint64_t seed, std::size_t n_paths);

/// Asset paths S_{i+1} = S_i exp((mu_i - sigma_i^2/2) dt + dB_i). The driving
/// normals are those of simulate_gbm_increments with the same seed.
std::vector<SampledPath> simulate_asset_paths(const Scenario& scenario,
                                              const UncertaintyBand& band, double s0,
                                              std::span<const double> grid, std::uint64_t seed,
                                              std::size_t n_paths);

/// One asset path together with the driving B path and the realised levels.
struct ScenarioSample {
    SampledPath asset;
    SampledPath driver;
    std::vector<double> sigma;  // per step
    std::vector<double> mu;     // per step
};

ScenarioSample simulate_scenario_path(const Scenario& scenario, double s0,
                                      std::span<const double> grid, std::uint64_t seed,
                                      std::uint64_t path_index);

/// H_t = exp(-[r t + sum lambda_i dB_i / sigma_i + 1/2 sum lambda_i^2 dt_i]) with
/// lambda = (mu - r) / sigma, so that H S is a martingale under every control.
/// Throws SingularControl where sigma_i = 0 and mu_i != r.
SampledPath deflator_path(const ControlProcess& control, double r, std::span<const double> grid,
                          const SampledPath& driving);

/// Deflated Monte Carlo E[H_T phi(S_T)] per scenario with common random
/// numbers; ask is the maximum over scenarios, bid the minimum.
McAskBid mc_ask_bid(const PricingProblem& problem, const std::vector<Scenario>& scenarios,
                    std::span<const double> grid, std::uint64_t seed, std::size_t n_paths);

/// Constant controls on a sigma_points x mu_points lattice of the band.
/// Zero-volatility controls with mu != r are skipped (singular deflator).
std::vector<ControlProcess> default_control_family(const UncertaintyBand& band, double r,
                                                   std::size_t sigma_points = 9,
                                                   std::size_t mu_points = 3);

/// Bang-bang rule from the curvature sign of an ask or bid surface.
FeedbackRule bang_bang_control_from_surface(std::shared_ptr<const PriceSurface> surface,
                                            std::optional<double> mu = std::nullopt);

struct CapacityEstimate {
    double capacity = 0.0;
    std::string control_id;
    std::vector<double> per_scenario;
};

/// Largest empirical fraction of paths (over scenarios) staying strictly
/// within eta of `center` at every grid time. Paths start at center(0).
CapacityEstimate estimate_tube_capacity(const SampledPath& center, double eta,
                                        const UncertaintyBand& band,
                                        const std::vector<Scenario>& scenarios,
                                        std::uint64_t seed, std::size_t n_paths);

struct HolderEstimate {
    double exponent = 1.0;     // clamped to (0, 1]
    double raw_slope = 1.0;
    double r_squared = 1.0;
    std::size_t n_scales = 0;
    bool zero_variation = false;
};

/// Regression of log max-increment on log scale over dyadic coarsenings. The
/// max over n increments is divided by the expected max of n independent
/// half-normals so that the count of increments does not bias the slope.
HolderEstimate holder_exponent(const SampledPath& path);

struct RsLevel {
    std::size_t stride;
    double mesh;
    double value;
};

struct RsResult {
    double value = 0.0;
    std::vector<RsLevel> levels;  // finest first
    /// |value(level k) - value(level k+1)|, finest first.
    std::vector<double> differences;
    /// Least-squares slope of log difference against log mesh over the
    /// nonzero differences.
    std::optional<double> convergence_rate;
    /// Finest difference no larger than the coarsest and a positive rate.
    bool differences_decreasing = true;
    std::optional<double> holder_sum;
    bool young_violation = false;
};

/// Left-endpoint sum of integrand d(integrator). The integrand is resampled
/// onto the integrator's grid when the grids differ.
RsResult riemann_stieltjes(const SampledPath& integrand, const SampledPath& integrator);

struct HedgeResult {
    SampledPath wealth;
    SampledPath cost;
    SampledPath holdings;
    double terminal_shortfall = 0.0;
    /// Magnitude of the most negative cost increment; 0 if C never decreases.
    double cost_monotonicity_violation = 0.0;
};

/// Self-financing delta hedge of the surface's claim along `asset_path`.
/// Throws DomainExit if the path leaves the surface domain.
HedgeResult hedge_verify(const PriceSurface& surface, const SampledPath& asset_path, double r);

}  // namespace gprice
