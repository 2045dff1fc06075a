#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gprice/grid.hpp"
#include "gprice/sublinear.hpp"

namespace gprice {

/// European claim phi(S_T) on a single asset under a drift/volatility band.
struct PricingProblem {
    ScalarFunction payoff;
    double maturity;
    double rate;
    UncertaintyBand band;
    double x_min;
    double x_max;
    /// Reference spot; prices are quoted here and the grid is centred on it.
    double spot;

    void validate() const;
};

enum class SurfaceSide { ask, bid, heat };
enum class SpaceCoordinate { log_price, price };

const char* to_string(SurfaceSide side);

struct SolveStats {
    std::size_t steps = 0;
    std::size_t policy_iterations = 0;
    std::size_t max_iterations_per_step = 0;
    double max_residual = 0.0;
};

/// Discretised solution u(t, x) of a pricing or G-heat equation.
///
/// `times` increase. For ask/bid surfaces they run from 0 to the maturity and
/// the last slice is the payoff; for heat surfaces they run forward from the
/// initial condition at t = 0. Values are stored row-major, one row per time.
class PriceSurface {
public:
    PriceSurface(SurfaceSide side, SpaceCoordinate coordinate, std::vector<double> times,
                 std::vector<double> nodes, std::vector<double> values, UncertaintyBand band,
                 double rate, std::optional<ScalarFunction> payoff, SolveStats stats);

    SurfaceSide side() const noexcept { return side_; }
    SpaceCoordinate coordinate() const noexcept { return coordinate_; }
    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> space_nodes() const noexcept { return nodes_; }
    std::span<const double> slice(std::size_t time_index) const;
    double at(std::size_t time_index, std::size_t node_index) const;

    const UncertaintyBand& band() const noexcept { return band_; }
    double rate() const noexcept { return rate_; }
    const std::optional<ScalarFunction>& payoff() const noexcept { return payoff_; }
    const SolveStats& stats() const noexcept { return stats_; }

    double x_min() const noexcept { return nodes_.front(); }
    double x_max() const noexcept { return nodes_.back(); }
    double horizon() const noexcept { return times_.back(); }
    bool contains(double x) const noexcept { return x >= x_min() && x <= x_max(); }

    /// Bilinear interpolation; linear in the solver's space coordinate.
    double value(double t, double x) const;
    /// Spatial derivative du/dx from nodal central differences.
    double delta(double t, double x) const;
    /// Sign-carrying curvature x^2 u_xx (ask/bid) or u_xx (heat) in the same
    /// discrete form the solver uses to pick the active volatility.
    double curvature(double t, double x) const;

private:
    struct Bracket {
        std::size_t lo;
        double w;
    };
    Bracket time_bracket(double t) const;
    Bracket space_bracket(double x) const;
    double nodal_delta(std::size_t ti, std::size_t j) const;
    double nodal_curvature(std::size_t ti, std::size_t j) const;

    SurfaceSide side_;
    SpaceCoordinate coordinate_;
    std::vector<double> times_;
    std::vector<double> nodes_;
    std::vector<double> coord_;  // solver coordinate of each node (log x or x)
    std::vector<double> values_;
    UncertaintyBand band_;
    double rate_;
    std::optional<ScalarFunction> payoff_;
    SolveStats stats_;
};

/// Upper (ask) price surface of the uncertain-volatility pricing equation
///   u_t + r x u_x + G(x^2 u_xx) - r u = 0,   u(T, x) = phi(x).
PriceSurface solve_bsb_ask(const PricingProblem& problem, const GridSpec& grid);

/// Lower (bid) price surface: u_t + r x u_x - G(-x^2 u_xx) - r u = 0.
PriceSurface solve_bsb_bid(const PricingProblem& problem, const GridSpec& grid);

struct BidAskSurfaces {
    PriceSurface ask;
    PriceSurface bid;
};

/// Both sides on the same grid; throws ConsistencyFailure if ask < bid at any
/// node beyond round-off.
BidAskSurfaces solve_bsb_pair(const PricingProblem& problem, const GridSpec& grid);

/// Forward G-heat equation u_t = G(u_x, u_xx), u(0, x) = phi(x), on an
/// arithmetic grid centred at 0 wide enough for 8 standard deviations plus
/// the drift span.
PriceSurface solve_g_heat(const ScalarFunction& phi, const UncertaintyBand& band, double horizon,
                          const GridSpec& grid);

enum class OptionKind { call, put };

/// Closed-form Black-Scholes value; used as a test and report oracle.
double black_scholes_closed_form(double spot, double strike, double r, double sigma, double T,
                                 OptionKind kind);

}  // namespace gprice
