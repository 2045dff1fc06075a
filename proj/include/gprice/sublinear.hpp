#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gprice/grid.hpp"

namespace gprice {

/// Drift interval [mu_lo, mu_hi] and volatility interval [sigma_lo, sigma_hi]
/// of the sublinear model. Every sublinear object in the library is
/// parameterised by one of these.
class UncertaintyBand {
public:
    UncertaintyBand(double mu_lo, double mu_hi, double sigma_lo, double sigma_hi);

    /// Zero drift interval; the band of a G-Brownian motion.
    static UncertaintyBand volatility(double sigma_lo, double sigma_hi);

    /// Human-readable invariant violations; empty when the four numbers form a
    /// valid band. Field names are prefixed with `path`.
    static std::vector<std::string> violations(double mu_lo, double mu_hi, double sigma_lo,
                                               double sigma_hi, const std::string& path = "band");

    double mu_lo() const noexcept { return mu_lo_; }
    double mu_hi() const noexcept { return mu_hi_; }
    double sigma_lo() const noexcept { return sigma_lo_; }
    double sigma_hi() const noexcept { return sigma_hi_; }

    bool contains_sigma(double sigma, double tol = 1e-12) const noexcept;
    bool contains_mu(double mu, double tol = 1e-12) const noexcept;

    /// Same volatility interval with the drift interval collapsed to {0}.
    UncertaintyBand without_drift() const;

    bool operator==(const UncertaintyBand&) const = default;

private:
    double mu_lo_;
    double mu_hi_;
    double sigma_lo_;
    double sigma_hi_;
};

enum class Curvature { linear, convex, concave, mixed };

/// Closed family of Lipschitz test functions and payoffs.
///
/// The function value is `scale * base(x)`; `negated()` flips the scale so that
/// lower expectations can be written as -E[-phi] without a second code path.
class ScalarFunction {
public:
    enum class Kind { call, put, identity, negation, power, piecewise_linear, table };

    struct Knot {
        double x;
        double y;
        bool operator==(const Knot&) const = default;
    };

    static ScalarFunction call(double strike);
    static ScalarFunction put(double strike);
    static ScalarFunction identity();
    static ScalarFunction negation();
    /// x^p for p >= 1. Non-integer p is defined only for x >= 0.
    static ScalarFunction power(double exponent);
    /// Linear interpolation through strictly increasing knots, extended
    /// linearly with the end slopes.
    static ScalarFunction piecewise_linear(std::vector<Knot> knots);
    /// Uniform samples y_k at x0 + k*dx, linearly interpolated and held
    /// constant outside [x0, x0 + (n-1)*dx].
    static ScalarFunction table(double x0, double dx, std::vector<double> samples);
    /// Long-short butterfly with wings at lo, hi and peak at mid.
    static ScalarFunction butterfly(double lo, double mid, double hi);
    static ScalarFunction zero();

    double operator()(double x) const;

    /// One-sided derivative; side < 0 takes the left limit, side >= 0 the right.
    double slope(double x, int side) const;
    /// Second derivative away from kinks (zero for piecewise-linear kinds).
    double second_derivative(double x) const;

    ScalarFunction negated() const;
    ScalarFunction scaled(double factor) const;

    /// Abscissae where the function is not differentiable.
    std::vector<double> kinks() const;

    Curvature curvature_on(double lo, double hi) const;
    double lipschitz_on(double lo, double hi) const;
    bool nonnegative_on(double lo, double hi) const;

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double parameter() const noexcept { return parameter_; }
    const std::vector<Knot>& knots() const noexcept { return knots_; }
    double table_x0() const noexcept { return x0_; }
    double table_dx() const noexcept { return dx_; }
    const std::vector<double>& samples() const noexcept { return samples_; }

    std::string describe() const;

    bool operator==(const ScalarFunction&) const = default;

private:
    ScalarFunction(Kind kind, double parameter) : kind_(kind), parameter_(parameter) {}

    double base(double x) const;
    double base_slope(double x, int side) const;

    Kind kind_;
    double parameter_ = 0.0;
    double scale_ = 1.0;
    std::vector<Knot> knots_;
    double x0_ = 0.0;
    double dx_ = 0.0;
    std::vector<double> samples_;
};

const char* to_string(ScalarFunction::Kind kind);

/// Sublinear volatility generator: 1/2 (sigma_hi^2 a^+ - sigma_lo^2 a^-).
double g_vol(double alpha, const UncertaintyBand& band);

/// Drift-and-volatility generator:
/// (mu_hi e^+ - mu_lo e^-) + 1/2 (sigma_hi^2 a^+ - sigma_lo^2 a^-).
double g_drift_vol(double eta, double alpha, const UncertaintyBand& band);

struct UpperLower {
    double upper;
    double lower;
};

/// Sublinear expectation of phi(X) for X maximal-distributed on [lo, hi]:
/// the maximum of phi on the interval. Dense scan followed by golden-section
/// refinement around the best scan cell.
double maximal_expectation(const ScalarFunction& phi, double lo, double hi,
                           std::size_t scan_points = 1024);

/// Upper and lower (-E[-phi]) maximal expectations.
UpperLower maximal_bounds(const ScalarFunction& phi, double lo, double hi);

/// E[phi(X)] for X ~ N({0}, [sigma_lo^2 t, sigma_hi^2 t]), evaluated as u(t, 0)
/// of the G-heat equation started from phi. The band's drift interval is
/// ignored.
double g_normal_expectation(const ScalarFunction& phi, const UncertaintyBand& band, double t);
double g_normal_expectation(const ScalarFunction& phi, const UncertaintyBand& band, double t,
                            const GridSpec& grid);

UpperLower g_normal_bounds(const ScalarFunction& phi, const UncertaintyBand& band, double t);

}  // namespace gprice
