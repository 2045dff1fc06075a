#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "gprice/errors.hpp"
#include "gprice/pde.hpp"
#include "hjb_engine.hpp"

namespace gprice {

namespace {

using detail::Coefficients;
using detail::HowardStepper;
using detail::OperatorFamily;
using detail::Sense;

constexpr double kWidthStdDevs = 8.0;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite");
}

// First and second central differences on a non-uniform grid.
struct Derivs {
    double d1;
    double d2;
};

Derivs nodal_derivs(std::span<const double> y, std::span<const double> v, std::size_t j) {
    const std::size_t n = y.size();
    if (j == 0) j = 1;
    if (j == n - 1) j = n - 2;
    const double hm = y[j] - y[j - 1];
    const double hp = y[j + 1] - y[j];
    const double hs = hm + hp;
    const double d1 = (-hp / (hm * hs)) * v[j - 1] + ((hp - hm) / (hm * hp)) * v[j] +
                      (hm / (hp * hs)) * v[j + 1];
    const double d2 = 2.0 * (v[j - 1] / (hm * hs) - v[j] / (hm * hp) + v[j + 1] / (hp * hs));
    return {d1, d2};
}

// Affine extension of the payoff at a domain end: phi(x) ~ a + b x, with b the
// one-sided slope taken from inside the domain.
struct Affine {
    double a;
    double b;
};

Affine payoff_asymptote(const ScalarFunction& phi, double x_end, int inward_side) {
    const double b = phi.slope(x_end, inward_side);
    return {phi(x_end) - b * x_end, b};
}

std::vector<double> time_grid(double horizon, std::size_t n_time) {
    std::vector<double> t(n_time + 1);
    for (std::size_t i = 0; i <= n_time; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_time);
    }
    t.back() = horizon;
    return t;
}

struct SpaceGrid {
    SpaceCoordinate coordinate;
    std::vector<double> coord;  // solver coordinate
    std::vector<double> nodes;  // price (or heat state) value at each node
};

SpaceGrid bsb_space_grid(const PricingProblem& p, const GridSpec& grid) {
    const double w = kWidthStdDevs * p.band.sigma_hi() * std::sqrt(p.maturity) +
                     std::abs(p.rate) * p.maturity;
    std::vector<double> anchors;
    for (double k : p.payoff.kinks()) {
        if (k > 0.0) anchors.push_back(k);
    }
    anchors.push_back(p.spot);

    SpaceGrid g;
    if (grid.stretching == Stretching::uniform_log) {
        g.coordinate = SpaceCoordinate::log_price;
        double lo = std::log(p.spot) - w;
        double hi = std::log(p.spot) + w;
        if (p.x_min > 0.0) lo = std::min(lo, std::log(p.x_min));
        hi = std::max(hi, std::log(p.x_max));
        std::vector<double> log_anchors;
        std::vector<double> exact;
        for (double a : anchors) {
            const double la = std::log(a);
            if (la > lo && la < hi) {
                log_anchors.push_back(la);
                exact.push_back(a);
            }
        }
        g.coord = detail::piecewise_uniform_nodes(lo, hi, log_anchors, grid.n_space);
        g.nodes.resize(g.coord.size());
        for (std::size_t j = 0; j < g.coord.size(); ++j) g.nodes[j] = std::exp(g.coord[j]);
        // Anchor nodes carry the exact price so the payoff kink is sampled exactly.
        for (std::size_t k = 0; k < log_anchors.size(); ++k) {
            const auto it = std::lower_bound(g.coord.begin(), g.coord.end(), log_anchors[k]);
            if (it != g.coord.end() && *it == log_anchors[k]) {
                g.nodes[static_cast<std::size_t>(it - g.coord.begin())] = exact[k];
            }
        }
    } else {
        g.coordinate = SpaceCoordinate::price;
        const double lo = std::max(0.0, std::min(p.x_min, p.spot * std::exp(-w)));
        const double hi = std::max(p.x_max, p.spot * std::exp(w));
        std::vector<double> inside;
        for (double a : anchors) {
            if (a > lo && a < hi) inside.push_back(a);
        }
        g.coord = detail::piecewise_uniform_nodes(lo, hi, inside, grid.n_space);
        g.nodes = g.coord;
    }
    return g;
}

std::string diagnostics(const SpaceGrid& g, const GridSpec& grid, const std::string& extra) {
    std::ostringstream os;
    os << "n_space=" << grid.n_space << " n_time=" << grid.n_time
       << " x_range=[" << g.nodes.front() << "," << g.nodes.back() << "] " << extra;
    return os.str();
}

// Backward solve of u_t + opt_sigma L_sigma u = 0 on [0, T].
PriceSurface solve_bsb(const PricingProblem& p, const GridSpec& grid, SurfaceSide side) {
    p.validate();
    grid.validate();
    const SpaceGrid g = bsb_space_grid(p, grid);
    const std::size_t n = g.coord.size();

    std::vector<double> sigmas{p.band.sigma_hi()};
    if (p.band.sigma_lo() < p.band.sigma_hi()) sigmas.push_back(p.band.sigma_lo());

    OperatorFamily family(n, sigmas.size());
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        const double s2 = sigmas[k] * sigmas[k];
        for (std::size_t j = 1; j + 1 < n; ++j) {
            Coefficients c{};
            if (g.coordinate == SpaceCoordinate::log_price) {
                // The drift r - a moves with the diffusion a, so the floor is
                // applied to a itself; then both depend on sigma through a
                // nondecreasing function and a wider band can only widen prices.
                const double hm = g.coord[j] - g.coord[j - 1];
                const double hp = g.coord[j + 1] - g.coord[j];
                double a = 0.5 * s2;
                if (hm < 2.0) {
                    a = std::max({a, p.rate * hp / (2.0 + hp), -p.rate * hm / (2.0 - hm)});
                }
                c = {p.rate - a, a, p.rate};
            } else {
                const double x = g.coord[j];
                c = {p.rate * x, 0.5 * s2 * x * x, p.rate};
            }
            family.at(k, j) =
                detail::assemble(c, g.coord[j] - g.coord[j - 1], g.coord[j + 1] - g.coord[j]);
        }
    }
    HowardStepper stepper(std::move(family),
                          side == SurfaceSide::ask ? Sense::maximize : Sense::minimize);

    const std::vector<double> times = time_grid(p.maturity, grid.n_time);
    const std::size_t nt = times.size();
    std::vector<double> values(nt * n);
    for (std::size_t j = 0; j < n; ++j) values[(nt - 1) * n + j] = p.payoff(g.nodes[j]);

    const Affine left = payoff_asymptote(p.payoff, g.nodes.front(), +1);
    const Affine right = payoff_asymptote(p.payoff, g.nodes.back(), -1);

    SolveStats stats;
    for (std::size_t i = nt - 1; i-- > 0;) {
        const double dt = times[i + 1] - times[i];
        const double disc = std::exp(-p.rate * (p.maturity - times[i]));
        const double lbc = left.a * disc + left.b * g.nodes.front();
        const double ubc = right.a * disc + right.b * g.nodes.back();
        std::span<const double> rhs(values.data() + (i + 1) * n, n);
        std::span<double> out(values.data() + i * n, n);
        try {
            const auto rep = stepper.step(rhs, dt, lbc, ubc, out);
            ++stats.steps;
            stats.policy_iterations += rep.iterations;
            stats.max_iterations_per_step = std::max(stats.max_iterations_per_step, rep.iterations);
            stats.max_residual = std::max(stats.max_residual, rep.residual);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(e.what(),
                                   diagnostics(g, grid, "t=" + std::to_string(times[i]) + " " +
                                                            e.diagnostics()));
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericalFailure("non-finite value in price surface", diagnostics(g, grid, ""));
        }
    }
    return PriceSurface(side, g.coordinate, times, g.nodes, std::move(values), p.band, p.rate,
                        p.payoff, stats);
}

}  // namespace

void PricingProblem::validate() const {
    require_finite(maturity, "maturity");
    require_finite(rate, "rate");
    require_finite(x_min, "x_min");
    require_finite(x_max, "x_max");
    require_finite(spot, "spot");
    if (!(maturity > 0.0)) throw InvalidArgument("maturity must be > 0");
    if (!(x_min >= 0.0)) throw InvalidArgument("spot_domain: x_min must be >= 0");
    if (!(x_min < x_max)) throw InvalidArgument("spot_domain: x_min must be < x_max");
    if (!(spot > 0.0) || spot < x_min || spot > x_max) {
        throw InvalidArgument("spot must be positive and inside spot_domain");
    }
    if (!payoff.nonnegative_on(x_min, x_max)) {
        throw InvalidArgument("payoff must be nonnegative on spot_domain");
    }
}

const char* to_string(SurfaceSide side) {
    switch (side) {
        case SurfaceSide::ask: return "ask";
        case SurfaceSide::bid: return "bid";
        case SurfaceSide::heat: return "heat";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// PriceSurface

PriceSurface::PriceSurface(SurfaceSide side, SpaceCoordinate coordinate, std::vector<double> times,
                           std::vector<double> nodes, std::vector<double> values,
                           UncertaintyBand band, double rate, std::optional<ScalarFunction> payoff,
                           SolveStats stats)
    : side_(side),
      coordinate_(coordinate),
      times_(std::move(times)),
      nodes_(std::move(nodes)),
      values_(std::move(values)),
      band_(band),
      rate_(rate),
      payoff_(std::move(payoff)),
      stats_(stats) {
    if (times_.size() < 2 || nodes_.size() < 3) {
        throw InvalidArgument("PriceSurface needs >= 2 times and >= 3 space nodes");
    }
    if (values_.size() != times_.size() * nodes_.size()) {
        throw InvalidArgument("PriceSurface values size mismatch");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) throw InvalidArgument("times must increase");
    }
    for (std::size_t j = 1; j < nodes_.size(); ++j) {
        if (!(nodes_[j] > nodes_[j - 1])) throw InvalidArgument("space nodes must increase");
    }
    if (coordinate_ == SpaceCoordinate::log_price && !(nodes_.front() > 0.0)) {
        throw InvalidArgument("log-price surface needs positive nodes");
    }
    coord_.resize(nodes_.size());
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        coord_[j] = coordinate_ == SpaceCoordinate::log_price ? std::log(nodes_[j]) : nodes_[j];
    }
}

std::span<const double> PriceSurface::slice(std::size_t time_index) const {
    if (time_index >= times_.size()) throw InvalidArgument("time index out of range");
    return {values_.data() + time_index * nodes_.size(), nodes_.size()};
}

double PriceSurface::at(std::size_t time_index, std::size_t node_index) const {
    if (time_index >= times_.size() || node_index >= nodes_.size()) {
        throw InvalidArgument("surface index out of range");
    }
    return values_[time_index * nodes_.size() + node_index];
}

PriceSurface::Bracket PriceSurface::time_bracket(double t) const {
    if (!std::isfinite(t) || t < times_.front() - 1e-12 || t > times_.back() + 1e-12) {
        throw InvalidArgument("time outside surface horizon");
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    hi = std::clamp<std::size_t>(hi, 1, times_.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
    return {lo, w};
}

PriceSurface::Bracket PriceSurface::space_bracket(double x) const {
    if (!std::isfinite(x) || !contains(x)) throw InvalidArgument("point outside surface domain");
    const double y = coordinate_ == SpaceCoordinate::log_price ? std::log(x) : x;
    const auto it = std::upper_bound(coord_.begin(), coord_.end(), y);
    std::size_t hi = static_cast<std::size_t>(it - coord_.begin());
    hi = std::clamp<std::size_t>(hi, 1, coord_.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = std::clamp((y - coord_[lo]) / (coord_[hi] - coord_[lo]), 0.0, 1.0);
    return {lo, w};
}

double PriceSurface::nodal_delta(std::size_t ti, std::size_t j) const {
    const Derivs d = nodal_derivs(coord_, slice(ti), j);
    return coordinate_ == SpaceCoordinate::log_price ? d.d1 / nodes_[j] : d.d1;
}

double PriceSurface::nodal_curvature(std::size_t ti, std::size_t j) const {
    const Derivs d = nodal_derivs(coord_, slice(ti), j);
    if (coordinate_ == SpaceCoordinate::log_price) {
        // x^2 u_xx = u_yy - u_y with y = log x.
        const double xsq_uxx = d.d2 - d.d1;
        return side_ == SurfaceSide::heat ? xsq_uxx / (nodes_[j] * nodes_[j]) : xsq_uxx;
    }
    return side_ == SurfaceSide::heat ? d.d2 : nodes_[j] * nodes_[j] * d.d2;
}

double PriceSurface::value(double t, double x) const {
    const Bracket tb = time_bracket(t);
    const Bracket xb = space_bracket(x);
    const auto row = [&](std::size_t ti) {
        return (1.0 - xb.w) * at(ti, xb.lo) + xb.w * at(ti, xb.lo + 1);
    };
    return (1.0 - tb.w) * row(tb.lo) + tb.w * row(tb.lo + 1);
}

double PriceSurface::delta(double t, double x) const {
    const Bracket tb = time_bracket(t);
    const Bracket xb = space_bracket(x);
    const auto row = [&](std::size_t ti) {
        return (1.0 - xb.w) * nodal_delta(ti, xb.lo) + xb.w * nodal_delta(ti, xb.lo + 1);
    };
    return (1.0 - tb.w) * row(tb.lo) + tb.w * row(tb.lo + 1);
}

double PriceSurface::curvature(double t, double x) const {
    const Bracket tb = time_bracket(t);
    const Bracket xb = space_bracket(x);
    const auto row = [&](std::size_t ti) {
        return (1.0 - xb.w) * nodal_curvature(ti, xb.lo) + xb.w * nodal_curvature(ti, xb.lo + 1);
    };
    return (1.0 - tb.w) * row(tb.lo) + tb.w * row(tb.lo + 1);
}

// ---------------------------------------------------------------------------
// Solvers

PriceSurface solve_bsb_ask(const PricingProblem& problem, const GridSpec& grid) {
    return solve_bsb(problem, grid, SurfaceSide::ask);
}

PriceSurface solve_bsb_bid(const PricingProblem& problem, const GridSpec& grid) {
    return solve_bsb(problem, grid, SurfaceSide::bid);
}

BidAskSurfaces solve_bsb_pair(const PricingProblem& problem, const GridSpec& grid) {
    BidAskSurfaces out{solve_bsb_ask(problem, grid), solve_bsb_bid(problem, grid)};
    const std::size_t nt = out.ask.times().size();
    const std::size_t nx = out.ask.space_nodes().size();
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nx; ++j) {
            const double a = out.ask.at(i, j);
            const double b = out.bid.at(i, j);
            if (a < b - 1e-9 * (1.0 + std::abs(a))) {
                std::ostringstream os;
                os << "ask below bid at t=" << out.ask.times()[i]
                   << " x=" << out.ask.space_nodes()[j] << " (" << a << " < " << b << ")";
                throw ConsistencyFailure(os.str());
            }
        }
    }
    return out;
}

PriceSurface solve_g_heat(const ScalarFunction& phi, const UncertaintyBand& band, double horizon,
                          const GridSpec& grid) {
    require_finite(horizon, "horizon");
    if (!(horizon > 0.0)) throw InvalidArgument("solve_g_heat requires horizon > 0");
    grid.validate();

    const double drift_span = std::max(std::abs(band.mu_lo()), std::abs(band.mu_hi())) * horizon;
    const double w = kWidthStdDevs * band.sigma_hi() * std::sqrt(horizon) + drift_span;
    std::vector<double> anchors{0.0};
    for (double k : phi.kinks()) {
        if (k > -w && k < w) anchors.push_back(k);
    }
    const std::vector<double> x = detail::piecewise_uniform_nodes(-w, w, anchors, grid.n_space);
    const std::size_t n = x.size();

    // (mu, sigma) corners of the band; the G-function is attained at one of them.
    std::vector<std::pair<double, double>> controls;
    for (double s : {band.sigma_hi(), band.sigma_lo()}) {
        for (double m : {band.mu_hi(), band.mu_lo()}) {
            if (std::find(controls.begin(), controls.end(), std::make_pair(m, s)) ==
                controls.end()) {
                controls.emplace_back(m, s);
            }
        }
    }
    OperatorFamily family(n, controls.size());
    for (std::size_t k = 0; k < controls.size(); ++k) {
        const auto [m, s] = controls[k];
        for (std::size_t j = 1; j + 1 < n; ++j) {
            family.at(k, j) =
                detail::assemble({m, 0.5 * s * s, 0.0}, x[j] - x[j - 1], x[j + 1] - x[j]);
        }
    }
    HowardStepper stepper(std::move(family), Sense::maximize);

    const std::vector<double> times = time_grid(horizon, grid.n_time);
    const std::size_t nt = times.size();
    std::vector<double> values(nt * n);
    for (std::size_t j = 0; j < n; ++j) values[j] = phi(x[j]);

    const auto edge_rate = [&](double xe, int side) {
        return g_drift_vol(phi.slope(xe, side), phi.second_derivative(xe), band);
    };
    const double left_rate = edge_rate(x.front(), +1);
    const double right_rate = edge_rate(x.back(), -1);

    SolveStats stats;
    SpaceGrid g{SpaceCoordinate::price, x, x};
    for (std::size_t i = 1; i < nt; ++i) {
        const double dt = times[i] - times[i - 1];
        const double lbc = values[0] + times[i] * left_rate;
        const double ubc = values[n - 1] + times[i] * right_rate;
        std::span<const double> rhs(values.data() + (i - 1) * n, n);
        std::span<double> out(values.data() + i * n, n);
        try {
            const auto rep = stepper.step(rhs, dt, lbc, ubc, out);
            ++stats.steps;
            stats.policy_iterations += rep.iterations;
            stats.max_iterations_per_step = std::max(stats.max_iterations_per_step, rep.iterations);
            stats.max_residual = std::max(stats.max_residual, rep.residual);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(e.what(),
                                   diagnostics(g, grid, "t=" + std::to_string(times[i]) + " " +
                                                            e.diagnostics()));
        }
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericalFailure("non-finite value in heat surface", diagnostics(g, grid, ""));
        }
    }
    return PriceSurface(SurfaceSide::heat, SpaceCoordinate::price, times, x, std::move(values),
                        band, 0.0, phi, stats);
}

double black_scholes_closed_form(double spot, double strike, double r, double sigma, double T,
                                 OptionKind kind) {
    for (double v : {spot, strike, r, sigma, T}) require_finite(v, "black_scholes input");
    if (!(spot > 0.0) || !(strike > 0.0) || !(sigma > 0.0) || !(T > 0.0)) {
        throw InvalidArgument("black_scholes_closed_form: spot, strike, sigma, T must be > 0");
    }
    const double sd = sigma * std::sqrt(T);
    const double d1 = (std::log(spot / strike) + (r + 0.5 * sigma * sigma) * T) / sd;
    const double d2 = d1 - sd;
    const auto ncdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double df = std::exp(-r * T);
    if (kind == OptionKind::call) return spot * ncdf(d1) - strike * df * ncdf(d2);
    return strike * df * ncdf(-d2) - spot * ncdf(-d1);
}

}  // namespace gprice
