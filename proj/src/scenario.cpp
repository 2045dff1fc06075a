#include "gprice/scenario.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "gprice/errors.hpp"
#include "gprice/random.hpp"

namespace gprice {

namespace {

std::string level_id(double sigma, double mu) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "sigma=%.6g,mu=%.6g", sigma, mu);
    return buf;
}

void require_paths(std::size_t n_paths) {
    if (n_paths == 0) throw InvalidArgument("n_paths must be >= 1");
}

// Mean and standard error of a sample, summed in index order.
std::pair<double, double> mean_se(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    if (x.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

SampledPath deflator_from_levels(std::span<const double> grid, std::span<const double> sigma,
                                 std::span<const double> mu, double r,
                                 std::span<const double> driver) {
    const std::size_t n = grid.size();
    std::vector<double> h(n);
    h[0] = 1.0;
    // Market price of risk theta/sigma acts on the unit-variance driver dB/sigma,
    // so that H S is a martingale for every control.
    double risk = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double theta = mu[i] - r;
        const double dt = grid[i + 1] - grid[i];
        if (theta != 0.0) {
            if (sigma[i] == 0.0) {
                throw SingularControl("deflator: zero volatility with nonzero risk premium at t=" +
                                      std::to_string(grid[i]));
            }
            const double lambda = theta / sigma[i];
            const double dw = (driver[i + 1] - driver[i]) / sigma[i];
            risk += lambda * dw + 0.5 * lambda * lambda * dt;
        }
        h[i + 1] = std::exp(-(r * grid[i + 1] + risk));
    }
    return SampledPath(std::vector<double>(grid.begin(), grid.end()), std::move(h), true);
}

void check_scenario(const Scenario& s, const UncertaintyBand& band, std::span<const double> grid) {
    if (const auto* c = std::get_if<ControlProcess>(&s)) {
        c->check_band(band);
        c->check_alignment(grid);
    }
}

double expected_max_half_normal(std::size_t n) {
    static std::mutex m;
    static std::map<std::size_t, double> cache;
    {
        std::lock_guard<std::mutex> lock(m);
        const auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    const double dn = static_cast<double>(n);
    // E[max] = int_0^inf P(max > x) dx with P(|Z| <= x) = 1 - erfc(x / sqrt 2).
    const auto tail = [dn](double x) {
        const double q = std::erfc(x / std::sqrt(2.0));
        if (q >= 1.0) return 1.0;
        return -std::expm1(dn * std::log1p(-q));
    };
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(tail, 0.0, 40.0, 15, 1e-13);
    std::lock_guard<std::mutex> lock(m);
    cache.emplace(n, v);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// ControlProcess

ControlProcess::ControlProcess(std::vector<double> breakpoints, std::vector<double> sigma_levels,
                               std::vector<double> mu_levels, std::string id)
    : breakpoints_(std::move(breakpoints)),
      sigma_(std::move(sigma_levels)),
      mu_(std::move(mu_levels)),
      id_(std::move(id)) {
    if (breakpoints_.empty() || breakpoints_.size() != sigma_.size() ||
        sigma_.size() != mu_.size()) {
        throw InvalidArgument("control: breakpoints, sigma_levels and mu_levels must align");
    }
    if (breakpoints_.front() != 0.0) throw InvalidArgument("control: first breakpoint must be 0");
    for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
        if (!std::isfinite(breakpoints_[k]) || !std::isfinite(sigma_[k]) ||
            !std::isfinite(mu_[k])) {
            throw InvalidArgument("control: non-finite entry at level " + std::to_string(k));
        }
        if (k > 0 && !(breakpoints_[k] > breakpoints_[k - 1])) {
            throw InvalidArgument("control: breakpoints must increase");
        }
        if (sigma_[k] < 0.0) {
            throw InvalidArgument("control: sigma_levels[" + std::to_string(k) + "] < 0");
        }
    }
    if (id_.empty()) {
        id_ = sigma_.size() == 1 ? level_id(sigma_[0], mu_[0])
                                 : "piecewise(" + std::to_string(sigma_.size()) + ")";
    }
}

ControlProcess ControlProcess::constant(double sigma, double mu, std::string id) {
    return ControlProcess({0.0}, {sigma}, {mu}, std::move(id));
}

std::size_t ControlProcess::interval(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

void ControlProcess::check_band(const UncertaintyBand& band) const {
    for (std::size_t k = 0; k < sigma_.size(); ++k) {
        if (!band.contains_sigma(sigma_[k])) {
            throw InvalidArgument("control " + id_ + ": sigma_levels[" + std::to_string(k) +
                                  "] outside band");
        }
        if (!band.contains_mu(mu_[k])) {
            throw InvalidArgument("control " + id_ + ": mu_levels[" + std::to_string(k) +
                                  "] outside band");
        }
    }
}

void ControlProcess::check_alignment(std::span<const double> grid) const {
    for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
        const double b = breakpoints_[k];
        if (b >= grid.back()) break;
        const auto it = std::lower_bound(grid.begin(), grid.end(), b - 1e-12);
        if (it == grid.end() || std::abs(*it - b) > 1e-12) {
            throw InvalidArgument("control " + id_ + ": breakpoint " + std::to_string(b) +
                                  " is not a grid time");
        }
    }
}

// ---------------------------------------------------------------------------
// FeedbackRule

FeedbackRule::FeedbackRule(std::shared_ptr<const PriceSurface> surface, double mu, std::string id)
    : surface_(std::move(surface)), mu_(mu), id_(std::move(id)) {
    if (!surface_) throw InvalidArgument("feedback rule: null surface");
    if (surface_->side() == SurfaceSide::heat) {
        throw InvalidArgument("feedback rule needs an ask or bid surface");
    }
    if (surface_->space_nodes().size() < 3) {
        throw InvalidArgument("feedback rule: surface needs >= 3 space nodes");
    }
    if (!surface_->band().contains_mu(mu_)) throw InvalidArgument("feedback rule: mu outside band");
    if (id_.empty()) id_ = std::string("feedback(") + to_string(surface_->side()) + ")";
}

double FeedbackRule::sigma(double t, double x) const {
    const PriceSurface& s = *surface_;
    const double tc = std::clamp(t, s.times().front(), s.horizon());
    const double xc = std::clamp(x, s.x_min(), s.x_max());
    const double gamma = s.curvature(tc, xc);
    const double hi = s.band().sigma_hi();
    const double lo = s.band().sigma_lo();
    if (s.side() == SurfaceSide::ask) return gamma >= 0.0 ? hi : lo;
    return gamma > 0.0 ? lo : hi;
}

const std::string& scenario_id(const Scenario& s) {
    return std::visit([](const auto& v) -> const std::string& { return v.id(); }, s);
}

// ---------------------------------------------------------------------------
// Simulation

ScenarioSample simulate_scenario_path(const Scenario& scenario, double s0,
                                      std::span<const double> grid, std::uint64_t seed,
                                      std::uint64_t path_index) {
    if (!(s0 > 0.0) || !std::isfinite(s0)) throw InvalidArgument("S0 must be > 0");
    const std::size_t n = grid.size();
    RandomStream rng(seed, path_index);
    std::vector<double> s(n), b(n), sig(n - 1), mu(n - 1);
    s[0] = s0;
    b[0] = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dt = grid[i + 1] - grid[i];
        const double z = rng.normal();
        if (const auto* c = std::get_if<ControlProcess>(&scenario)) {
            const std::size_t k = c->interval(grid[i]);
            sig[i] = c->sigma_levels()[k];
            mu[i] = c->mu_levels()[k];
        } else {
            const auto& f = std::get<FeedbackRule>(scenario);
            sig[i] = f.sigma(grid[i], s[i]);
            mu[i] = f.mu();
        }
        const double db = sig[i] * std::sqrt(dt) * z;
        b[i + 1] = b[i] + db;
        s[i + 1] = s[i] * std::exp((mu[i] - 0.5 * sig[i] * sig[i]) * dt + db);
    }
    std::vector<double> t(grid.begin(), grid.end());
    return {SampledPath(t, std::move(s), true), SampledPath(t, std::move(b)), std::move(sig),
            std::move(mu)};
}

std::vector<SampledPath> simulate_gbm_increments(const ControlProcess& control,
                                                 const UncertaintyBand& band,
                                                 std::span<const double> grid,
                                                 std::uint64_t seed, std::size_t n_paths) {
    validate_time_grid(grid, "grid");
    require_paths(n_paths);
    control.check_band(band);
    control.check_alignment(grid);
    std::vector<SampledPath> out(n_paths);
    const Scenario sc = control;
    parallel_for(n_paths, [&](std::size_t p) {
        out[p] = simulate_scenario_path(sc, 1.0, grid, seed, p).driver;
    });
    return out;
}

std::vector<SampledPath> simulate_asset_paths(const Scenario& scenario,
                                              const UncertaintyBand& band, double s0,
                                              std::span<const double> grid, std::uint64_t seed,
                                              std::size_t n_paths) {
    validate_time_grid(grid, "grid");
    require_paths(n_paths);
    check_scenario(scenario, band, grid);
    if (!(s0 > 0.0) || !std::isfinite(s0)) throw InvalidArgument("S0 must be > 0");
    std::vector<SampledPath> out(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        out[p] = simulate_scenario_path(scenario, s0, grid, seed, p).asset;
    });
    return out;
}

SampledPath deflator_path(const ControlProcess& control, double r, std::span<const double> grid,
                          const SampledPath& driving) {
    validate_time_grid(grid, "grid");
    if (!std::isfinite(r)) throw InvalidArgument("rate must be finite");
    if (driving.size() != grid.size()) {
        throw InvalidArgument("deflator: driving path and grid differ in length");
    }
    control.check_alignment(grid);
    std::vector<double> sig(grid.size() - 1), mu(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const std::size_t k = control.interval(grid[i]);
        sig[i] = control.sigma_levels()[k];
        mu[i] = control.mu_levels()[k];
    }
    return deflator_from_levels(grid, sig, mu, r, driving.values());
}

McAskBid mc_ask_bid(const PricingProblem& problem, const std::vector<Scenario>& scenarios,
                    std::span<const double> grid, std::uint64_t seed, std::size_t n_paths) {
    problem.validate();
    validate_time_grid(grid, "grid");
    require_paths(n_paths);
    if (scenarios.empty()) throw InvalidArgument("mc_ask_bid: empty scenario set");
    if (std::abs(grid.back() - problem.maturity) > 1e-12 * (1.0 + problem.maturity)) {
        throw InvalidArgument("mc_ask_bid: grid must end at the maturity");
    }
    for (const auto& s : scenarios) check_scenario(s, problem.band, grid);

    McAskBid out;
    for (const auto& s : scenarios) {
        std::vector<double> x(n_paths);
        parallel_for(n_paths, [&](std::size_t p) {
            const ScenarioSample smp = simulate_scenario_path(s, problem.spot, grid, seed, p);
            const SampledPath h =
                deflator_from_levels(grid, smp.sigma, smp.mu, problem.rate, smp.driver.values());
            x[p] = h.values().back() * problem.payoff(smp.asset.values().back());
        });
        const auto [mean, se] = mean_se(x);
        out.per_scenario.push_back({mean, se, n_paths, scenario_id(s)});
    }
    out.ask = *std::max_element(out.per_scenario.begin(), out.per_scenario.end(),
                                [](const auto& a, const auto& b) { return a.value < b.value; });
    out.bid = *std::min_element(out.per_scenario.begin(), out.per_scenario.end(),
                                [](const auto& a, const auto& b) { return a.value < b.value; });
    return out;
}

std::vector<ControlProcess> default_control_family(const UncertaintyBand& band, double r,
                                                   std::size_t sigma_points,
                                                   std::size_t mu_points) {
    if (sigma_points == 0 || mu_points == 0) {
        throw InvalidArgument("default_control_family: need at least one point per axis");
    }
    const auto lattice = [](double lo, double hi, std::size_t k) {
        std::vector<double> v;
        if (lo == hi || k == 1) {
            v.push_back(k == 1 ? 0.5 * (lo + hi) : lo);
            return v;
        }
        for (std::size_t i = 0; i < k; ++i) {
            v.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
        }
        v.back() = hi;
        return v;
    };
    std::vector<ControlProcess> out;
    for (double s : lattice(band.sigma_lo(), band.sigma_hi(), sigma_points)) {
        for (double m : lattice(band.mu_lo(), band.mu_hi(), mu_points)) {
            if (s == 0.0 && m != r) continue;
            out.push_back(ControlProcess::constant(s, m));
        }
    }
    return out;
}

FeedbackRule bang_bang_control_from_surface(std::shared_ptr<const PriceSurface> surface,
                                            std::optional<double> mu) {
    if (!surface) throw InvalidArgument("bang_bang_control_from_surface: null surface");
    const double m = mu.value_or(std::clamp(surface->rate(), surface->band().mu_lo(),
                                            surface->band().mu_hi()));
    return FeedbackRule(surface, m);
}

CapacityEstimate estimate_tube_capacity(const SampledPath& center, double eta,
                                        const UncertaintyBand& band,
                                        const std::vector<Scenario>& scenarios,
                                        std::uint64_t seed, std::size_t n_paths) {
    if (std::isnan(eta) || eta < 0.0) throw InvalidArgument("eta must be >= 0");
    if (scenarios.empty()) throw InvalidArgument("estimate_tube_capacity: empty control set");
    require_paths(n_paths);
    const std::span<const double> grid = center.times();
    validate_time_grid(grid, "center.times");
    for (const auto& s : scenarios) check_scenario(s, band, grid);
    const double s0 = center.values().front();
    if (!(s0 > 0.0)) throw InvalidArgument("tube centre must start positive");

    CapacityEstimate out;
    out.capacity = 0.0;
    for (const auto& s : scenarios) {
        double frac = 0.0;
        if (eta > 0.0) {
            std::vector<char> inside(n_paths, 0);
            parallel_for(n_paths, [&](std::size_t p) {
                const ScenarioSample smp = simulate_scenario_path(s, s0, grid, seed, p);
                const auto v = smp.asset.values();
                bool ok = true;
                for (std::size_t i = 0; i < v.size() && ok; ++i) {
                    ok = std::abs(v[i] - center.values()[i]) < eta;
                }
                inside[p] = ok ? 1 : 0;
            });
            const std::size_t hits = static_cast<std::size_t>(
                std::count(inside.begin(), inside.end(), static_cast<char>(1)));
            frac = static_cast<double>(hits) / static_cast<double>(n_paths);
        }
        out.per_scenario.push_back(frac);
        if (out.control_id.empty() || frac > out.capacity) {
            out.capacity = frac;
            out.control_id = scenario_id(s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pathwise diagnostics

HolderEstimate holder_exponent(const SampledPath& path) {
    if (path.size() < 64) throw InvalidArgument("holder_exponent: path needs >= 64 points");
    const auto x = path.values();
    const std::size_t n_inc = path.size() - 1;
    const double dt = (path.horizon() - path.start()) / static_cast<double>(n_inc);

    HolderEstimate est;
    std::vector<double> lx, ly;
    bool any_motion = false;
    for (std::size_t m = 1; n_inc / m >= 8; m *= 2) {
        const std::size_t k = n_inc / m;
        double mx = 0.0;
        for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, std::abs(x[(j + 1) * m] - x[j * m]));
        if (mx == 0.0) continue;
        any_motion = true;
        lx.push_back(std::log(static_cast<double>(m) * dt));
        ly.push_back(std::log(mx / expected_max_half_normal(k)));
    }
    if (!any_motion) {
        est.zero_variation = true;
        return est;
    }
    est.n_scales = lx.size();
    if (lx.size() < 2) return est;

    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    est.raw_slope = sxy / sxx;
    est.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    est.exponent = std::clamp(est.raw_slope, std::numeric_limits<double>::min(), 1.0);
    return est;
}

RsResult riemann_stieltjes(const SampledPath& integrand, const SampledPath& integrator) {
    if (integrand.empty() || integrator.size() < 2) {
        throw InvalidArgument("riemann_stieltjes: integrator needs >= 2 samples");
    }
    const double tol = 1e-12 * (1.0 + std::abs(integrator.horizon()));
    if (std::abs(integrand.start() - integrator.start()) > tol ||
        std::abs(integrand.horizon() - integrator.horizon()) > tol) {
        throw InvalidArgument("riemann_stieltjes: integrand and integrator span different times");
    }
    const SampledPath theta = std::equal(integrand.times().begin(), integrand.times().end(),
                                         integrator.times().begin(), integrator.times().end())
                                  ? integrand
                                  : integrand.resampled(integrator.times());

    RsResult out;
    for (std::size_t stride = 1; (integrator.size() - 1 + stride - 1) / stride >= 2; stride *= 2) {
        const SampledPath a = theta.coarsened(stride);
        const SampledPath s = integrator.coarsened(stride);
        double sum = 0.0;
        double mesh = 0.0;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            sum += a.values()[i] * (s.values()[i + 1] - s.values()[i]);
            mesh = std::max(mesh, s.times()[i + 1] - s.times()[i]);
        }
        out.levels.push_back({stride, mesh, sum});
    }
    out.value = out.levels.front().value;
    for (std::size_t k = 0; k + 1 < out.levels.size(); ++k) {
        out.differences.push_back(std::abs(out.levels[k].value - out.levels[k + 1].value));
    }
    // Trend rather than level-by-level order: on random integrators single
    // levels fluctuate even when the sums converge.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < out.differences.size(); ++k) {
        if (!(out.differences[k] > 0.0)) continue;
        const double x = std::log(out.levels[k].mesh);
        const double y = std::log(out.differences[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2) {
        const double n = static_cast<double>(m);
        out.convergence_rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    if (out.differences.size() >= 2) {
        const double slack = 1e-14 * (1.0 + std::abs(out.value));
        const bool shrunk = out.differences.front() <= out.differences.back() + slack;
        out.differences_decreasing =
            shrunk && (!out.convergence_rate || *out.convergence_rate > 0.0 ||
                       out.differences.back() <= slack);
    }
    if (theta.size() >= 64 && integrator.size() >= 64) {
        const double sum = holder_exponent(theta).exponent + holder_exponent(integrator).exponent;
        out.holder_sum = sum;
        out.young_violation = sum <= 1.0;
    }
    return out;
}

HedgeResult hedge_verify(const PriceSurface& surface, const SampledPath& asset_path, double r) {
    if (surface.side() == SurfaceSide::heat) throw InvalidArgument("hedge_verify: pricing surface required");
    if (asset_path.size() < 2) throw InvalidArgument("hedge_verify: path needs >= 2 samples");
    if (!std::isfinite(r)) throw InvalidArgument("rate must be finite");
    const double horizon = surface.horizon();
    const double tol = 1e-12 * (1.0 + horizon);
    if (std::abs(asset_path.start() - surface.times().front()) > tol ||
        asset_path.horizon() > horizon + tol) {
        throw InvalidArgument("hedge_verify: path times must lie within the surface horizon");
    }
    const auto t = asset_path.times();
    const auto s = asset_path.values();
    const std::size_t n = asset_path.size();
    const bool to_maturity = std::abs(asset_path.horizon() - horizon) <= tol;

    for (std::size_t i = 0; i < n; ++i) {
        if (!surface.contains(s[i])) {
            throw DomainExit("asset path left the surface domain", t[i]);
        }
    }
    const auto price = [&](std::size_t i) {
        if (i + 1 == n && to_maturity && surface.payoff()) return (*surface.payoff())(s[i]);
        return surface.value(std::min(t[i], horizon), s[i]);
    };

    std::vector<double> y(n), c(n), th(n);
    y[0] = surface.value(t[0], s[0]);
    c[0] = 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        th[i] = surface.delta(t[i], s[i]);
        const double growth = std::expm1(r * (t[i + 1] - t[i]));
        y[i + 1] = y[i] + (y[i] - th[i] * s[i]) * growth + th[i] * (s[i + 1] - s[i]);
        c[i + 1] = y[i + 1] - price(i + 1);
        worst = std::min(worst, c[i + 1] - c[i]);
    }
    th[n - 1] = th[n - 2];

    HedgeResult out;
    const std::vector<double> times(t.begin(), t.end());
    out.terminal_shortfall = std::max(0.0, price(n - 1) - y[n - 1]);
    out.cost_monotonicity_violation = -worst;
    out.wealth = SampledPath(times, std::move(y));
    out.cost = SampledPath(times, std::move(c));
    out.holdings = SampledPath(times, std::move(th));
    return out;
}

}  // namespace gprice
