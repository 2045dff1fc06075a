// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "gprice/cps.hpp"
#include "gprice/errors.hpp"
#include "gprice/fgbm.hpp"
#include "gprice/pde.hpp"
#include "gprice/scenario.hpp"

using namespace gprice;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 1. Degenerate band reduces to Black-Scholes.
Outcome black_scholes_reduction() {
    const PricingProblem p{ScalarFunction::call(100.0), 1.0, 0.05,
                           UncertaintyBand(0.05, 0.05, 0.2, 0.2), 0.0, 400.0, 100.0};
    const auto s = solve_bsb_pair(p, GridSpec{400, 400, Stretching::uniform_log});
    const double bs = black_scholes_closed_form(100, 100, 0.05, 0.2, 1, OptionKind::call);
    const double ask = s.ask.value(0, 100), bid = s.bid.value(0, 100);
    const bool ok = rel(ask, bs) <= 1e-3 && rel(bid, bs) <= 1e-3 && rel(bs, 10.4506) < 1e-5;
    return {ok, fmt("closed form %.6f, ask %.6f (%.3f%%), bid %.6f (%.3f%%), tol 0.1%%", bs, ask,
                    100 * rel(ask, bs), bid, 100 * rel(bid, bs))};
}

// 2. Convex payoff priced at the band endpoints.
Outcome convex_endpoints() {
    const PricingProblem p{ScalarFunction::call(100.0), 1.0, 0.05,
                           UncertaintyBand(0.05, 0.05, 0.1, 0.3), 0.0, 400.0, 100.0};
    const auto s = solve_bsb_pair(p, GridSpec{400, 400, Stretching::uniform_log});
    const double hi = black_scholes_closed_form(100, 100, 0.05, 0.3, 1, OptionKind::call);
    const double lo = black_scholes_closed_form(100, 100, 0.05, 0.1, 1, OptionKind::call);
    const double ask = s.ask.value(0, 100), bid = s.bid.value(0, 100);
    const bool ok = rel(ask, hi) <= 2e-3 && rel(bid, lo) <= 2e-3 && rel(hi, 14.2313) < 1e-5 &&
                    rel(lo, 6.8050) < 1e-4;
    return {ok, fmt("ask %.6f vs BS(0.3) %.6f (%.3f%%), bid %.6f vs BS(0.1) %.6f (%.3f%%), tol 0.2%%",
                    ask, hi, 100 * rel(ask, hi), bid, lo, 100 * rel(bid, lo))};
}

// 3. ask >= bid and band-widening monotonicity at every node of a shared grid.
Outcome dominance_and_monotonicity() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t dominance = 0, widening = 0, checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const double slo = 0.05 + 0.2 * u(rng);
        const double shi = slo + 0.02 + 0.2 * u(rng);
        const double r = 0.08 * u(rng);
        const double T = 0.25 + 1.75 * u(rng);
        ScalarFunction payoff = ScalarFunction::zero();
        switch (trial % 4) {
            case 0: payoff = ScalarFunction::call(70.0 + 60.0 * u(rng)); break;
            case 1: payoff = ScalarFunction::put(70.0 + 60.0 * u(rng)); break;
            case 2: {
                const double mid = 80.0 + 40.0 * u(rng);
                payoff = ScalarFunction::butterfly(mid - 5.0 - 20.0 * u(rng), mid,
                                                   mid + 5.0 + 20.0 * u(rng));
                break;
            }
            default: {
                std::vector<ScalarFunction::Knot> knots;
                double x = 60.0;
                for (int k = 0; k < 5; ++k) {
                    knots.push_back({x, 30.0 * u(rng)});
                    x += 5.0 + 20.0 * u(rng);
                }
                knots.front().y = knots[1].y;  // flat left wing stays nonnegative
                knots.back().y = knots[knots.size() - 2].y;
                payoff = ScalarFunction::piecewise_linear(std::move(knots));
            }
        }
        // A fixed domain wider than the wide band's default makes both grids identical.
        const double w = 8.0 * 1.3 * shi * std::sqrt(T) + r * T + 0.5;
        PricingProblem p{payoff, T, r, UncertaintyBand(r, r, slo, shi), 100.0 * std::exp(-w),
                         100.0 * std::exp(w), 100.0};
        const GridSpec g{200, 200, Stretching::uniform_log};
        const auto narrow = solve_bsb_pair(p, g);
        p.band = UncertaintyBand(r, r, 0.7 * slo, 1.3 * shi);
        const auto wide = solve_bsb_pair(p, g);
        if (!std::equal(narrow.ask.space_nodes().begin(), narrow.ask.space_nodes().end(),
                        wide.ask.space_nodes().begin(), wide.ask.space_nodes().end())) {
            return {false, "grids of narrow and wide band differ"};
        }
        for (std::size_t i = 0; i < narrow.ask.times().size(); ++i) {
            for (std::size_t j = 0; j < narrow.ask.space_nodes().size(); ++j) {
                const double tol = 1e-9 * (1.0 + std::abs(narrow.ask.at(i, j)));
                if (narrow.ask.at(i, j) < narrow.bid.at(i, j) - tol) ++dominance;
                if (wide.ask.at(i, j) < wide.bid.at(i, j) - tol) ++dominance;
                if (wide.ask.at(i, j) < narrow.ask.at(i, j) - tol) ++widening;
                if (wide.bid.at(i, j) > narrow.bid.at(i, j) + tol) ++widening;
                ++checked;
            }
        }
    }
    return {dominance == 0 && widening == 0,
            fmt("50 problems, %zu node-times each side; dominance violations %zu, widening "
                "violations %zu",
                checked, dominance, widening)};
}

// 4. Deflated Monte Carlo of each constant control inside the PDE bid/ask.
Outcome mc_pde_consistency() {
    const UncertaintyBand band(0.0, 0.08, 0.1, 0.3);
    const double r = 0.03;
    const auto controls = default_control_family(band, r, 9, 3);
    std::vector<Scenario> scenarios(controls.begin(), controls.end());
    const auto grid = uniform_times(1.0, 50);
    std::size_t checked = 0, bad = 0;
    double worst = -INFINITY;
    std::string detail;
    for (const ScalarFunction& payoff :
         {ScalarFunction::call(100.0), ScalarFunction::butterfly(85.0, 100.0, 115.0)}) {
        const PricingProblem p{payoff, 1.0, r, band, 0.0, 400.0, 100.0};
        const auto fine = solve_bsb_pair(p, GridSpec{400, 400, Stretching::uniform_log});
        const auto coarse = solve_bsb_pair(p, GridSpec{200, 200, Stretching::uniform_log});
        const double ask = fine.ask.value(0, 100), bid = fine.bid.value(0, 100);
        const double ask_tol = std::abs(ask - coarse.ask.value(0, 100));
        const double bid_tol = std::abs(bid - coarse.bid.value(0, 100));
        const McAskBid mc = mc_ask_bid(p, scenarios, grid, 77, 100000);
        for (const auto& e : mc.per_scenario) {
            ++checked;
            const double up = e.value - (ask + 3.0 * e.std_error + ask_tol);
            const double down = (bid - 3.0 * e.std_error - bid_tol) - e.value;
            worst = std::max({worst, up, down});
            if (up > 0.0 || down > 0.0) ++bad;
        }
        detail += fmt("%s: PDE [%.4f, %.4f] MC [%.4f, %.4f]; ", to_string(payoff.kind()), bid,
                      ask, mc.bid.value, mc.ask.value);
    }
    return {bad == 0, detail + fmt("%zu controls x 1e5 paths, violations %zu, worst margin %.4f",
                                   checked, bad, worst)};
}

// 5. Delta hedge from the ask surface against worst-case volatility paths.
struct HedgeStats {
    double within;
    double q99;
    std::size_t exits;
};

HedgeStats hedge_run(const PriceSurface& ask_surface, std::shared_ptr<const PriceSurface> feedback,
                     std::size_t steps, std::size_t n_paths, double tol) {
    const auto grid = uniform_times(1.0, steps);
    const FeedbackRule rule(std::move(feedback), 0.05, "feedback_ask");
    const auto paths = simulate_asset_paths(rule, ask_surface.band(), 100.0, grid, 5, n_paths);
    std::vector<double> shortfall;
    std::size_t exits = 0;
    for (const auto& p : paths) {
        try {
            shortfall.push_back(hedge_verify(ask_surface, p, 0.05).terminal_shortfall);
        } catch (const DomainExit&) {
            ++exits;
            shortfall.push_back(INFINITY);
        }
    }
    std::sort(shortfall.begin(), shortfall.end());
    const auto ok = std::count_if(shortfall.begin(), shortfall.end(),
                                  [&](double s) { return s <= tol; });
    return {static_cast<double>(ok) / static_cast<double>(n_paths),
            shortfall[static_cast<std::size_t>(0.99 * static_cast<double>(n_paths)) - 1], exits};
}

Outcome superhedging() {
    const PricingProblem p{ScalarFunction::call(100.0), 1.0, 0.05,
                           UncertaintyBand(0.05, 0.05, 0.1, 0.3), 0.0, 400.0, 100.0};
    auto ask = std::make_shared<const PriceSurface>(
        solve_bsb_ask(p, GridSpec{400, 1000, Stretching::uniform_log}));
    const double value = ask->value(0, 100);
    const double tol = 0.005 * value;
    const HedgeStats a = hedge_run(*ask, ask, 1000, 10000, tol);
    const HedgeStats b = hedge_run(*ask, ask, 2000, 10000, tol);
    const bool improving = b.q99 < a.q99 && b.within >= a.within;
    return {a.within >= 0.99 && improving && a.exits == 0,
            fmt("ask %.4f, tol %.4f; 1000 steps: %.1f%% within, q99 shortfall %.4f; 2000 steps: "
                "%.1f%% within, q99 %.4f; improving %s",
                value, tol, 100 * a.within, a.q99, 100 * b.within, b.q99,
                improving ? "yes" : "no")};
}

// 6. fGBm covariance and the Volterra identity.
Outcome fgbm_covariance_check() {
    const UncertaintyBand band = UncertaintyBand::volatility(0.1, 0.3);
    const double sigma = 0.2;
    std::string detail;
    bool ok = true;
    for (double h : {0.3, 0.5, 0.7}) {
        const FgbmSpec spec{h, band, uniform_times(1.0, 1024)};
        const auto paths = simulate_fgbm(spec, sigma, 606, 100000);
        std::vector<double> prod;
        prod.reserve(paths.size());
        double mean = 0.0;
        for (const auto& q : paths) {
            prod.push_back(q.values()[512] * q.values()[1024]);
            mean += prod.back();
        }
        mean /= static_cast<double>(prod.size());
        double var = 0.0;
        for (double x : prod) var += (x - mean) * (x - mean);
        const double se = std::sqrt(var / static_cast<double>(prod.size() - 1) /
                                    static_cast<double>(prod.size()));
        const double target =
            0.5 * sigma * sigma * (std::pow(0.5, 2 * h) + 1.0 - std::pow(0.5, 2 * h));
        const double z = (mean - target) / se;
        ok = ok && std::abs(z) <= 3.0;
        detail += fmt("H=%.1f z=%+.2f; ", h, z);
    }
    boost::math::quadrature::tanh_sinh<double> quad;
    double worst = 0.0;
    for (double h : {0.3, 0.7}) {
        for (auto [s, t] : {std::pair{0.5, 1.0}, std::pair{0.25, 0.75}, std::pair{0.1, 0.9}}) {
            const double lhs = quad.integrate(
                [&](double x) {
                    return x <= 0.0 || x >= s ? 0.0
                                              : volterra_kernel(t, x, h) * volterra_kernel(s, x, h);
                },
                0.0, s);
            const double rhs = 0.5 * (std::pow(t, 2 * h) + std::pow(s, 2 * h) -
                                      std::pow(t - s, 2 * h));
            worst = std::max(worst, rel(lhs, rhs));
        }
    }
    ok = ok && worst <= 1e-6;
    return {ok, detail + fmt("1e5 paths; Volterra identity worst rel err %.2e (tol 1e-6)", worst)};
}

// 7. CPS on fGBm asset paths.
Outcome cps_construction() {
    const UncertaintyBand band = UncertaintyBand::volatility(0.1, 0.3);
    std::size_t paths = 0, sandwich_bad = 0, recursion_bad = 0, delta_bad = 0;
    double worst_delta = 1.0;
    for (double h : {0.5, 0.7}) {
        const FgbmSpec spec{h, band, uniform_times(1.0, 4096)};
        const auto assets =
            simulate_fgbm_asset(spec, 0.2, [](double) { return 0.02; }, 100.0, 700, 100);
        for (double eps : {0.05, 0.1}) {
            for (const auto& s : assets) {
                ++paths;
                std::optional<ConsistentPriceSystem> cps;
                try {
                    cps.emplace(build_shadow_path(s, eps));
                } catch (const ConsistencyFailure&) {
                    ++sandwich_bad;
                    continue;
                }
                const double lo = std::pow(1.0 + eps, -3.0), hi = std::pow(1.0 + eps, 3.0);
                for (std::size_t i = 0; i < s.size(); ++i) {
                    const double ratio = cps->shadow().value(i) / s.value(i);
                    if (ratio < lo || ratio > hi) {
                        ++sandwich_bad;
                        break;
                    }
                }
                long long k = 0;
                double prev = std::log(100.0);
                for (std::size_t n = 0; n < cps->levels().size(); ++n) {
                    k += cps->signs()[n];
                    const double lx = std::log(cps->levels()[n]);
                    const double step = std::log1p(eps) * static_cast<double>(cps->signs()[n]);
                    if (std::abs(lx - std::log(100.0) - static_cast<double>(k) * std::log1p(eps)) >
                            1e-12 * (1.0 + std::abs(lx)) ||
                        std::abs(lx - prev - step) > 1e-12 * (1.0 + std::abs(lx))) {
                        ++recursion_bad;
                        break;
                    }
                    prev = lx;
                }
                const auto d = delta_processes(*cps);
                worst_delta = std::min(worst_delta, d.delta1_within);
                if (d.delta1_within < 0.99) ++delta_bad;
            }
        }
    }
    return {sandwich_bad == 0 && recursion_bad == 0 && delta_bad == 0,
            fmt("%zu path/eps cases; sandwich violations %zu, recursion mismatches %zu, "
                "delta1 below 99%% on %zu (min fraction %.4f)",
                paths, sandwich_bad, recursion_bad, delta_bad, worst_delta)};
}

// 8. Young integral convergence.
Outcome young_integral() {
    const auto grid = uniform_times(1.0, 1 << 14);
    const auto theta = SampledPath::from_function(grid, [](double t) { return t; });
    const auto s2 = SampledPath::from_function(grid, [](double t) { return t * t; });
    const RsResult rs = riemann_stieltjes(theta, s2);
    double worst_ratio = 0.0;
    bool order_one = true;
    for (const auto& lvl : rs.levels) {
        const double e = std::abs(lvl.value - 2.0 / 3.0);
        worst_ratio = std::max(worst_ratio, e / lvl.mesh);
        if (e > lvl.mesh) order_one = false;
    }
    const double finest_err = std::abs(rs.value - 2.0 / 3.0);

    const UncertaintyBand band = UncertaintyBand::volatility(0.1, 0.3);
    const FgbmSpec spec{0.7, band, grid};
    const auto paths = simulate_fgbm_asset(spec, 0.3, [](double) { return 0.0; }, 1.0, 808, 20);
    const auto smooth = SampledPath::from_function(
        grid, [](double t) { return std::cos(3.0 * t) + t * t; });
    std::size_t decreasing = 0;
    double worst_shrink = 0.0;  // finest over coarsest difference
    double min_rate = INFINITY;
    for (const auto& p : paths) {
        const RsResult r = riemann_stieltjes(smooth, p);
        if (r.differences_decreasing) ++decreasing;
        worst_shrink = std::max(worst_shrink, r.differences.front() / r.differences.back());
        min_rate = std::min(min_rate, r.convergence_rate.value_or(-INFINITY));
    }
    const bool ok =
        order_one && finest_err <= rs.levels.front().mesh && decreasing == paths.size();
    return {ok, fmt("t dt^2: finest err %.3e at mesh %.3e, max err/mesh %.3f; H=0.7: %zu/%zu "
                    "paths with decreasing differences, finest/coarsest difference <= %.2e, "
                    "min rate %.2f",
                    finest_err, rs.levels.front().mesh, worst_ratio, decreasing, paths.size(),
                    worst_shrink, min_rate)};
}

// 9. Hölder exponent estimator on fGBm.
Outcome holder_diagnostics() {
    const UncertaintyBand band = UncertaintyBand::volatility(0.1, 0.3);
    bool ok = true;
    std::string detail;
    for (double h : {0.3, 0.5, 0.8}) {
        const FgbmSpec spec{h, band, uniform_times(1.0, 9999)};
        const auto paths = simulate_fgbm(spec, 0.2, 909, 20);
        double sum = 0.0;
        std::size_t within = 0;
        for (const auto& p : paths) {
            const double e = holder_exponent(p).exponent;
            sum += e;
            if (std::abs(e - h) <= 0.1) ++within;
        }
        const double mean = sum / static_cast<double>(paths.size());
        ok = ok && std::abs(mean - h) <= 0.1 && within == paths.size();
        detail += fmt("H=%.1f mean %.3f, %zu/20 paths within 0.1; ", h, mean, within);
    }
    return {ok, detail + "1e4-point paths"};
}

// 10. CLI determinism over the bundled configs.
std::string slurp(const std::filesystem::path& f) {
    std::ifstream is(f, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome cli_determinism() {
    namespace fs = std::filesystem;
    const fs::path src = GPRICE_SOURCE_DIR;
    const fs::path tmp = fs::temp_directory_path() / "gprice_acceptance";
    fs::create_directories(tmp);
    std::size_t commands = 0, mismatches = 0, failures = 0;
    for (const auto& entry : fs::directory_iterator(src / "configs")) {
        if (entry.path().extension() != ".json") continue;
        auto cfg = nlohmann::ordered_json::parse(slurp(entry.path()));
        const std::string name = entry.path().stem().string();
        std::vector<std::string> outputs;
        std::string results[2];
        for (int run = 0; run < 2; ++run) {
            if (cfg.contains("files")) {
                for (auto& [key, value] : cfg["files"].items()) {
                    if (key == "input_path") {
                        value = (src / value.get<std::string>()).string();
                    } else {
                        value = (tmp / (name + "_" + key + std::to_string(run) + ".csv")).string();
                    }
                }
            }
            const fs::path cfg_file = tmp / (name + ".json");
            std::ofstream(cfg_file) << cfg.dump(2);
            // Same report path for both runs: the report echoes it under inputs.
            const fs::path out = tmp / (name + "_report.json");
            const std::string cmd = std::string("\"") + GPRICE_TOOL + "\" " +
                                    cfg["command"].get<std::string>() + " --config \"" +
                                    cfg_file.string() + "\" --out \"" + out.string() + "\"";
            if (std::system(cmd.c_str()) != 0) ++failures;
            results[run] = slurp(out);
            if (cfg.contains("files")) {
                for (auto& [key, value] : cfg["files"].items()) {
                    if (key != "input_path") results[run] += slurp(value.get<std::string>());
                }
            }
        }
        ++commands;
        // Reports name their own output files, which differ by run suffix.
        for (auto& r : results) {
            for (const char* tag : {"0.csv", "1.csv"}) {
                for (auto pos = r.find(tag); pos != std::string::npos; pos = r.find(tag, pos)) {
                    r.replace(pos, 5, "N.csv");
                }
            }
        }
        if (results[0] != results[1] || results[0].empty()) ++mismatches;
    }
    fs::remove_all(tmp);
    return {commands >= 6 && mismatches == 0 && failures == 0,
            fmt("%zu configs run twice; %zu non-identical, %zu failed runs", commands, mismatches,
                failures)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"Black-Scholes reduction", black_scholes_reduction},
        {"Convex endpoint identity", convex_endpoints},
        {"Dominance and monotonicity", dominance_and_monotonicity},
        {"MC/PDE consistency", mc_pde_consistency},
        {"Superhedging", superhedging},
        {"fGBm covariance", fgbm_covariance_check},
        {"CPS construction", cps_construction},
        {"Young integral", young_integral},
        {"Holder diagnostics", holder_diagnostics},
        {"CLI determinism", cli_determinism},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k + 1,
                    criteria[k].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
