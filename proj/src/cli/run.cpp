#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "gprice/cli.hpp"
#include "gprice/cps.hpp"
#include "gprice/io.hpp"
#include "gprice/pde.hpp"

namespace gprice::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

struct Counters {
    Json j = Json::object();
    void add(const std::string& key, std::uint64_t v) {
        j[key] = j.value(key, std::uint64_t{0}) + v;
    }
};

PricingProblem to_problem(const ProblemConfig& p, const UncertaintyBand& band) {
    return {p.payoff, p.maturity, p.rate, band, p.x_min, p.x_max, p.spot};
}

double rate_in_band(const RunConfig& c) {
    const double r = c.problem ? c.problem->rate : 0.0;
    return std::clamp(r, c.band->mu_lo(), c.band->mu_hi());
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

Json sample_stats(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    return {{"mean", mean},
            {"std_dev", std::sqrt(var)},
            {"min", *std::min_element(v.begin(), v.end())},
            {"q50", quantile(v, 0.5)},
            {"max", *std::max_element(v.begin(), v.end())}};
}

Json estimate_json(const McEstimate& e) {
    return {{"control", e.control_id},
            {"value", e.value},
            {"std_error", e.std_error},
            {"n_paths", e.n_paths}};
}

std::vector<Scenario> control_scenarios(const RunConfig& c, std::span<const double> grid) {
    std::vector<Scenario> out;
    if (c.simulation && !c.simulation->controls.empty()) {
        for (const auto& ctl : c.simulation->controls) {
            ControlProcess p(ctl.breakpoints, ctl.sigma, ctl.mu);
            p.check_band(*c.band);
            p.check_alignment(grid);
            out.emplace_back(std::move(p));
        }
    } else {
        const double r = c.problem ? c.problem->rate : 0.0;
        for (auto& p : default_control_family(*c.band, r)) out.emplace_back(std::move(p));
    }
    return out;
}

double horizon_of(const RunConfig& c) {
    if (c.simulation && c.simulation->horizon) return *c.simulation->horizon;
    return c.problem->maturity;
}

double s0_of(const RunConfig& c) {
    if (c.simulation && c.simulation->s0) return *c.simulation->s0;
    return c.problem->spot;
}

Json run_price(const RunConfig& c, Counters& counters) {
    const PricingProblem problem = to_problem(*c.problem, *c.band);
    auto pair = solve_bsb_pair(problem, c.grid);
    const double ask = pair.ask.value(0.0, problem.spot);
    const double bid = pair.bid.value(0.0, problem.spot);
    counters.add("pde_time_steps", pair.ask.stats().steps + pair.bid.stats().steps);
    counters.add("policy_iterations",
                 pair.ask.stats().policy_iterations + pair.bid.stats().policy_iterations);

    Json out;
    out["ask"] = ask;
    out["bid"] = bid;
    out["spread"] = ask - bid;
    out["ask_delta"] = pair.ask.delta(0.0, problem.spot);
    out["bid_delta"] = pair.bid.delta(0.0, problem.spot);
    out["solver"] = {{"ask_max_residual", pair.ask.stats().max_residual},
                     {"bid_max_residual", pair.bid.stats().max_residual},
                     {"ask_max_iterations_per_step", pair.ask.stats().max_iterations_per_step},
                     {"bid_max_iterations_per_step", pair.bid.stats().max_iterations_per_step}};

    const auto kind = problem.payoff.kind();
    if ((kind == ScalarFunction::Kind::call || kind == ScalarFunction::Kind::put) &&
        problem.payoff.scale() == 1.0) {
        const OptionKind ok = kind == ScalarFunction::Kind::call ? OptionKind::call : OptionKind::put;
        const double k = problem.payoff.parameter();
        out["black_scholes"] = {
            {"sigma_lo", black_scholes_closed_form(problem.spot, k, problem.rate,
                                                   c.band->sigma_lo(), problem.maturity, ok)},
            {"sigma_hi", black_scholes_closed_form(problem.spot, k, problem.rate,
                                                   c.band->sigma_hi(), problem.maturity, ok)}};
    }

    if (c.simulation) {
        const auto grid = uniform_times(problem.maturity, c.simulation->n_steps);
        auto scenarios = control_scenarios(c, grid);
        if (c.simulation->include_feedback) {
            const double mu = rate_in_band(c);
            scenarios.emplace_back(FeedbackRule(
                std::make_shared<const PriceSurface>(pair.ask), mu, "feedback_ask"));
            scenarios.emplace_back(FeedbackRule(
                std::make_shared<const PriceSurface>(pair.bid), mu, "feedback_bid"));
        }
        const McAskBid mc = mc_ask_bid(problem, scenarios, grid, c.seed, c.simulation->n_paths);
        counters.add("mc_paths", c.simulation->n_paths * scenarios.size());
        Json per = Json::array();
        for (const auto& e : mc.per_scenario) per.push_back(estimate_json(e));
        out["monte_carlo"] = {{"ask", estimate_json(mc.ask)},
                              {"bid", estimate_json(mc.bid)},
                              {"per_scenario", per}};
    }

    if (c.files.ask_surface) write_surface_matrix(*c.files.ask_surface, pair.ask);
    if (c.files.bid_surface) write_surface_matrix(*c.files.bid_surface, pair.bid);
    return out;
}

Json run_simulate(const RunConfig& c, Counters& counters) {
    const auto& sim = *c.simulation;
    const auto grid = uniform_times(horizon_of(c), sim.n_steps);
    const auto scenarios = control_scenarios(c, grid);
    const auto paths =
        simulate_asset_paths(scenarios.front(), *c.band, s0_of(c), grid, c.seed, sim.n_paths);
    counters.add("paths", paths.size());
    counters.add("steps", paths.size() * sim.n_steps);

    std::vector<double> terminal, log_return;
    for (const auto& p : paths) {
        terminal.push_back(p.values().back());
        log_return.push_back(std::log(p.values().back() / p.values().front()));
    }
    Json out;
    out["control"] = scenario_id(scenarios.front());
    out["n_paths"] = paths.size();
    out["terminal"] = sample_stats(terminal);
    out["log_return"] = sample_stats(log_return);
    if (sim.n_steps + 1 >= 64) {
        std::vector<double> h;
        for (const auto& p : paths) {
            std::vector<double> logs;
            for (double v : p.values()) logs.push_back(std::log(v));
            h.push_back(holder_exponent(SampledPath(grid, std::move(logs))).exponent);
        }
        out["holder_exponent"] = sample_stats(h);
    }
    if (c.files.output_paths) write_ensemble_csv(*c.files.output_paths, paths);
    return out;
}

Json run_fgbm(const RunConfig& c, Counters& counters) {
    const auto& f = *c.fgbm;
    FgbmSpec spec{f.hurst, *c.band, uniform_times(f.horizon, f.n_steps)};
    std::vector<SampledPath> paths;
    if (f.s0) {
        const double b = f.drift;
        paths = simulate_fgbm_asset(spec, f.sigma, [b](double) { return b; }, *f.s0, c.seed,
                                    f.n_paths, f.method);
    } else {
        paths = simulate_fgbm(spec, f.sigma, c.seed, f.n_paths, f.method);
    }
    counters.add("paths", paths.size());
    counters.add("steps", paths.size() * f.n_steps);

    // Recover sigma B_H from asset paths so one set of statistics serves both.
    std::vector<double> terminal, holder;
    for (const auto& p : paths) {
        std::vector<double> x(p.values().begin(), p.values().end());
        if (f.s0) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = std::log(x[i] / *f.s0) - f.drift * spec.grid[i];
            }
        }
        terminal.push_back(x.back());
        if (x.size() >= 64) holder.push_back(holder_exponent(SampledPath(spec.grid, x)).exponent);
    }
    Json out;
    out["method"] = to_string(f.method);
    out["n_paths"] = paths.size();
    out["terminal"] = sample_stats(terminal);
    out["terminal_variance_theory"] = f.sigma * f.sigma * std::pow(f.horizon, 2.0 * f.hurst);
    if (!holder.empty()) out["holder_exponent"] = sample_stats(holder);
    if (c.files.output_paths) write_ensemble_csv(*c.files.output_paths, paths);
    return out;
}

Json run_cps(const RunConfig& c, Counters& counters) {
    const double eps = c.cps->epsilon;
    SampledPath path;
    if (c.files.input_path) {
        path = read_path_csv(*c.files.input_path, true);
    } else {
        const auto& f = *c.fgbm;
        FgbmSpec spec{f.hurst, *c.band, uniform_times(f.horizon, f.n_steps)};
        const double b = f.drift;
        path = simulate_fgbm_asset(spec, f.sigma, [b](double) { return b; }, *f.s0, c.seed, 1,
                                   f.method)
                   .front();
    }
    counters.add("path_samples", path.size());

    Json out;
    std::optional<ConsistentPriceSystem> cps;
    if (c.problem) {
        CpsPrice p = cps_price(path, to_problem(*c.problem, *c.band), eps, c.grid);
        out["shadow_spot"] = p.shadow_spot;
        out["ask"] = {{"value", p.ask.value}, {"lower", p.ask.lower}, {"upper", p.ask.upper}};
        out["bid"] = {{"value", p.bid.value}, {"lower", p.bid.lower}, {"upper", p.bid.upper}};
        cps.emplace(std::move(p.cps));
    } else {
        cps.emplace(build_shadow_path(path, eps));
    }

    Json table = {{"index", Json::array()},
                  {"time", Json::array()},
                  {"sign", Json::array()},
                  {"level", Json::array()},
                  {"overshoot", Json::array()}};
    for (const auto& x : cps->crossings()) {
        table["index"].push_back(x.index);
        table["time"].push_back(x.time);
        table["sign"].push_back(x.sign);
        table["level"].push_back(x.level);
        table["overshoot"].push_back(x.overshoot);
    }
    const DeltaDiagnostics d = delta_processes(*cps);
    out["epsilon"] = eps;
    out["n_samples"] = path.size();
    out["n_crossings"] = cps->crossings().size() - 1;
    out["sandwich"] = {{"ok", cps->sandwich_ok()},
                       {"min_ratio", cps->min_ratio()},
                       {"max_ratio", cps->max_ratio()},
                       {"lower_bound", std::pow(1.0 + eps, -3.0)},
                       {"upper_bound", std::pow(1.0 + eps, 3.0)}};
    out["delta"] = {{"delta1_within_eps", d.delta1_within},
                    {"delta2_within_2eps", d.delta2_within},
                    {"delta2_flagged_steps", d.flagged_steps}};
    out["crossings"] = table;
    if (c.files.shadow_path) write_path_csv(*c.files.shadow_path, cps->shadow());
    return out;
}

Json run_hedge(const RunConfig& c, Counters& counters) {
    const PricingProblem problem = to_problem(*c.problem, *c.band);
    auto ask_surface = std::make_shared<const PriceSurface>(solve_bsb_ask(problem, c.grid));
    counters.add("pde_time_steps", ask_surface->stats().steps);
    counters.add("policy_iterations", ask_surface->stats().policy_iterations);
    const double ask = ask_surface->value(0.0, problem.spot);
    const double tol = (c.hedge ? c.hedge->tolerance : HedgeConfig{}.tolerance) * ask;

    struct Batch {
        std::string id;
        std::vector<SampledPath> paths;
    };
    std::vector<Batch> batches;
    if (c.files.input_path) {
        batches.push_back({"input_path", {read_path_csv(*c.files.input_path, true)}});
    } else {
        const auto& sim = *c.simulation;
        const auto grid = uniform_times(problem.maturity, sim.n_steps);
        std::vector<Scenario> scenarios;
        const double mu = rate_in_band(c);
        if (sim.controls.empty()) {
            scenarios.emplace_back(ControlProcess::constant(c.band->sigma_hi(), mu));
            scenarios.emplace_back(ControlProcess::constant(c.band->sigma_lo(), mu));
            scenarios.emplace_back(FeedbackRule(ask_surface, mu, "feedback_ask"));
        } else {
            scenarios = control_scenarios(c, grid);
            if (sim.include_feedback) {
                scenarios.emplace_back(FeedbackRule(ask_surface, mu, "feedback_ask"));
            }
        }
        for (const auto& s : scenarios) {
            batches.push_back(
                {scenario_id(s),
                 simulate_asset_paths(s, *c.band, problem.spot, grid, c.seed, sim.n_paths)});
        }
    }

    Json per = Json::array();
    std::size_t total = 0, within = 0, exits = 0;
    double worst_cost_drop = 0.0;
    for (const auto& b : batches) {
        std::vector<double> shortfall;
        std::size_t batch_exits = 0;
        for (const auto& p : b.paths) {
            try {
                const HedgeResult h = hedge_verify(*ask_surface, p, problem.rate);
                shortfall.push_back(h.terminal_shortfall);
                worst_cost_drop = std::max(worst_cost_drop, h.cost_monotonicity_violation);
            } catch (const DomainExit&) {
                ++batch_exits;
            }
        }
        const auto ok = static_cast<std::size_t>(
            std::count_if(shortfall.begin(), shortfall.end(), [&](double s) { return s <= tol; }));
        total += b.paths.size();
        within += ok;
        exits += batch_exits;
        counters.add("hedged_paths", b.paths.size());
        Json e = {{"scenario", b.id},
                  {"n_paths", b.paths.size()},
                  {"domain_exits", batch_exits},
                  {"fraction_within_tolerance",
                   static_cast<double>(ok) / static_cast<double>(b.paths.size())}};
        if (!shortfall.empty()) {
            e["shortfall_q50"] = quantile(shortfall, 0.5);
            e["shortfall_q99"] = quantile(shortfall, 0.99);
            e["shortfall_max"] = quantile(shortfall, 1.0);
        }
        per.push_back(e);
    }
    return {{"ask", ask},
            {"tolerance_absolute", tol},
            {"n_paths", total},
            {"domain_exits", exits},
            {"fraction_within_tolerance", static_cast<double>(within) / static_cast<double>(total)},
            {"max_cost_decrease", worst_cost_drop},
            {"per_scenario", per}};
}

Json run_capacity(const RunConfig& c, Counters& counters) {
    SampledPath center;
    if (c.files.input_path) {
        center = read_path_csv(*c.files.input_path);
    } else {
        const double s0 = s0_of(c);
        const double mu = c.band->mu_hi();
        center = SampledPath::from_function(uniform_times(horizon_of(c), c.simulation->n_steps),
                                            [&](double t) { return s0 * std::exp(mu * t); });
    }
    const auto scenarios = control_scenarios(c, center.times());
    const CapacityEstimate e = estimate_tube_capacity(center, c.capacity->eta, *c.band, scenarios,
                                                      c.seed, c.simulation->n_paths);
    counters.add("paths", c.simulation->n_paths * scenarios.size());
    Json per = Json::array();
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        per.push_back({{"scenario", scenario_id(scenarios[k])}, {"fraction", e.per_scenario[k]}});
    }
    return {{"capacity", e.capacity},
            {"maximizing_control", e.control_id},
            {"eta", c.capacity->eta},
            {"per_scenario", per}};
}

void round_floats(Json& j) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            j = nullptr;
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        j = std::strtod(buf, nullptr);
    } else if (j.is_structured()) {
        for (auto& e : j) round_floats(e);
    }
}

std::string csv_field(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

void flatten(const Json& j, const std::string& prefix, std::ostream& os) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, os);
    } else if (j.is_array()) {
        if (j.empty()) os << csv_field(prefix) << ",\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            flatten(j[i], prefix + "[" + std::to_string(i) + "]", os);
        }
    } else {
        os << csv_field(prefix) << ',' << csv_field(j.is_string() ? j.get<std::string>() : j.dump())
           << '\n';
    }
}

}  // namespace

Json run(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    Counters counters;
    Json outputs;
    switch (config.command) {
        case Command::price: outputs = run_price(config, counters); break;
        case Command::simulate: outputs = run_simulate(config, counters); break;
        case Command::fgbm: outputs = run_fgbm(config, counters); break;
        case Command::cps: outputs = run_cps(config, counters); break;
        case Command::hedge: outputs = run_hedge(config, counters); break;
        case Command::capacity: outputs = run_capacity(config, counters); break;
    }
    Json report;
    report["inputs"] = emit_config(config);
    report["outputs"] = outputs;
    report["provenance"] = {
        {"library", "gprice"},
        {"version", kVersion},
        {"modules",
         {{"sublinear_core", kVersion},
          {"pde_engine", kVersion},
          {"scenario_paths", kVersion},
          {"fgbm_kernel", kVersion},
          {"cps_builder", kVersion},
          {"cli_orchestrator", kVersion}}},
        {"seed", config.seed},
        {"grid",
         {{"n_space", config.grid.n_space},
          {"n_time", config.grid.n_time},
          {"stretching", to_string(config.grid.stretching)}}},
        {"rng", "mt19937_64 per path, keyed by splitmix64(seed, path)"}};
    Json timing = {{"counters", counters.j}};
    if (config.wall_clock) {
        timing["wall_clock_ms"] = std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
    }
    report["timing"] = timing;
    return report;
}

std::string render_report(const Json& report, Format format) {
    Json r = report;
    round_floats(r);
    if (format == Format::json) return r.dump(2) + "\n";
    std::ostringstream os;
    os << "key,value\n";
    flatten(r, "", os);
    return os.str();
}

int main_entry(int argc, char** argv) {
    CLI::App app{"Bid/ask pricing under drift and volatility uncertainty"};
    app.require_subcommand(1);
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_file;
    std::optional<std::string> format;
    for (Command cmd : {Command::price, Command::simulate, Command::fgbm, Command::cps,
                        Command::hedge, Command::capacity}) {
        auto* sub = app.add_subcommand(to_string(cmd));
        sub->add_option("--config", config_file, "JSON configuration file")->required();
        sub->add_option("--seed", seed, "Override the configured seed");
        sub->add_option("--out", out_file, "Write the report here instead of stdout");
        sub->add_option("--format", format, "Report format")
            ->check(CLI::IsMember({"json", "csv"}));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        std::ifstream is(config_file, std::ios::binary);
        if (!is) throw ConfigError({"config: cannot read '" + config_file + "'"});
        std::stringstream ss;
        ss << is.rdbuf();
        cfg = parse_config(ss.str());
        std::vector<std::string> errors;
        if (to_string(cfg.command) != name) {
            errors.push_back("command: config says '" + std::string(to_string(cfg.command)) +
                             "' but '" + name + "' was invoked");
        }
        if (!errors.empty()) throw ConfigError(errors);
    } catch (const ConfigError& e) {
        std::cerr << "gprice " << name << ": " << e.what() << '\n';
        return 2;
    }
    if (seed) cfg.seed = *seed;
    if (out_file) cfg.output = *out_file;
    if (format) cfg.format = *parse_format(*format);

    try {
        const std::string text = render_report(run(cfg), cfg.format);
        if (cfg.output) {
            std::ofstream os(*cfg.output, std::ios::binary);
            if (!os) throw InvalidArgument("cannot open '" + *cfg.output + "' for writing");
            os << text;
        } else {
            std::cout << text;
        }
    } catch (const NumericalFailure& e) {
        std::cerr << "gprice " << name << ": numerical failure: " << e.what() << " ("
                  << e.diagnostics() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "gprice " << name << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace gprice::cli
