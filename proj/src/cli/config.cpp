#include <cmath>
#include <set>
#include <sstream>

#include "gprice/cli.hpp"

namespace gprice::cli {

namespace {

using nlohmann::json;

// Strict reader over one JSON object: remembers which keys were consumed and
// reports the rest as unknown. Errors are collected, never thrown.
class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& errors)
        : j_(j), path_(std::move(path)), errors_(errors) {
        if (!j_.is_object()) fail("", "must be an object");
    }

    bool ok() const { return j_.is_object(); }
    bool has(const std::string& key) const { return ok() && j_.contains(key); }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void fail(const std::string& key, const std::string& msg) const {
        errors_.push_back((key.empty() ? (path_.empty() ? std::string("config") : path_)
                                       : field(key)) +
                          ": " + msg);
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        if (!ok() || !j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    std::optional<double> number(const std::string& key, bool required = false) {
        const json* v = get(key);
        if (!v) {
            if (required) fail(key, "required");
            return std::nullopt;
        }
        if (!v->is_number()) {
            fail(key, "must be a number");
            return std::nullopt;
        }
        const double d = v->get<double>();
        if (!std::isfinite(d)) {
            fail(key, "must be finite");
            return std::nullopt;
        }
        return d;
    }

    double number_or(const std::string& key, double fallback) {
        return number(key).value_or(fallback);
    }

    std::optional<std::uint64_t> count(const std::string& key, bool required = false) {
        const json* v = get(key);
        if (!v) {
            if (required) fail(key, "required");
            return std::nullopt;
        }
        if (!v->is_number_unsigned()) {
            fail(key, "must be a nonnegative integer");
            return std::nullopt;
        }
        return v->get<std::uint64_t>();
    }

    std::optional<std::string> string(const std::string& key, bool required = false) {
        const json* v = get(key);
        if (!v) {
            if (required) fail(key, "required");
            return std::nullopt;
        }
        if (!v->is_string()) {
            fail(key, "must be a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            fail(key, "must be true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) {
        const json* v = get(key);
        if (!v) {
            if (required) fail(key, "required");
            return std::nullopt;
        }
        if (!v->is_array()) {
            fail(key, "must be an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                fail(key, "must be an array of finite numbers");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    void finish() const {
        if (!ok()) return;
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) fail(k, "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

std::optional<UncertaintyBand> read_band(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "band", errors);
    const auto mu_lo = r.number("mu_lo");
    const auto mu_hi = r.number("mu_hi");
    const auto s_lo = r.number("sigma_lo", true);
    const auto s_hi = r.number("sigma_hi", true);
    r.finish();
    if (!s_lo || !s_hi) return std::nullopt;
    const double ml = mu_lo.value_or(0.0);
    const double mh = mu_hi.value_or(ml);
    const auto v = UncertaintyBand::violations(ml, mh, *s_lo, *s_hi);
    if (!v.empty()) {
        errors.insert(errors.end(), v.begin(), v.end());
        return std::nullopt;
    }
    return UncertaintyBand(ml, mh, *s_lo, *s_hi);
}

std::optional<ScalarFunction> read_payoff(const json& j, const std::string& path,
                                          std::vector<std::string>& errors) {
    Reader r(j, path, errors);
    const auto kind = r.string("kind", true);
    const double scale = r.number_or("scale", 1.0);
    std::optional<ScalarFunction> f;
    const std::size_t before = errors.size();
    try {
        if (!kind) {
        } else if (*kind == "call" || *kind == "put") {
            const auto k = r.number("strike", true);
            if (k) f = *kind == "call" ? ScalarFunction::call(*k) : ScalarFunction::put(*k);
        } else if (*kind == "identity") {
            f = ScalarFunction::identity();
        } else if (*kind == "negation") {
            f = ScalarFunction::negation();
        } else if (*kind == "power") {
            const auto p = r.number("exponent", true);
            if (p) f = ScalarFunction::power(*p);
        } else if (*kind == "butterfly") {
            const auto lo = r.number("lo", true);
            const auto mid = r.number("mid", true);
            const auto hi = r.number("hi", true);
            if (lo && mid && hi) f = ScalarFunction::butterfly(*lo, *mid, *hi);
        } else if (*kind == "piecewise_linear") {
            const json* k = r.get("knots");
            if (!k || !k->is_array()) {
                r.fail("knots", "required array of [x, y] pairs");
            } else {
                std::vector<ScalarFunction::Knot> knots;
                bool good = true;
                for (const auto& e : *k) {
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                        good = false;
                        break;
                    }
                    knots.push_back({e[0].get<double>(), e[1].get<double>()});
                }
                if (!good) r.fail("knots", "entries must be [x, y] number pairs");
                else f = ScalarFunction::piecewise_linear(std::move(knots));
            }
        } else if (*kind == "table") {
            const auto x0 = r.number("x0", true);
            const auto dx = r.number("dx", true);
            const auto s = r.numbers("samples", true);
            if (x0 && dx && s) f = ScalarFunction::table(*x0, *dx, *s);
        } else {
            r.fail("kind", "unknown payoff kind '" + *kind + "'");
        }
        if (f && scale != 1.0) f = f->scaled(scale);
    } catch (const InvalidArgument& e) {
        r.fail("", e.what());
        f.reset();
    }
    r.finish();
    if (errors.size() != before) return std::nullopt;
    return f;
}

std::optional<ProblemConfig> read_problem(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "problem", errors);
    ProblemConfig p;
    std::optional<ScalarFunction> payoff;
    if (const json* pj = r.get("payoff")) payoff = read_payoff(*pj, "problem.payoff", errors);
    else r.fail("payoff", "required");
    const auto T = r.number("maturity", true);
    const auto rate = r.number("rate");
    const auto spot = r.number("spot", true);
    const auto dom = r.numbers("spot_domain");
    r.finish();
    if (!payoff || !T || !spot) return std::nullopt;
    p.payoff = *payoff;
    p.maturity = *T;
    p.rate = rate.value_or(0.0);
    p.spot = *spot;
    if (dom) {
        if (dom->size() != 2) {
            r.fail("spot_domain", "must be [x_min, x_max]");
            return std::nullopt;
        }
        p.x_min = (*dom)[0];
        p.x_max = (*dom)[1];
    } else {
        p.x_min = 0.0;
        p.x_max = 4.0 * p.spot;
    }
    const std::size_t before = errors.size();
    if (!(p.maturity > 0.0)) r.fail("maturity", "must be > 0");
    if (!(p.x_min >= 0.0)) r.fail("spot_domain", "x_min must be >= 0");
    if (!(p.x_min < p.x_max)) r.fail("spot_domain", "x_min must be < x_max");
    if (!(p.spot > 0.0) || p.spot < p.x_min || p.spot > p.x_max) {
        r.fail("spot", "must be positive and inside spot_domain");
    }
    if (errors.size() == before && !p.payoff.nonnegative_on(p.x_min, p.x_max)) {
        r.fail("payoff", "must be nonnegative on spot_domain");
    }
    if (errors.size() != before) return std::nullopt;
    return p;
}

GridSpec read_grid(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "grid", errors);
    GridSpec g;
    if (auto v = r.count("n_space")) g.n_space = *v;
    if (auto v = r.count("n_time")) g.n_time = *v;
    if (auto s = r.string("stretching")) {
        if (*s == "uniform_log") g.stretching = Stretching::uniform_log;
        else if (*s == "uniform_price") g.stretching = Stretching::uniform_price;
        else r.fail("stretching", "must be uniform_log or uniform_price");
    }
    r.finish();
    if (g.n_space < 16) r.fail("n_space", "must be >= 16");
    if (g.n_time < 16) r.fail("n_time", "must be >= 16");
    return g;
}

std::optional<ControlConfig> read_control(const json& j, const std::string& path,
                                          std::vector<std::string>& errors) {
    Reader r(j, path, errors);
    ControlConfig c;
    const std::size_t before = errors.size();
    if (r.has("breakpoints")) {
        c.breakpoints = r.numbers("breakpoints").value_or(std::vector<double>{});
        c.sigma = r.numbers("sigma", true).value_or(std::vector<double>{});
        c.mu = r.numbers("mu", true).value_or(std::vector<double>{});
    } else {
        const auto s = r.number("sigma", true);
        const auto m = r.number("mu", true);
        c.breakpoints = {0.0};
        if (s) c.sigma = {*s};
        if (m) c.mu = {*m};
    }
    r.finish();
    if (errors.size() != before) return std::nullopt;
    try {
        ControlProcess(c.breakpoints, c.sigma, c.mu);
    } catch (const InvalidArgument& e) {
        r.fail("", e.what());
        return std::nullopt;
    }
    return c;
}

std::optional<SimulationConfig> read_simulation(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "simulation", errors);
    SimulationConfig s;
    if (auto v = r.count("n_paths")) s.n_paths = *v;
    if (auto v = r.count("n_steps")) s.n_steps = *v;
    s.s0 = r.number("s0");
    s.horizon = r.number("horizon");
    if (auto b = r.boolean("include_feedback")) s.include_feedback = *b;
    if (const json* cj = r.get("controls")) {
        if (!cj->is_array()) {
            r.fail("controls", "must be an array");
        } else {
            for (std::size_t k = 0; k < cj->size(); ++k) {
                auto c = read_control((*cj)[k], "simulation.controls[" + std::to_string(k) + "]",
                                      errors);
                if (c) s.controls.push_back(std::move(*c));
            }
        }
    }
    r.finish();
    if (s.n_paths == 0) r.fail("n_paths", "must be >= 1");
    if (s.n_steps == 0) r.fail("n_steps", "must be >= 1");
    if (s.s0 && !(*s.s0 > 0.0)) r.fail("s0", "must be > 0");
    if (s.horizon && !(*s.horizon > 0.0)) r.fail("horizon", "must be > 0");
    return s;
}

std::optional<FgbmConfig> read_fgbm(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "fgbm", errors);
    FgbmConfig f;
    const auto h = r.number("hurst", true);
    const auto s = r.number("sigma", true);
    f.horizon = r.number_or("horizon", 1.0);
    if (auto v = r.count("n_steps")) f.n_steps = *v;
    if (auto v = r.count("n_paths")) f.n_paths = *v;
    if (auto m = r.string("method")) {
        if (*m == "automatic") f.method = FgbmMethod::automatic;
        else if (*m == "cholesky") f.method = FgbmMethod::cholesky;
        else if (*m == "circulant") f.method = FgbmMethod::circulant;
        else if (*m == "volterra") f.method = FgbmMethod::volterra;
        else r.fail("method", "must be automatic, cholesky, circulant or volterra");
    }
    f.s0 = r.number("s0");
    f.drift = r.number_or("drift", 0.0);
    r.finish();
    if (!h || !s) return std::nullopt;
    f.hurst = *h;
    f.sigma = *s;
    if (!(f.hurst > 0.0 && f.hurst < 1.0)) r.fail("hurst", "must lie in (0, 1)");
    if (!(f.sigma >= 0.0)) r.fail("sigma", "must be >= 0");
    if (!(f.horizon > 0.0)) r.fail("horizon", "must be > 0");
    if (f.n_steps < 1) r.fail("n_steps", "must be >= 1");
    if (f.n_paths < 1) r.fail("n_paths", "must be >= 1");
    if (f.s0 && !(*f.s0 > 0.0)) r.fail("s0", "must be > 0");
    return f;
}

FilesConfig read_files(const json& j, std::vector<std::string>& errors) {
    Reader r(j, "files", errors);
    FilesConfig f;
    f.input_path = r.string("input_path");
    f.output_paths = r.string("output_paths");
    f.ask_surface = r.string("ask_surface");
    f.bid_surface = r.string("bid_surface");
    f.shadow_path = r.string("shadow_path");
    r.finish();
    return f;
}

void require_section(bool present, const std::string& name, const RunConfig& c,
                     std::vector<std::string>& errors) {
    if (!present) {
        errors.push_back(name + ": required for command '" + to_string(c.command) + "'");
    }
}

void validate_command(const RunConfig& c, std::vector<std::string>& errors) {
    const bool sim = c.simulation.has_value();
    switch (c.command) {
        case Command::price:
            require_section(c.band.has_value(), "band", c, errors);
            require_section(c.problem.has_value(), "problem", c, errors);
            break;
        case Command::simulate:
            require_section(c.band.has_value(), "band", c, errors);
            require_section(sim, "simulation", c, errors);
            if (sim && c.simulation->controls.size() != 1) {
                errors.push_back("simulation.controls: simulate needs exactly one control");
            }
            if (sim && !c.simulation->s0 && !c.problem) {
                errors.push_back("simulation.s0: required when no problem is given");
            }
            if (sim && !c.simulation->horizon && !c.problem) {
                errors.push_back("simulation.horizon: required when no problem is given");
            }
            break;
        case Command::fgbm:
            require_section(c.band.has_value(), "band", c, errors);
            require_section(c.fgbm.has_value(), "fgbm", c, errors);
            break;
        case Command::cps:
            require_section(c.cps.has_value(), "cps", c, errors);
            if (!c.files.input_path && !(c.fgbm && c.fgbm->s0)) {
                errors.push_back("files.input_path: required unless fgbm.s0 is set");
            }
            if (!c.files.input_path && c.fgbm && c.fgbm->s0) {
                require_section(c.band.has_value(), "band", c, errors);
            }
            if (c.problem) require_section(c.band.has_value(), "band", c, errors);
            break;
        case Command::hedge:
            require_section(c.band.has_value(), "band", c, errors);
            require_section(c.problem.has_value(), "problem", c, errors);
            if (!c.files.input_path) require_section(sim, "simulation", c, errors);
            break;
        case Command::capacity:
            require_section(c.band.has_value(), "band", c, errors);
            require_section(c.capacity.has_value(), "capacity", c, errors);
            require_section(sim, "simulation", c, errors);
            if (sim && !c.files.input_path && !c.simulation->s0 && !c.problem) {
                errors.push_back("simulation.s0: required when no problem is given");
            }
            if (sim && !c.files.input_path && !c.simulation->horizon && !c.problem) {
                errors.push_back("simulation.horizon: required when no problem is given");
            }
            break;
    }
    if (c.band && c.simulation) {
        for (std::size_t k = 0; k < c.simulation->controls.size(); ++k) {
            const auto& ctl = c.simulation->controls[k];
            for (std::size_t i = 0; i < ctl.sigma.size(); ++i) {
                if (!c.band->contains_sigma(ctl.sigma[i])) {
                    errors.push_back("simulation.controls[" + std::to_string(k) + "].sigma[" +
                                     std::to_string(i) + "]: outside band");
                }
                if (!c.band->contains_mu(ctl.mu[i])) {
                    errors.push_back("simulation.controls[" + std::to_string(k) + "].mu[" +
                                     std::to_string(i) + "]: outside band");
                }
            }
        }
    }
    if (c.band && c.fgbm && !c.band->contains_sigma(c.fgbm->sigma)) {
        errors.push_back("fgbm.sigma: outside band");
    }
}

Json emit_payoff(const ScalarFunction& f) {
    Json j;
    using K = ScalarFunction::Kind;
    j["kind"] = to_string(f.kind());
    switch (f.kind()) {
        case K::call:
        case K::put: j["strike"] = f.parameter(); break;
        case K::power: j["exponent"] = f.parameter(); break;
        case K::piecewise_linear: {
            Json knots = Json::array();
            for (const auto& k : f.knots()) knots.push_back({k.x, k.y});
            j["knots"] = knots;
            break;
        }
        case K::table:
            j["x0"] = f.table_x0();
            j["dx"] = f.table_dx();
            j["samples"] = f.samples();
            break;
        default: break;
    }
    if (f.scale() != 1.0) j["scale"] = f.scale();
    return j;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : InvalidArgument([&] {
          std::ostringstream os;
          os << "invalid configuration (" << errors.size() << " error"
             << (errors.size() == 1 ? "" : "s") << ")";
          for (const auto& e : errors) os << "\n  " << e;
          return os.str();
      }()),
      errors_(std::move(errors)) {}

const char* to_string(Command c) {
    switch (c) {
        case Command::price: return "price";
        case Command::simulate: return "simulate";
        case Command::fgbm: return "fgbm";
        case Command::cps: return "cps";
        case Command::hedge: return "hedge";
        case Command::capacity: return "capacity";
    }
    return "?";
}

const char* to_string(Format f) { return f == Format::json ? "json" : "csv"; }

std::optional<Command> parse_command(std::string_view s) {
    for (Command c : {Command::price, Command::simulate, Command::fgbm, Command::cps,
                      Command::hedge, Command::capacity}) {
        if (s == to_string(c)) return c;
    }
    return std::nullopt;
}

std::optional<Format> parse_format(std::string_view s) {
    if (s == "json") return Format::json;
    if (s == "csv") return Format::csv;
    return std::nullopt;
}

RunConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("config: not valid JSON: ") + e.what()});
    }
    std::vector<std::string> errors;
    RunConfig c;
    Reader r(j, "", errors);
    if (!r.ok()) throw ConfigError(errors);

    if (auto cmd = r.string("command", true)) {
        if (auto pc = parse_command(*cmd)) c.command = *pc;
        else r.fail("command", "unknown command '" + *cmd + "'");
    }
    if (auto s = r.count("seed")) c.seed = *s;
    if (auto f = r.string("format")) {
        if (auto pf = parse_format(*f)) c.format = *pf;
        else r.fail("format", "must be json or csv");
    }
    c.output = r.string("output");
    if (auto w = r.boolean("wall_clock")) c.wall_clock = *w;
    if (const json* v = r.get("band")) c.band = read_band(*v, errors);
    if (const json* v = r.get("problem")) c.problem = read_problem(*v, errors);
    if (const json* v = r.get("grid")) c.grid = read_grid(*v, errors);
    if (const json* v = r.get("simulation")) c.simulation = read_simulation(*v, errors);
    if (const json* v = r.get("fgbm")) c.fgbm = read_fgbm(*v, errors);
    if (const json* v = r.get("cps")) {
        Reader cr(*v, "cps", errors);
        CpsConfig cc;
        cc.epsilon = cr.number("epsilon", true).value_or(cc.epsilon);
        cr.finish();
        if (!(cc.epsilon > 0.0)) cr.fail("epsilon", "must be > 0");
        c.cps = cc;
    }
    if (const json* v = r.get("hedge")) {
        Reader hr(*v, "hedge", errors);
        HedgeConfig hc;
        hc.tolerance = hr.number_or("tolerance", hc.tolerance);
        hr.finish();
        if (!(hc.tolerance >= 0.0)) hr.fail("tolerance", "must be >= 0");
        c.hedge = hc;
    }
    if (const json* v = r.get("capacity")) {
        Reader kr(*v, "capacity", errors);
        CapacityConfig kc;
        kc.eta = kr.number("eta", true).value_or(kc.eta);
        kr.finish();
        if (!(kc.eta >= 0.0)) kr.fail("eta", "must be >= 0");
        c.capacity = kc;
    }
    if (const json* v = r.get("files")) c.files = read_files(*v, errors);
    r.finish();

    if (errors.empty()) validate_command(c, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

Json emit_config(const RunConfig& c) {
    Json j;
    j["command"] = to_string(c.command);
    j["seed"] = c.seed;
    j["format"] = to_string(c.format);
    if (c.output) j["output"] = *c.output;
    j["wall_clock"] = c.wall_clock;
    if (c.band) {
        j["band"] = {{"mu_lo", c.band->mu_lo()},
                     {"mu_hi", c.band->mu_hi()},
                     {"sigma_lo", c.band->sigma_lo()},
                     {"sigma_hi", c.band->sigma_hi()}};
    }
    if (c.problem) {
        const auto& p = *c.problem;
        j["problem"] = {{"payoff", emit_payoff(p.payoff)},
                        {"maturity", p.maturity},
                        {"rate", p.rate},
                        {"spot", p.spot},
                        {"spot_domain", {p.x_min, p.x_max}}};
    }
    j["grid"] = {{"n_space", c.grid.n_space},
                 {"n_time", c.grid.n_time},
                 {"stretching", to_string(c.grid.stretching)}};
    if (c.simulation) {
        const auto& s = *c.simulation;
        Json sj = {{"n_paths", s.n_paths}, {"n_steps", s.n_steps}};
        if (s.s0) sj["s0"] = *s.s0;
        if (s.horizon) sj["horizon"] = *s.horizon;
        sj["include_feedback"] = s.include_feedback;
        Json controls = Json::array();
        for (const auto& ctl : s.controls) {
            controls.push_back({{"breakpoints", ctl.breakpoints},
                                {"sigma", ctl.sigma},
                                {"mu", ctl.mu}});
        }
        sj["controls"] = controls;
        j["simulation"] = sj;
    }
    if (c.fgbm) {
        const auto& f = *c.fgbm;
        Json fj = {{"hurst", f.hurst},         {"sigma", f.sigma},
                   {"horizon", f.horizon},     {"n_steps", f.n_steps},
                   {"n_paths", f.n_paths},     {"method", to_string(f.method)}};
        if (f.s0) fj["s0"] = *f.s0;
        fj["drift"] = f.drift;
        j["fgbm"] = fj;
    }
    if (c.cps) j["cps"] = {{"epsilon", c.cps->epsilon}};
    if (c.hedge) j["hedge"] = {{"tolerance", c.hedge->tolerance}};
    if (c.capacity) j["capacity"] = {{"eta", c.capacity->eta}};
    Json files = Json::object();
    if (c.files.input_path) files["input_path"] = *c.files.input_path;
    if (c.files.output_paths) files["output_paths"] = *c.files.output_paths;
    if (c.files.ask_surface) files["ask_surface"] = *c.files.ask_surface;
    if (c.files.bid_surface) files["bid_surface"] = *c.files.bid_surface;
    if (c.files.shadow_path) files["shadow_path"] = *c.files.shadow_path;
    j["files"] = files;
    return j;
}

}  // namespace gprice::cli
