#include "gprice/cps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gprice/errors.hpp"

namespace gprice {

namespace {

constexpr double kThresholdTol = 1e-12;

void require_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("eps must be finite and > 0");
}

void require_positive(const SampledPath& path) {
    if (path.size() < 2) throw InvalidArgument("path needs at least two samples");
    for (double v : path.values()) {
        if (!(v > 0.0)) throw InvalidArgument("path values must be positive");
    }
}

std::size_t horizon_index_of(const SampledPath& path, std::optional<double> horizon) {
    if (!horizon) return path.size() - 1;
    const double tol = 1e-12 * (1.0 + std::abs(*horizon));
    if (*horizon > path.horizon() + tol || *horizon <= path.start()) {
        throw InvalidArgument("horizon must lie within the path's time span");
    }
    const auto t = path.times();
    const auto it = std::upper_bound(t.begin(), t.end(), *horizon + tol);
    return static_cast<std::size_t>(it - t.begin()) - 1;
}

}  // namespace

StoppingTimes extract_stopping_times(const SampledPath& path, double eps,
                                     std::optional<std::size_t> horizon_index) {
    require_eps(eps);
    require_positive(path);
    const std::size_t last = horizon_index.value_or(path.size() - 1);
    if (last == 0 || last >= path.size()) throw InvalidArgument("horizon index out of range");

    const double band = std::log1p(eps);
    const auto v = path.values();
    StoppingTimes st;
    double anchor = std::log(v[0]);
    for (std::size_t j = 1; j <= last; ++j) {
        const double move = std::log(v[j]) - anchor;
        if (std::abs(move) >= band - kThresholdTol) {
            if (j == last) break;
            st.tau_indices.push_back(j);
            st.signs.push_back(move > 0.0 ? 1 : -1);
            st.overshoot.push_back(std::max(0.0, std::abs(move) - band));
            anchor = std::log(v[j]);
        }
    }
    st.tau_indices.push_back(last);
    st.signs.push_back(0);
    st.overshoot.push_back(0.0);
    return st;
}

std::vector<double> retirement_walk(std::span<const int> signs, double x0, double eps) {
    require_eps(eps);
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw InvalidArgument("X0 must be > 0");
    const double step = std::log1p(eps);
    const double log_x0 = std::log(x0);
    std::vector<double> levels;
    levels.reserve(signs.size());
    long long k = 0;
    bool retired = false;
    for (std::size_t n = 0; n < signs.size(); ++n) {
        const int r = signs[n];
        if (r < -1 || r > 1) throw InvalidArgument("signs must lie in {-1, 0, 1}");
        if (retired && r != 0) {
            throw InvalidArgument("nonzero sign after retirement at position " + std::to_string(n));
        }
        if (r == 0) retired = true;
        k += r;
        levels.push_back(k == 0 ? x0 : std::exp(log_x0 + static_cast<double>(k) * step));
    }
    return levels;
}

ConsistentPriceSystem::ConsistentPriceSystem(double epsilon, StoppingTimes stops,
                                             std::vector<double> levels, SampledPath shadow,
                                             SampledPath source)
    : epsilon_(epsilon),
      stops_(std::move(stops)),
      levels_(std::move(levels)),
      shadow_(std::move(shadow)),
      source_(std::move(source)) {
    if (shadow_.size() != source_.size()) {
        throw InvalidArgument("shadow and source paths differ in length");
    }
    if (levels_.size() != stops_.tau_indices.size()) {
        throw InvalidArgument("one level per stopping time required");
    }
    min_ratio_ = std::numeric_limits<double>::infinity();
    max_ratio_ = 0.0;
    for (std::size_t i = 0; i < shadow_.size(); ++i) {
        const double r = shadow_.values()[i] / source_.values()[i];
        min_ratio_ = std::min(min_ratio_, r);
        max_ratio_ = std::max(max_ratio_, r);
    }
}

bool ConsistentPriceSystem::sandwich_ok() const noexcept {
    const double bound = 3.0 * std::log1p(epsilon_) + 1e-12;
    return std::log(max_ratio_) <= bound && std::log(min_ratio_) >= -bound;
}

std::vector<Crossing> ConsistentPriceSystem::crossings() const {
    std::vector<Crossing> out;
    for (std::size_t n = 0; n < stops_.tau_indices.size(); ++n) {
        const std::size_t idx = stops_.tau_indices[n];
        out.push_back({idx, source_.times()[idx], stops_.signs[n], levels_[n],
                       stops_.overshoot[n]});
    }
    return out;
}

ConsistentPriceSystem build_shadow_path(const SampledPath& path, double eps,
                                        std::optional<double> horizon) {
    require_eps(eps);
    require_positive(path);
    const std::size_t last = horizon_index_of(path, horizon);
    StoppingTimes stops = extract_stopping_times(path, eps, last);
    const double x0 = path.values().front();
    std::vector<double> levels = retirement_walk(stops.signs, x0, eps);

    const auto t = path.times();
    const auto s = path.values();
    const std::size_t n = path.size();
    std::vector<double> shadow(n);

    // log(S~/S) at tau_0 = 0 is zero; at tau_k it is log(X_k / S_tau_k).
    std::size_t prev_idx = 0;
    double prev_log = 0.0;
    shadow[0] = s[0];
    for (std::size_t k = 0; k < stops.tau_indices.size(); ++k) {
        const std::size_t idx = stops.tau_indices[k];
        const double log_ratio = std::log(levels[k]) - std::log(s[idx]);
        for (std::size_t i = prev_idx + 1; i <= idx; ++i) {
            const double w = (t[i] - t[prev_idx]) / (t[idx] - t[prev_idx]);
            shadow[i] = s[i] * std::exp((1.0 - w) * prev_log + w * log_ratio);
        }
        shadow[idx] = levels[k];
        prev_idx = idx;
        prev_log = log_ratio;
    }
    for (std::size_t i = last + 1; i < n; ++i) shadow[i] = levels.back();

    ConsistentPriceSystem cps(eps, std::move(stops), std::move(levels),
                              SampledPath(std::vector<double>(t.begin(), t.end()),
                                          std::move(shadow), true),
                              path);
    if (!cps.sandwich_ok()) {
        std::ostringstream os;
        os << "shadow/source ratio left [(1+eps)^-3, (1+eps)^3]: min=" << cps.min_ratio()
           << " max=" << cps.max_ratio() << " eps=" << eps;
        throw ConsistencyFailure(os.str());
    }
    return cps;
}

DeltaDiagnostics delta_processes(const ConsistentPriceSystem& cps) {
    const auto s = cps.source().values();
    const auto sh = cps.shadow().values();
    const auto t = cps.source().times();
    const double eps = cps.epsilon();
    const std::size_t n = s.size();

    DeltaDiagnostics d;
    std::vector<double> d1(n);
    std::size_t within1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        d1[i] = s[i] / sh[i] - 1.0;
        if (std::abs(d1[i]) <= eps) ++within1;
    }
    d.delta1 = SampledPath(std::vector<double>(t.begin(), t.end()), std::move(d1));
    d.delta1_within = static_cast<double>(within1) / static_cast<double>(n);

    std::size_t defined = 0;
    std::size_t within2 = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        d.step_times.push_back(t[i]);
        const double ds_shadow = sh[i + 1] - sh[i];
        if (ds_shadow == 0.0) {
            d.delta2.push_back(std::numeric_limits<double>::quiet_NaN());
            ++d.flagged_steps;
            continue;
        }
        const double v = (s[i + 1] - s[i]) / (2.0 * ds_shadow);
        d.delta2.push_back(v);
        ++defined;
        if (std::abs(v) <= 2.0 * eps) ++within2;
    }
    d.delta2_within = defined ? static_cast<double>(within2) / static_cast<double>(defined) : 0.0;
    return d;
}

CpsPrice cps_price(const SampledPath& path, const PricingProblem& problem, double eps,
                   const GridSpec& grid) {
    if (path.start() != 0.0) throw InvalidArgument("cps_price: path must start at t = 0");
    if (path.horizon() < problem.maturity - 1e-12 * (1.0 + problem.maturity)) {
        throw InvalidArgument("cps_price: path must cover [0, maturity]");
    }
    ConsistentPriceSystem cps = build_shadow_path(path, eps, problem.maturity);
    PricingProblem shadow_problem = problem;
    shadow_problem.spot = cps.shadow().values().front();
    shadow_problem.x_min = std::min(problem.x_min, shadow_problem.spot);
    shadow_problem.x_max = std::max(problem.x_max, shadow_problem.spot);
    const BidAskSurfaces s = solve_bsb_pair(shadow_problem, grid);
    const double a = s.ask.value(0.0, shadow_problem.spot);
    const double b = s.bid.value(0.0, shadow_problem.spot);
    const double widen = std::pow(1.0 + eps, 3.0);
    return {{a, a / widen, a * widen}, {b, b / widen, b * widen}, shadow_problem.spot,
            std::move(cps)};
}

}  // namespace gprice
