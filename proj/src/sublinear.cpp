#include "gprice/sublinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gprice/errors.hpp"
#include "gprice/pde.hpp"

namespace gprice {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw InvalidArgument(std::string(name) + " must be finite");
    }
}

bool is_integer(double p) { return std::floor(p) == p; }

double pos(double v) { return v > 0.0 ? v : 0.0; }
double neg(double v) { return v < 0.0 ? -v : 0.0; }

Curvature flip(Curvature c) {
    switch (c) {
    case Curvature::convex: return Curvature::concave;
    case Curvature::concave: return Curvature::convex;
    default: return c;
    }
}

// Curvature of a function given by the ordered slopes of its linear pieces.
Curvature from_slopes(const std::vector<double>& slopes) {
    bool up = true;
    bool down = true;
    bool flat = true;
    for (std::size_t i = 1; i < slopes.size(); ++i) {
        const double d = slopes[i] - slopes[i - 1];
        const double tol = 1e-14 * (1.0 + std::abs(slopes[i]) + std::abs(slopes[i - 1]));
        if (d < -tol) up = false;
        if (d > tol) down = false;
        if (std::abs(d) > tol) flat = false;
    }
    if (flat) return Curvature::linear;
    if (up) return Curvature::convex;
    if (down) return Curvature::concave;
    return Curvature::mixed;
}

}  // namespace

// ---------------------------------------------------------------------------
// GridSpec

void GridSpec::validate() const {
    if (n_space < 16) throw InvalidArgument("grid.n_space must be >= 16");
    if (n_time < 16) throw InvalidArgument("grid.n_time must be >= 16");
}

const char* to_string(Stretching s) {
    return s == Stretching::uniform_log ? "uniform_log" : "uniform_price";
}

// ---------------------------------------------------------------------------
// UncertaintyBand

UncertaintyBand::UncertaintyBand(double mu_lo, double mu_hi, double sigma_lo, double sigma_hi)
    : mu_lo_(mu_lo), mu_hi_(mu_hi), sigma_lo_(sigma_lo), sigma_hi_(sigma_hi) {
    const auto problems = violations(mu_lo, mu_hi, sigma_lo, sigma_hi);
    if (!problems.empty()) {
        std::string msg = "invalid uncertainty band:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw InvalidArgument(msg);
    }
}

UncertaintyBand UncertaintyBand::volatility(double sigma_lo, double sigma_hi) {
    return UncertaintyBand(0.0, 0.0, sigma_lo, sigma_hi);
}

std::vector<std::string> UncertaintyBand::violations(double mu_lo, double mu_hi, double sigma_lo,
                                                     double sigma_hi, const std::string& path) {
    std::vector<std::string> out;
    const auto field = [&](const char* name) { return path + "." + name; };
    if (!std::isfinite(mu_lo)) out.push_back(field("mu_lo") + " must be finite");
    if (!std::isfinite(mu_hi)) out.push_back(field("mu_hi") + " must be finite");
    if (!std::isfinite(sigma_lo)) out.push_back(field("sigma_lo") + " must be finite");
    if (!std::isfinite(sigma_hi)) out.push_back(field("sigma_hi") + " must be finite");
    if (!out.empty()) return out;
    if (mu_lo > mu_hi) {
        out.push_back(field("mu_lo") + " must not exceed " + field("mu_hi"));
    }
    if (sigma_lo < 0.0) out.push_back(field("sigma_lo") + " must be >= 0");
    if (sigma_lo > sigma_hi) {
        out.push_back(field("sigma_lo") + " must not exceed " + field("sigma_hi"));
    }
    if (!(sigma_hi > 0.0)) out.push_back(field("sigma_hi") + " must be > 0");
    return out;
}

bool UncertaintyBand::contains_sigma(double sigma, double tol) const noexcept {
    return sigma >= sigma_lo_ - tol && sigma <= sigma_hi_ + tol;
}

bool UncertaintyBand::contains_mu(double mu, double tol) const noexcept {
    return mu >= mu_lo_ - tol && mu <= mu_hi_ + tol;
}

UncertaintyBand UncertaintyBand::without_drift() const {
    return UncertaintyBand(0.0, 0.0, sigma_lo_, sigma_hi_);
}

// ---------------------------------------------------------------------------
// ScalarFunction

ScalarFunction ScalarFunction::call(double strike) {
    require_finite(strike, "call strike");
    return ScalarFunction(Kind::call, strike);
}

ScalarFunction ScalarFunction::put(double strike) {
    require_finite(strike, "put strike");
    return ScalarFunction(Kind::put, strike);
}

ScalarFunction ScalarFunction::identity() { return ScalarFunction(Kind::identity, 0.0); }

ScalarFunction ScalarFunction::negation() { return ScalarFunction(Kind::negation, 0.0); }

ScalarFunction ScalarFunction::power(double exponent) {
    require_finite(exponent, "power exponent");
    if (exponent < 1.0) {
        throw InvalidArgument("power exponent must be >= 1 (Lipschitz on bounded sets)");
    }
    return ScalarFunction(Kind::power, exponent);
}

ScalarFunction ScalarFunction::piecewise_linear(std::vector<Knot> knots) {
    if (knots.size() < 2) throw InvalidArgument("piecewise_linear needs at least two knots");
    for (std::size_t i = 0; i < knots.size(); ++i) {
        require_finite(knots[i].x, "knot abscissa");
        require_finite(knots[i].y, "knot ordinate");
        if (i > 0 && !(knots[i].x > knots[i - 1].x)) {
            throw InvalidArgument("piecewise_linear knots must be strictly increasing in x");
        }
    }
    ScalarFunction f(Kind::piecewise_linear, 0.0);
    f.knots_ = std::move(knots);
    return f;
}

ScalarFunction ScalarFunction::table(double x0, double dx, std::vector<double> samples) {
    require_finite(x0, "table x0");
    require_finite(dx, "table dx");
    if (!(dx > 0.0)) throw InvalidArgument("table dx must be > 0");
    if (samples.size() < 2) throw InvalidArgument("table needs at least two samples");
    for (double s : samples) require_finite(s, "table sample");
    ScalarFunction f(Kind::table, 0.0);
    f.x0_ = x0;
    f.dx_ = dx;
    f.samples_ = std::move(samples);
    return f;
}

ScalarFunction ScalarFunction::butterfly(double lo, double mid, double hi) {
    if (!(lo < mid && mid < hi)) throw InvalidArgument("butterfly needs lo < mid < hi");
    // Tent of height mid - lo, flat zero wings on both sides.
    const double wing = hi - lo;
    return piecewise_linear(
        {{lo - wing, 0.0}, {lo, 0.0}, {mid, mid - lo}, {hi, 0.0}, {hi + wing, 0.0}});
}

ScalarFunction ScalarFunction::zero() {
    return piecewise_linear({{0.0, 0.0}, {1.0, 0.0}});
}

double ScalarFunction::base(double x) const {
    switch (kind_) {
    case Kind::call: return std::max(x - parameter_, 0.0);
    case Kind::put: return std::max(parameter_ - x, 0.0);
    case Kind::identity: return x;
    case Kind::negation: return -x;
    case Kind::power:
        if (x < 0.0 && !is_integer(parameter_)) {
            throw InvalidArgument("non-integer power evaluated at a negative argument");
        }
        return std::pow(x, parameter_);
    case Kind::piecewise_linear: {
        const auto& k = knots_;
        if (x <= k.front().x) {
            const double s = (k[1].y - k[0].y) / (k[1].x - k[0].x);
            return k[0].y + s * (x - k[0].x);
        }
        if (x >= k.back().x) {
            const auto n = k.size();
            const double s = (k[n - 1].y - k[n - 2].y) / (k[n - 1].x - k[n - 2].x);
            return k[n - 1].y + s * (x - k[n - 1].x);
        }
        const auto it = std::upper_bound(k.begin(), k.end(), x,
                                         [](double v, const Knot& kn) { return v < kn.x; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double w = (x - a.x) / (b.x - a.x);
        return a.y + w * (b.y - a.y);
    }
    case Kind::table: {
        const double u = (x - x0_) / dx_;
        if (u <= 0.0) return samples_.front();
        const auto last = static_cast<double>(samples_.size() - 1);
        if (u >= last) return samples_.back();
        const auto i = static_cast<std::size_t>(std::floor(u));
        const double w = u - static_cast<double>(i);
        return samples_[i] + w * (samples_[i + 1] - samples_[i]);
    }
    }
    return 0.0;
}

double ScalarFunction::operator()(double x) const { return scale_ * base(x); }

double ScalarFunction::base_slope(double x, int side) const {
    const bool right = side >= 0;
    switch (kind_) {
    case Kind::call:
        return (x > parameter_ || (x == parameter_ && right)) ? 1.0 : 0.0;
    case Kind::put:
        return (x < parameter_ || (x == parameter_ && !right)) ? -1.0 : 0.0;
    case Kind::identity: return 1.0;
    case Kind::negation: return -1.0;
    case Kind::power:
        if (parameter_ == 1.0) return 1.0;
        if (x < 0.0 && !is_integer(parameter_)) {
            throw InvalidArgument("non-integer power evaluated at a negative argument");
        }
        return parameter_ * std::pow(x, parameter_ - 1.0);
    case Kind::piecewise_linear: {
        const auto& k = knots_;
        const auto n = k.size();
        // Segment index j covers [k[j], k[j+1]]; extrapolation uses the end segments.
        std::size_t j = 0;
        if (x >= k.back().x) {
            j = n - 2;
        } else if (x > k.front().x || (x == k.front().x && right)) {
            auto it = right ? std::upper_bound(k.begin(), k.end(), x,
                                               [](double v, const Knot& kn) { return v < kn.x; })
                            : std::lower_bound(k.begin(), k.end(), x,
                                               [](const Knot& kn, double v) { return kn.x < v; });
            j = static_cast<std::size_t>(it - k.begin()) - 1;
            j = std::min(j, n - 2);
        }
        return (k[j + 1].y - k[j].y) / (k[j + 1].x - k[j].x);
    }
    case Kind::table: {
        const double u = (x - x0_) / dx_;
        const auto last = static_cast<double>(samples_.size() - 1);
        if (u < 0.0 || (u == 0.0 && !right)) return 0.0;
        if (u > last || (u == last && right)) return 0.0;
        double fl = std::floor(u);
        if (fl == u && !right) fl -= 1.0;
        const auto i = static_cast<std::size_t>(std::clamp(fl, 0.0, last - 1.0));
        return (samples_[i + 1] - samples_[i]) / dx_;
    }
    }
    return 0.0;
}

double ScalarFunction::slope(double x, int side) const { return scale_ * base_slope(x, side); }

double ScalarFunction::second_derivative(double x) const {
    if (kind_ != Kind::power || parameter_ == 1.0) return 0.0;
    if (x < 0.0 && !is_integer(parameter_)) {
        throw InvalidArgument("non-integer power evaluated at a negative argument");
    }
    return scale_ * parameter_ * (parameter_ - 1.0) * std::pow(x, parameter_ - 2.0);
}

ScalarFunction ScalarFunction::negated() const { return scaled(-1.0); }

ScalarFunction ScalarFunction::scaled(double factor) const {
    require_finite(factor, "scale factor");
    ScalarFunction f = *this;
    f.scale_ *= factor;
    return f;
}

std::vector<double> ScalarFunction::kinks() const {
    switch (kind_) {
    case Kind::call:
    case Kind::put: return {parameter_};
    case Kind::piecewise_linear: {
        std::vector<double> out;
        for (std::size_t i = 1; i + 1 < knots_.size(); ++i) {
            const double sl = (knots_[i].y - knots_[i - 1].y) / (knots_[i].x - knots_[i - 1].x);
            const double sr = (knots_[i + 1].y - knots_[i].y) / (knots_[i + 1].x - knots_[i].x);
            if (sl != sr) out.push_back(knots_[i].x);
        }
        return out;
    }
    case Kind::table: {
        std::vector<double> out;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            out.push_back(x0_ + dx_ * static_cast<double>(i));
        }
        return out;
    }
    default: return {};
    }
}

Curvature ScalarFunction::curvature_on(double lo, double hi) const {
    if (!(lo <= hi)) throw InvalidArgument("curvature_on requires lo <= hi");
    Curvature c = Curvature::linear;
    switch (kind_) {
    case Kind::call:
    case Kind::put:
        c = (parameter_ > lo && parameter_ < hi) ? Curvature::convex : Curvature::linear;
        break;
    case Kind::identity:
    case Kind::negation: c = Curvature::linear; break;
    case Kind::power: {
        const double p = parameter_;
        if (p == 1.0) {
            c = Curvature::linear;
        } else if (lo >= 0.0) {
            c = Curvature::convex;
        } else if (is_integer(p)) {
            const bool even = std::fmod(p, 2.0) == 0.0;
            if (even) c = Curvature::convex;
            else c = hi <= 0.0 ? Curvature::concave : Curvature::mixed;
        } else {
            c = Curvature::mixed;
        }
        break;
    }
    case Kind::piecewise_linear:
    case Kind::table: {
        // Slopes of every piece that intersects [lo, hi], left to right.
        std::vector<double> xs = kinks();
        if (kind_ == Kind::piecewise_linear) {
            xs.clear();
            for (const auto& k : knots_) xs.push_back(k.x);
        }
        std::vector<double> probes{lo};
        for (double x : xs) {
            if (x > lo && x < hi) probes.push_back(x);
        }
        std::vector<double> slopes;
        for (double x : probes) slopes.push_back(base_slope(x, +1));
        if (hi > lo) slopes.push_back(base_slope(hi, -1));
        c = from_slopes(slopes);
        break;
    }
    }
    if (scale_ == 0.0) return Curvature::linear;
    return scale_ < 0.0 ? flip(c) : c;
}

double ScalarFunction::lipschitz_on(double lo, double hi) const {
    if (!(lo <= hi)) throw InvalidArgument("lipschitz_on requires lo <= hi");
    double best = 0.0;
    switch (kind_) {
    case Kind::power: {
        const double p = parameter_;
        const double m = std::max(std::abs(lo), std::abs(hi));
        best = p * std::pow(m, p - 1.0);
        break;
    }
    default: {
        std::vector<double> probes{lo, hi};
        for (double x : kinks()) {
            if (x > lo && x < hi) probes.push_back(x);
        }
        if (kind_ == Kind::piecewise_linear) {
            for (const auto& k : knots_) {
                if (k.x > lo && k.x < hi) probes.push_back(k.x);
            }
        }
        for (double x : probes) {
            best = std::max(best, std::abs(base_slope(x, -1)));
            best = std::max(best, std::abs(base_slope(x, +1)));
        }
    }
    }
    return std::abs(scale_) * best;
}

bool ScalarFunction::nonnegative_on(double lo, double hi) const {
    if (!(lo <= hi)) throw InvalidArgument("nonnegative_on requires lo <= hi");
    // Every supported kind is either piecewise linear (extrema at knots or
    // endpoints) or monotone on each side of zero.
    std::vector<double> probes{lo, hi};
    for (double x : kinks()) {
        if (x > lo && x < hi) probes.push_back(x);
    }
    if (kind_ == Kind::piecewise_linear) {
        for (const auto& k : knots_) {
            if (k.x > lo && k.x < hi) probes.push_back(k.x);
        }
    }
    if (kind_ == Kind::power && lo < 0.0 && hi > 0.0) probes.push_back(0.0);
    return std::all_of(probes.begin(), probes.end(), [&](double x) { return (*this)(x) >= 0.0; });
}

std::string ScalarFunction::describe() const {
    std::ostringstream os;
    if (scale_ != 1.0) os << scale_ << "*";
    os << to_string(kind_);
    switch (kind_) {
    case Kind::call:
    case Kind::put: os << "(K=" << parameter_ << ")"; break;
    case Kind::power: os << "(p=" << parameter_ << ")"; break;
    case Kind::piecewise_linear: os << "(" << knots_.size() << " knots)"; break;
    case Kind::table: os << "(" << samples_.size() << " samples)"; break;
    default: break;
    }
    return os.str();
}

const char* to_string(ScalarFunction::Kind kind) {
    switch (kind) {
    case ScalarFunction::Kind::call: return "call";
    case ScalarFunction::Kind::put: return "put";
    case ScalarFunction::Kind::identity: return "identity";
    case ScalarFunction::Kind::negation: return "negation";
    case ScalarFunction::Kind::power: return "power";
    case ScalarFunction::Kind::piecewise_linear: return "piecewise_linear";
    case ScalarFunction::Kind::table: return "table";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Generators and expectations

double g_vol(double alpha, const UncertaintyBand& band) {
    require_finite(alpha, "alpha");
    const double hi = band.sigma_hi() * band.sigma_hi();
    const double lo = band.sigma_lo() * band.sigma_lo();
    return 0.5 * (hi * pos(alpha) - lo * neg(alpha));
}

double g_drift_vol(double eta, double alpha, const UncertaintyBand& band) {
    require_finite(eta, "eta");
    require_finite(alpha, "alpha");
    return (band.mu_hi() * pos(eta) - band.mu_lo() * neg(eta)) + g_vol(alpha, band);
}

double maximal_expectation(const ScalarFunction& phi, double lo, double hi,
                           std::size_t scan_points) {
    require_finite(lo, "lo");
    require_finite(hi, "hi");
    if (lo > hi) throw InvalidArgument("maximal_expectation requires lo <= hi");
    if (lo == hi) return phi(lo);
    scan_points = std::max<std::size_t>(scan_points, 3);

    const double step = (hi - lo) / static_cast<double>(scan_points - 1);
    std::size_t best_i = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scan_points; ++i) {
        const double x = (i + 1 == scan_points) ? hi : lo + step * static_cast<double>(i);
        const double v = phi(x);
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    // Kinks are where piecewise-linear maxima sit; probing them makes the
    // result exact for those kinds.
    for (double k : phi.kinks()) {
        if (k > lo && k < hi) best = std::max(best, phi(k));
    }

    // Golden-section search on the two scan cells around the best sample.
    double a = lo + step * static_cast<double>(best_i > 0 ? best_i - 1 : 0);
    double b = std::min(hi, lo + step * static_cast<double>(best_i + 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = phi(c);
    double fd = phi(d);
    for (int it = 0; it < 200 && (b - a) > 1e-10; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = phi(d);
        }
    }
    best = std::max({best, fc, fd, phi(0.5 * (a + b))});
    return best;
}

UpperLower maximal_bounds(const ScalarFunction& phi, double lo, double hi) {
    return {maximal_expectation(phi, lo, hi), -maximal_expectation(phi.negated(), lo, hi)};
}

double g_normal_expectation(const ScalarFunction& phi, const UncertaintyBand& band, double t) {
    return g_normal_expectation(phi, band, t, GridSpec{801, 400, Stretching::uniform_price});
}

double g_normal_expectation(const ScalarFunction& phi, const UncertaintyBand& band, double t,
                            const GridSpec& grid) {
    require_finite(t, "t");
    if (!(t > 0.0)) throw InvalidArgument("g_normal_expectation requires t > 0");
    const PriceSurface surface = solve_g_heat(phi, band.without_drift(), t, grid);
    return surface.value(t, 0.0);
}

UpperLower g_normal_bounds(const ScalarFunction& phi, const UncertaintyBand& band, double t) {
    return {g_normal_expectation(phi, band, t), -g_normal_expectation(phi.negated(), band, t)};
}

}  // namespace gprice
