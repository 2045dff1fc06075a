#include "gprice/fgbm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <sstream>
#include <unsupported/Eigen/FFT>

#include "gprice/errors.hpp"
#include "gprice/random.hpp"

namespace gprice {

namespace {

constexpr std::size_t kCirculantThreshold = 512;

void require_hurst(double h) {
    if (!(h > 0.0 && h < 1.0)) throw InvalidArgument("hurst must lie in (0, 1)");
}

double unit_covariance(double s, double t, double h) {
    const double h2 = 2.0 * h;
    return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
}

bool is_uniform_from_zero(const std::vector<double>& g) {
    if (g.size() < 3 || g.front() != 0.0) return false;
    const double dt = g[1] - g[0];
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        if (std::abs((g[i + 1] - g[i]) - dt) > 1e-9 * dt) return false;
    }
    return true;
}

// Read-mostly cache keyed by (H, grid).
template <class Value>
class FactorCache {
public:
    using Key = std::pair<double, std::vector<double>>;

    template <class Build>
    std::shared_ptr<const Value> get(const Key& key, Build&& build) {
        {
            std::shared_lock lock(mutex_);
            const auto it = map_.find(key);
            if (it != map_.end()) return it->second;
        }
        auto value = std::make_shared<const Value>(build());
        std::unique_lock lock(mutex_);
        return map_.emplace(key, std::move(value)).first->second;
    }

private:
    std::shared_mutex mutex_;
    std::map<Key, std::shared_ptr<const Value>> map_;
};

// Lower Cholesky factor of the unit-sigma covariance at the positive grid times.
Eigen::MatrixXd build_cholesky(const std::vector<double>& times, double h) {
    const Eigen::Index n = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            c(i, j) = c(j, i) = unit_covariance(times[static_cast<std::size_t>(j)],
                                                times[static_cast<std::size_t>(i)], h);
        }
    }
    const double scale = c.diagonal().maxCoeff();
    for (double jitter : {0.0, 1e-15, 1e-14, 1e-13, 1e-12}) {
        Eigen::MatrixXd a = c;
        a.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    std::ostringstream os;
    os << "n=" << n << " hurst=" << h << " max_jitter=1e-12";
    throw NumericalFailure("fGBm covariance not positive definite after regularisation", os.str());
}

// sqrt(lambda_k / 2M) for the circulant embedding of unit-step fractional
// Gaussian noise of length n.
std::vector<double> build_circulant(std::size_t n, double h) {
    const auto gamma = [h](double k) {
        const double h2 = 2.0 * h;
        return 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(std::abs(k - 1.0), h2));
    };
    std::size_t m = 1;
    while (m < n) m *= 2;
    for (int attempt = 0; attempt < 4; ++attempt, m *= 2) {
        const std::size_t len = 2 * m;
        std::vector<std::complex<double>> row(len), eig(len);
        for (std::size_t k = 0; k <= m; ++k) row[k] = gamma(static_cast<double>(k));
        for (std::size_t k = m + 1; k < len; ++k) row[k] = row[len - k];
        Eigen::FFT<double> fft;
        fft.fwd(eig, row);
        std::vector<double> out(len);
        bool ok = true;
        for (std::size_t k = 0; k < len; ++k) {
            double lam = eig[k].real();
            if (lam < 0.0) {
                if (lam < -1e-10) {
                    ok = false;
                    break;
                }
                lam = 0.0;
            }
            out[k] = std::sqrt(lam / static_cast<double>(len));
        }
        if (ok) return out;
    }
    throw NumericalFailure("circulant embedding has negative eigenvalues",
                           "n=" + std::to_string(n) + " hurst=" + std::to_string(h));
}

FactorCache<Eigen::MatrixXd>& cholesky_cache() {
    static FactorCache<Eigen::MatrixXd> c;
    return c;
}
FactorCache<std::vector<double>>& circulant_cache() {
    static FactorCache<std::vector<double>> c;
    return c;
}
FactorCache<Eigen::MatrixXd>& kernel_cache() {
    static FactorCache<Eigen::MatrixXd> c;
    return c;
}

// K_H(t_i, m_j) for j < i, i, j indexing `grid`.
Eigen::MatrixXd build_kernel_matrix(const std::vector<double>& grid, double h) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            const double mid =
                0.5 * (grid[static_cast<std::size_t>(j)] + grid[static_cast<std::size_t>(j + 1)]);
            k(i, j) = volterra_kernel(grid[static_cast<std::size_t>(i)], mid, h);
        }
    }
    return k;
}

std::vector<double> sample_cholesky(const Eigen::MatrixXd& l, const std::vector<double>& grid,
                                    double sigma, RandomStream& rng) {
    const bool has_zero = grid.front() == 0.0;
    const Eigen::Index n = l.rows();
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = l.triangularView<Eigen::Lower>() * z;
    std::vector<double> v(grid.size(), 0.0);
    const std::size_t off = has_zero ? 1 : 0;
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i) + off] = sigma * x(i);
    return v;
}

std::vector<double> sample_circulant(const std::vector<double>& root, std::size_t n_inc, double dt,
                                     double h, double sigma, RandomStream& rng) {
    const std::size_t len = root.size();
    std::vector<std::complex<double>> w(len), x(len);
    for (std::size_t k = 0; k < len; ++k) {
        const double a = rng.normal();
        const double b = rng.normal();
        w[k] = {root[k] * a, root[k] * b};
    }
    Eigen::FFT<double> fft;
    fft.fwd(x, w);
    const double scale = sigma * std::pow(dt, h);
    std::vector<double> v(n_inc + 1, 0.0);
    for (std::size_t i = 0; i < n_inc; ++i) v[i + 1] = v[i] + scale * x[i].real();
    return v;
}

// int_0^1 (s + span w^r)^e dw for r >= 1. With w* = (s/span)^(1/r) the
// integrand is s^e (1 + (w/w*)^r)^e. On [0, min(w*, 1)] we substitute w = y^4
// (scaled) so the w^r cusp at 0 becomes smooth; beyond w* we integrate in
// z = log(w/w*) and carry every factor in log space.
double power_sum_integral(double s, double span, double r, double e, double* err) {
    using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
    constexpr double m = 4.0;
    const double log_ratio = std::log(s) - std::log(span);  // r log w*
    const double lw = log_ratio / r;
    if (lw >= 0.0) {
        const auto f = [&](double y) {
            return std::pow(s + span * std::pow(y, m * r), e) * m * std::pow(y, m - 1.0);
        };
        return Quad::integrate(f, 0.0, 1.0, 15, 1e-14, err);
    }
    const double scale = std::exp(lw + e * std::log(s));
    const auto head_f = [&](double y) {
        return std::pow(1.0 + std::pow(y, m * r), e) * m * std::pow(y, m - 1.0);
    };
    double e1 = 0.0;
    const double head = scale * Quad::integrate(head_f, 0.0, 1.0, 15, 1e-14, &e1);
    const auto softplus = [](double x) { return x + std::log1p(std::exp(-x)); };
    const auto tail_f = [&](double z) {
        return std::exp(lw + e * std::log(s) + e * softplus(r * z) + z);
    };
    double e2 = 0.0;
    const double tail = Quad::integrate(tail_f, 0.0, -lw, 15, 1e-14, &e2);
    *err = scale * e1 + e2;
    return head + tail;
}

}  // namespace

void FgbmSpec::validate() const {
    require_hurst(hurst);
    if (grid.size() < 2) throw InvalidArgument("fgbm grid needs at least two times");
    if (!(grid.front() >= 0.0)) throw InvalidArgument("fgbm grid must start at t >= 0");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || !(grid[i] > grid[i - 1])) {
            throw InvalidArgument("fgbm grid must be finite and strictly increasing");
        }
    }
}

CovarianceBounds fgbm_covariance(double s, double t, double hurst, const UncertaintyBand& band) {
    require_hurst(hurst);
    if (!(s >= 0.0) || !(t >= 0.0) || !std::isfinite(s) || !std::isfinite(t)) {
        throw InvalidArgument("fgbm_covariance: times must be finite and >= 0");
    }
    const double c = unit_covariance(s, t, hurst);
    return {band.sigma_hi() * band.sigma_hi() * c, band.sigma_lo() * band.sigma_lo() * c};
}

double moving_avg_constant(double hurst) {
    require_hurst(hurst);
    using boost::math::tgamma;
    return std::sqrt(2.0 * hurst * std::sin(std::numbers::pi * hurst) * tgamma(2.0 * hurst)) /
           tgamma(hurst + 0.5);
}

double volterra_kernel(double t, double s, double hurst) {
    require_hurst(hurst);
    if (!std::isfinite(t) || !std::isfinite(s) || !(s > 0.0) || !(s < t)) {
        throw InvalidArgument("volterra_kernel requires 0 < s < t");
    }
    if (hurst == 0.5) return 1.0;

    using boost::math::beta;
    const double span = t - s;
    const double a = hurst - 0.5;
    double err = 0.0;
    double value = 0.0;
    if (hurst > 0.5) {
        // u = s + (t-s) w^p removes the (u-s)^(H-3/2) endpoint singularity.
        const double p = 1.0 / a;
        const double integral = power_sum_integral(s, span, p, a, &err);
        const double c = std::sqrt(hurst * (2.0 * hurst - 1.0) / beta(2.0 - 2.0 * hurst, a));
        const double factor = c * std::pow(s, -a) * std::pow(span, a) * p;
        value = factor * integral;
        err *= factor;
    } else {
        // u = s + (t-s) w^q removes the (u-s)^(H-1/2) endpoint singularity.
        const double q = 1.0 / (hurst + 0.5);
        const double integral = power_sum_integral(s, span, q, hurst - 1.5, &err);
        const double c = std::sqrt(2.0 * hurst / ((1.0 - 2.0 * hurst) * beta(1.0 - 2.0 * hurst,
                                                                               hurst + 0.5)));
        const double factor = c * std::abs(a) * std::pow(s, -a) * std::pow(span, hurst + 0.5) * q;
        value = c * std::pow(t / s, a) * std::pow(span, a) + factor * integral;
        err *= factor;
    }
    if (!std::isfinite(value) || err > 1e-10 * (1.0 + std::abs(value))) {
        std::ostringstream os;
        os << "t=" << t << " s=" << s << " hurst=" << hurst << " error_estimate=" << err;
        throw NumericalFailure("Volterra kernel quadrature did not converge", os.str());
    }
    return value;
}

const char* to_string(FgbmMethod m) {
    switch (m) {
        case FgbmMethod::automatic: return "automatic";
        case FgbmMethod::cholesky: return "cholesky";
        case FgbmMethod::circulant: return "circulant";
        case FgbmMethod::volterra: return "volterra";
    }
    return "?";
}

std::vector<SampledPath> simulate_fgbm(const FgbmSpec& spec, double sigma, std::uint64_t seed,
                                       std::size_t n_paths, FgbmMethod method) {
    spec.validate();
    if (n_paths == 0) throw InvalidArgument("n_paths must be >= 1");
    if (!std::isfinite(sigma) || !spec.band.contains_sigma(sigma)) {
        throw InvalidArgument("fgbm sigma outside band");
    }
    const std::vector<double>& grid = spec.grid;
    const bool uniform = is_uniform_from_zero(grid);
    if (method == FgbmMethod::automatic) {
        method = uniform && grid.size() > kCirculantThreshold ? FgbmMethod::circulant
                                                              : FgbmMethod::cholesky;
    }
    if (method == FgbmMethod::circulant && !uniform) {
        throw InvalidArgument("circulant sampling needs a uniform grid starting at 0");
    }
    if (method == FgbmMethod::volterra && grid.front() != 0.0) {
        throw InvalidArgument("Volterra synthesis needs a grid starting at 0");
    }

    const double h = spec.hurst;
    std::vector<SampledPath> out(n_paths);
    if (method == FgbmMethod::cholesky) {
        std::vector<double> positive(grid.front() == 0.0 ? grid.begin() + 1 : grid.begin(),
                                     grid.end());
        const auto l = cholesky_cache().get({h, positive}, [&] { return build_cholesky(positive, h); });
        parallel_for(n_paths, [&](std::size_t p) {
            RandomStream rng(seed, p);
            out[p] = SampledPath(grid, sample_cholesky(*l, grid, sigma, rng));
        });
    } else if (method == FgbmMethod::circulant) {
        const std::size_t n_inc = grid.size() - 1;
        const double dt = grid[1] - grid[0];
        const auto root = circulant_cache().get({h, {static_cast<double>(n_inc)}},
                                                [&] { return build_circulant(n_inc, h); });
        parallel_for(n_paths, [&](std::size_t p) {
            RandomStream rng(seed, p);
            out[p] = SampledPath(grid, sample_circulant(*root, n_inc, dt, h, sigma, rng));
        });
    } else {
        const auto k = kernel_cache().get({h, grid}, [&] { return build_kernel_matrix(grid, h); });
        parallel_for(n_paths, [&](std::size_t p) {
            RandomStream rng(seed, p);
            std::vector<double> dw(grid.size() - 1);
            for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
                dw[j] = std::sqrt(grid[j + 1] - grid[j]) * rng.normal();
            }
            std::vector<double> v(grid.size(), 0.0);
            for (std::size_t i = 1; i < grid.size(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < i; ++j) {
                    acc += (*k)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * dw[j];
                }
                v[i] = sigma * acc;
            }
            out[p] = SampledPath(grid, std::move(v));
        });
    }
    return out;
}

SampledPath volterra_synthesis(const SampledPath& driving, double hurst) {
    require_hurst(hurst);
    const std::vector<double> grid(driving.times().begin(), driving.times().end());
    if (grid.size() < 2 || grid.front() < 0.0) {
        throw InvalidArgument("volterra_synthesis: driving path needs >= 2 times from t >= 0");
    }
    const auto k =
        kernel_cache().get({hurst, grid}, [&] { return build_kernel_matrix(grid, hurst); });
    const auto w = driving.values();
    std::vector<double> v(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
            acc += (*k)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (w[j + 1] - w[j]);
        }
        v[i] = acc;
    }
    return SampledPath(grid, std::move(v));
}

double fgbm_conditional_mean(const SampledPath& driving, double v, double t, double hurst) {
    require_hurst(hurst);
    if (!(v <= t) || !std::isfinite(v) || !std::isfinite(t)) {
        throw InvalidArgument("fgbm_conditional_mean requires finite v <= t");
    }
    const auto g = driving.times();
    const auto w = driving.values();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < g.size() && g[j + 1] <= v + 1e-12; ++j) {
        const double mid = 0.5 * (g[j] + g[j + 1]);
        acc += volterra_kernel(t, mid, hurst) * (w[j + 1] - w[j]);
    }
    return acc;
}

std::vector<SampledPath> simulate_fgbm_asset(const FgbmSpec& spec, double sigma,
                                             const std::function<double(double)>& drift,
                                             double s0, std::uint64_t seed, std::size_t n_paths,
                                             FgbmMethod method) {
    spec.validate();
    if (spec.grid.front() != 0.0) throw InvalidArgument("fgbm asset grid must start at 0");
    if (!(s0 > 0.0) || !std::isfinite(s0)) throw InvalidArgument("S0 must be > 0");
    if (!drift) throw InvalidArgument("drift function required");
    const std::vector<SampledPath> b = simulate_fgbm(spec, sigma, seed, n_paths, method);
    const std::vector<double>& g = spec.grid;
    std::vector<double> bt(g.size() - 1);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) bt[i] = drift(g[i]) * (g[i + 1] - g[i]);

    std::vector<SampledPath> out(n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        const auto x = b[p].values();
        std::vector<double> s(g.size());
        s[0] = s0;
        double log_s = std::log(s0);
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            log_s += bt[i] + (x[i + 1] - x[i]);
            s[i + 1] = std::exp(log_s);
        }
        out[p] = SampledPath(g, std::move(s), true);
    });
    return out;
}

}  // namespace gprice
