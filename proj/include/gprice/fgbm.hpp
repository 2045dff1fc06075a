#pragma once

// Fractional G-Brownian motion: covariance envelope, Volterra kernel and
// constant-volatility path simulation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gprice/path.hpp"
#include "gprice/sublinear.hpp"

namespace gprice {

struct FgbmSpec {
    double hurst;
    UncertaintyBand band;
    std::vector<double> grid;  // increasing, grid[0] >= 0

    void validate() const;
};

struct CovarianceBounds {
    double upper;
    double lower;
};

/// 1/2 sigma^2 (t^2H + s^2H - |t-s|^2H) at sigma_hi (upper) and sigma_lo (lower).
CovarianceBounds fgbm_covariance(double s, double t, double hurst, const UncertaintyBand& band);

/// sqrt(2H sin(pi H) Gamma(2H)) / Gamma(H + 1/2).
double moving_avg_constant(double hurst);

/// K_H(t, s) for 0 < s < t; identically 1 at H = 1/2.
double volterra_kernel(double t, double s, double hurst);

enum class FgbmMethod {
    automatic,  // circulant on long uniform grids starting at 0, Cholesky otherwise
    cholesky,
    circulant,
    volterra,
};

const char* to_string(FgbmMethod m);

/// Paths of sigma * B_H on spec.grid for a constant sigma in the band.
/// Path p uses RandomStream(seed, p).
std::vector<SampledPath> simulate_fgbm(const FgbmSpec& spec, double sigma, std::uint64_t seed,
                                       std::size_t n_paths,
                                       FgbmMethod method = FgbmMethod::automatic);

/// sum_j K_H(t_i, m_j) dW_j over intervals [t_j, t_{j+1}] with t_{j+1} <= t_i,
/// where m_j is the interval midpoint and W is the driving Brownian path
/// sampled on the same grid (W(grid[0]) is the reference level).
SampledPath volterra_synthesis(const SampledPath& driving, double hurst);

/// E[B_H(t) | F_v] = sum over intervals ending by v of K_H(t, m_j) dW_j.
double fgbm_conditional_mean(const SampledPath& driving, double v, double t, double hurst);

/// S_{i+1} = S_i exp(b(t_i) dt + dB_H). Requires spec.grid[0] == 0.
std::vector<SampledPath> simulate_fgbm_asset(const FgbmSpec& spec, double sigma,
                                             const std::function<double(double)>& drift,
                                             double s0, std::uint64_t seed, std::size_t n_paths,
                                             FgbmMethod method = FgbmMethod::automatic);

}  // namespace gprice
