#include "hjb_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gprice/errors.hpp"

namespace gprice::detail {

Stencil assemble(const Coefficients& c, double hm, double hp) {
    const double hs = hm + hp;
    // Least diffusion for which the central drift stencil keeps nonnegative
    // off-diagonals. Raising to it, rather than switching to upwinding, keeps
    // the operator nondecreasing in the diffusion coefficient.
    const double a = std::max(c.diffusion, 0.5 * std::max(c.drift * hp, -c.drift * hm));
    return {std::max(0.0, (2.0 * a - c.drift * hp) / (hm * hs)),
            -2.0 * a / (hm * hp) + c.drift * (hp - hm) / (hm * hp) - c.discount,
            std::max(0.0, (2.0 * a + c.drift * hm) / (hp * hs))};
}

OperatorFamily::OperatorFamily(std::size_t n_nodes, std::size_t n_controls)
    : n_nodes_(n_nodes), n_controls_(n_controls), stencils_(n_nodes * n_controls, {0, 0, 0}) {
    if (n_nodes < 3 || n_controls == 0 || n_controls > 255) {
        throw InvalidArgument("operator family needs >= 3 nodes and 1..255 controls");
    }
}

HowardStepper::HowardStepper(OperatorFamily family, Sense sense, std::size_t max_iterations,
                             double tolerance)
    : family_(std::move(family)),
      sense_(sense),
      max_iterations_(max_iterations),
      tolerance_(tolerance),
      policy_(family_.nodes(), 0) {
    const std::size_t m = family_.nodes() - 2;
    sub_.resize(m);
    dia_.resize(m);
    sup_.resize(m);
    rhs_.resize(m);
}

bool HowardStepper::improve(std::span<const double> v) {
    bool changed = false;
    for (std::size_t i = 1; i + 1 < family_.nodes(); ++i) {
        std::uint8_t best_k = 0;
        double best = family_.apply(0, i, v);
        for (std::size_t k = 1; k < family_.controls(); ++k) {
            const double cand = family_.apply(k, i, v);
            if (better(cand, best)) {
                best = cand;
                best_k = static_cast<std::uint8_t>(k);
            }
        }
        if (best_k != policy_[i]) {
            policy_[i] = best_k;
            changed = true;
        }
    }
    return changed;
}

double HowardStepper::residual(std::span<const double> v, std::span<const double> rhs,
                               double dt) const {
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < family_.nodes(); ++i) {
        double best = family_.apply(0, i, v);
        for (std::size_t k = 1; k < family_.controls(); ++k) {
            const double cand = family_.apply(k, i, v);
            if (better(cand, best)) best = cand;
        }
        const double r = v[i] - dt * best - rhs[i];
        worst = std::max(worst, std::abs(r) / (1.0 + std::abs(rhs[i])));
    }
    return worst;
}

void HowardStepper::solve_policy(std::span<const double> rhs, double dt, std::span<double> v) {
    const std::size_t n = family_.nodes();
    const std::size_t m = n - 2;
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t i = j + 1;
        const Stencil& s = family_.at(policy_[i], i);
        sub_[j] = -dt * s.lower;
        dia_[j] = 1.0 - dt * s.diag;
        sup_[j] = -dt * s.upper;
        rhs_[j] = rhs[i];
    }
    rhs_[0] -= sub_[0] * v[0];
    rhs_[m - 1] -= sup_[m - 1] * v[n - 1];

    // Thomas algorithm; the matrix is an M-matrix so no pivoting is needed.
    for (std::size_t j = 1; j < m; ++j) {
        const double w = sub_[j] / dia_[j - 1];
        dia_[j] -= w * sup_[j - 1];
        rhs_[j] -= w * rhs_[j - 1];
    }
    v[m] = rhs_[m - 1] / dia_[m - 1];
    for (std::size_t j = m - 1; j-- > 0;) {
        v[j + 1] = (rhs_[j] - sup_[j] * v[j + 2]) / dia_[j];
    }
}

StepReport HowardStepper::step(std::span<const double> rhs, double dt, double lower_bc,
                               double upper_bc, std::span<double> v) {
    const std::size_t n = family_.nodes();
    if (rhs.size() != n || v.size() != n) {
        throw InvalidArgument("HowardStepper::step: size mismatch");
    }
    if (!initialised_) {
        improve(rhs);
        initialised_ = true;
    }
    v[0] = lower_bc;
    v[n - 1] = upper_bc;

    StepReport report;
    double res = 0.0;
    for (std::size_t it = 1; it <= max_iterations_; ++it) {
        solve_policy(rhs, dt, v);
        report.iterations = it;
        if (family_.controls() == 1) return report;
        const bool changed = improve(v);
        if (!changed) {
            report.residual = residual(v, rhs, dt);
            return report;
        }
        res = residual(v, rhs, dt);
        if (res < tolerance_) {
            report.residual = res;
            return report;
        }
    }
    std::ostringstream diag;
    diag << "nodes=" << n << " controls=" << family_.controls() << " dt=" << dt
         << " iterations=" << max_iterations_ << " residual=" << res;
    throw NumericalFailure("policy iteration did not converge", diag.str());
}

std::vector<double> piecewise_uniform_nodes(double lo, double hi, std::vector<double> anchors,
                                            std::size_t n_nodes) {
    if (!(hi > lo) || n_nodes < 3) {
        throw InvalidArgument("piecewise_uniform_nodes: need hi > lo and >= 3 nodes");
    }
    const double nominal = (hi - lo) / static_cast<double>(n_nodes - 1);
    std::sort(anchors.begin(), anchors.end());
    std::vector<double> breaks{lo};
    for (double a : anchors) {
        if (a - breaks.back() >= 0.5 * nominal && hi - a >= 0.5 * nominal) breaks.push_back(a);
    }
    breaks.push_back(hi);

    const std::size_t segments = breaks.size() - 1;
    const std::size_t intervals = n_nodes - 1;
    std::vector<std::size_t> count(segments, 1);
    std::vector<double> frac(segments, 0.0);
    std::size_t used = 0;
    for (std::size_t s = 0; s < segments; ++s) {
        const double raw = static_cast<double>(intervals) * (breaks[s + 1] - breaks[s]) / (hi - lo);
        count[s] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(raw)));
        frac[s] = raw - std::floor(raw);
        used += count[s];
    }
    // Largest-remainder rounding to hit the requested node count exactly.
    std::vector<std::size_t> order(segments);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; used < intervals; k = (k + 1) % segments) {
        ++count[order[k]];
        ++used;
    }
    for (std::size_t k = segments; used > intervals && k-- > 0;) {
        const std::size_t s = order[k];
        if (count[s] > 1) {
            --count[s];
            --used;
        }
        if (k == 0 && used > intervals) k = segments;
    }

    std::vector<double> nodes;
    nodes.reserve(n_nodes);
    for (std::size_t s = 0; s < segments; ++s) {
        const double a = breaks[s];
        const double b = breaks[s + 1];
        for (std::size_t j = 0; j < count[s]; ++j) {
            nodes.push_back(a + (b - a) * static_cast<double>(j) / static_cast<double>(count[s]));
        }
    }
    nodes.push_back(hi);
    return nodes;
}

}  // namespace gprice::detail
