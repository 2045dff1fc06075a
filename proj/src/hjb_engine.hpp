#pragma once

// Implicit monotone stepping for one-dimensional HJB equations whose
// nonlinearity is a max (or min) over a finite set of linear operators.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gprice::detail {

struct Stencil {
    double lower;
    double diag;
    double upper;
};

/// drift * v_y + diffusion * v_yy - discount * v at one node, one control.
struct Coefficients {
    double drift;
    double diffusion;
    double discount;
};

/// Three-point central stencil on a non-uniform grid. Where the drift would
/// make an off-diagonal negative the diffusion is raised to the least value
/// that restores monotonicity.
Stencil assemble(const Coefficients& c, double h_minus, double h_plus);

/// Candidate linear operators at every interior node. Control 0 wins ties.
class OperatorFamily {
public:
    OperatorFamily(std::size_t n_nodes, std::size_t n_controls);

    std::size_t nodes() const noexcept { return n_nodes_; }
    std::size_t controls() const noexcept { return n_controls_; }

    Stencil& at(std::size_t control, std::size_t node) {
        return stencils_[control * n_nodes_ + node];
    }
    const Stencil& at(std::size_t control, std::size_t node) const {
        return stencils_[control * n_nodes_ + node];
    }

    double apply(std::size_t control, std::size_t node, std::span<const double> v) const {
        const Stencil& s = at(control, node);
        return s.lower * v[node - 1] + s.diag * v[node] + s.upper * v[node + 1];
    }

private:
    std::size_t n_nodes_;
    std::size_t n_controls_;
    std::vector<Stencil> stencils_;
};

enum class Sense { maximize, minimize };

struct StepReport {
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Policy iteration for  v - dt * opt_k (L_k v) = rhs  with Dirichlet ends.
/// The policy persists across calls and warm-starts the next step.
class HowardStepper {
public:
    HowardStepper(OperatorFamily family, Sense sense, std::size_t max_iterations = 50,
                  double tolerance = 1e-10);

    /// `v` receives the new solution; it may alias nothing in `rhs`.
    StepReport step(std::span<const double> rhs, double dt, double lower_bc, double upper_bc,
                    std::span<double> v);

    std::span<const std::uint8_t> policy() const noexcept { return policy_; }
    const OperatorFamily& family() const noexcept { return family_; }

private:
    bool better(double candidate, double incumbent) const {
        return sense_ == Sense::maximize ? candidate > incumbent : candidate < incumbent;
    }
    /// Recomputes the greedy policy for `v`; returns true if it changed.
    bool improve(std::span<const double> v);
    double residual(std::span<const double> v, std::span<const double> rhs, double dt) const;
    void solve_policy(std::span<const double> rhs, double dt, std::span<double> v);

    OperatorFamily family_;
    Sense sense_;
    std::size_t max_iterations_;
    double tolerance_;
    bool initialised_ = false;
    std::vector<std::uint8_t> policy_;
    std::vector<double> sub_, dia_, sup_, rhs_;
};

/// Piecewise-uniform nodes on [lo, hi] with exact nodes at every anchor.
/// Anchors closer than half a nominal spacing to each other or the ends are
/// dropped.
std::vector<double> piecewise_uniform_nodes(double lo, double hi, std::vector<double> anchors,
                                            std::size_t n_nodes);

}  // namespace gprice::detail
