#pragma once

#include <stdexcept>
#include <string>

namespace gprice {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative solve, quadrature or factorization did not converge.
/// `diagnostics()` carries grid sizes, residuals and iteration counts.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, std::string diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

/// Zero volatility paired with a nonzero risk premium: the market price of
/// risk mu-r over sigma is undefined.
class SingularControl : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DomainExit : public std::runtime_error {
public:
    DomainExit(const std::string& what, double exit_time)
        : std::runtime_error(what), exit_time_(exit_time) {}

    double exit_time() const noexcept { return exit_time_; }

private:
    double exit_time_;
};

/// A constructed object failed its own post-condition (e.g. the CPS sandwich
/// bound or ask/bid dominance).
class ConsistencyFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gprice
