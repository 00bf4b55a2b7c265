#pragma once

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace orlab {

namespace detail {
/// Short scientific form for numbers in messages.
inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}
}  // namespace detail

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed tableau, unknown registry name, violated precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A computation that is well posed in exact arithmetic but failed numerically.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Shifted solve (I - lambda L) hit a zero pivot or exceeded the condition threshold.
class SingularSystem : public NumericalFailure {
public:
    SingularSystem(const std::string& what, std::complex<double> lambda, double cond)
        : NumericalFailure(what), lambda_(lambda), cond_(cond) {}
    std::complex<double> lambda() const noexcept { return lambda_; }
    double condition_estimate() const noexcept { return cond_; }

private:
    std::complex<double> lambda_;
    double cond_;
};

class NewtonDivergence : public NumericalFailure {
public:
    NewtonDivergence(const std::string& what, double residual, int iterations)
        : NumericalFailure(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

}  // namespace orlab
