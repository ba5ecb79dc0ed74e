#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace twistband {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kQuarterPiSq = kPi * kPi / 4.0;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace twistband
