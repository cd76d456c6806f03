#pragma once

#include <stdexcept>
#include <string>

namespace dsfl {

// Invalid input to an operation (bad range, wrong size, violated precondition).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// NTF synthesis could not meet the requested out-of-band gain bound.
class SynthesisError : public std::runtime_error {
public:
    SynthesisError(const std::string& what, double achieved_h_inf)
        : std::runtime_error(what), achieved_h_inf_(achieved_h_inf) {}
    double achieved_h_inf() const noexcept { return achieved_h_inf_; }

private:
    double achieved_h_inf_;
};

// Loop-filter realization produced ill-conditioned coefficients.
class RealizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file or config text. Carries a location (line number or byte offset).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t location)
        : std::runtime_error(what), location_(location) {}
    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

// Physically invalid configuration (e.g. laser bias below threshold).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A measurement procedure could not produce a result (all sweep points unstable, ...).
class MeasurementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dsfl
