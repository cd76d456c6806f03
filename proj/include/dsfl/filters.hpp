#pragma once

#include "dsfl/signal.hpp"

#include <span>
#include <vector>

namespace dsfl {

/// Second-order section, a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Cascade of biquads, run in transposed direct form II from zero state.
class IirFilter {
public:
    IirFilter() = default;
    explicit IirFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

    std::vector<double> process(std::span<const double> x) const;
    std::vector<cplx> process(std::span<const cplx> x) const;
    RealSignal process(const RealSignal& x) const;
    /// Frequency response at f (Hz) for sample rate `rate`.
    cplx response(double f, double rate) const;
    const std::vector<Biquad>& sections() const { return sections_; }

private:
    std::vector<Biquad> sections_;
};

/// Butterworth low-pass by bilinear transform with pre-warping. Throws ArgumentError
/// unless 1 <= order <= 16 and 0 < cutoff < rate / 2.
IirFilter butterworth_lowpass(int order, double cutoff, double rate);

/// Single real pole with unity DC gain, pole at exp(-2 pi cutoff / rate).
IirFilter one_pole_lowpass(double cutoff, double rate);

} // namespace dsfl
