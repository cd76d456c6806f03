#include "dsfl/filters.hpp"

#include "dsfl/error.hpp"

#include <cmath>
#include <numbers>

namespace dsfl {

namespace {
template <class T>
std::vector<T> run(const std::vector<Biquad>& sections, std::span<const T> x) {
    std::vector<T> y(x.begin(), x.end());
    for (const auto& s : sections) {
        T z1{}, z2{};
        for (auto& v : y) {
            const T in = v;
            const T out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}
} // namespace

std::vector<double> IirFilter::process(std::span<const double> x) const { return run(sections_, x); }

std::vector<cplx> IirFilter::process(std::span<const cplx> x) const { return run(sections_, x); }

RealSignal IirFilter::process(const RealSignal& x) const {
    return RealSignal(process(std::span<const double>(x.samples())), x.sample_rate());
}

cplx IirFilter::response(double f, double rate) const {
    const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * f / rate);
    cplx h = 1.0;
    for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z1 * z1) / (1.0 + s.a1 * z1 + s.a2 * z1 * z1);
    return h;
}

IirFilter butterworth_lowpass(int order, double cutoff, double rate) {
    if (order < 1 || order > 16) throw ArgumentError("filter order must be in 1..16");
    if (!(cutoff > 0.0) || !(cutoff < rate / 2.0)) throw ArgumentError("cutoff must lie in (0, rate/2)");
    const double k = std::tan(std::numbers::pi * cutoff / rate);
    std::vector<Biquad> sections;
    for (int i = 0; i < order / 2; ++i) {
        // analog pole pair s^2 + 2 sin(theta) s + 1 on the unit circle
        const double theta = std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order);
        const double q2 = 2.0 * std::sin(theta);
        const double norm = 1.0 + q2 * k + k * k;
        Biquad b;
        b.b0 = k * k / norm;
        b.b1 = 2.0 * b.b0;
        b.b2 = b.b0;
        b.a1 = 2.0 * (k * k - 1.0) / norm;
        b.a2 = (1.0 - q2 * k + k * k) / norm;
        sections.push_back(b);
    }
    if (order % 2 == 1) {
        Biquad b;
        b.b0 = b.b1 = k / (1.0 + k);
        b.a1 = (k - 1.0) / (k + 1.0);
        sections.push_back(b);
    }
    return IirFilter(std::move(sections));
}

IirFilter one_pole_lowpass(double cutoff, double rate) {
    if (!(cutoff > 0.0) || !(rate > 0.0)) throw ArgumentError("one-pole cutoff and rate must be positive");
    const double p = std::exp(-2.0 * std::numbers::pi * cutoff / rate);
    Biquad b;
    b.b0 = 1.0 - p;
    b.a1 = -p;
    return IirFilter({b});
}

} // namespace dsfl
