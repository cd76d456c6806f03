#include "dsfl/jitter.hpp"

#include "dsfl/error.hpp"
#include "dsfl/numeric.hpp"

#include <cmath>
#include <numbers>

namespace dsfl {

namespace {
constexpr double pi = std::numbers::pi;

double db_to_linear(double db) { return std::isinf(db) && db < 0 ? 0.0 : std::pow(10.0, db / 10.0); }
} // namespace

double ClockModel::effective_sigma_t(double f_s) const {
    if (!phase_noise.empty()) return sigma_t_from_phase_noise(phase_noise, f_s);
    return sigma_t;
}

double jitter_variance_closed_form(const TransferFunction& ntf, double osr, double sigma_t, double f_s, double delta) {
    if (!ntf.is_stable()) throw ArgumentError("NTF is unstable");
    if (sigma_t < 0.0) throw ArgumentError("sigma_t must be >= 0");
    if (!(osr > 1.0) || !(f_s > 0.0)) throw ArgumentError("osr must be > 1 and f_s > 0");
    if (sigma_t == 0.0) return 0.0;
    auto f = [&](double w) { return std::norm((1.0 - std::polar(1.0, -w)) * ntf.response(w)); };
    const double integral = integrate(f, 0.0, pi, 0.0, 1e-10);
    const double st = sigma_t * f_s;
    return st * st * delta * delta / (12.0 * pi * osr) * integral;
}

double phase_noise_density(const std::vector<PhaseNoisePoint>& table, double f) {
    if (table.empty()) throw ArgumentError("phase noise table is empty");
    if (f <= table.front().offset_hz) return db_to_linear(table.front().dbc_hz);
    if (f >= table.back().offset_hz) return db_to_linear(table.back().dbc_hz);
    std::size_t i = 1;
    while (table[i].offset_hz < f) ++i;
    const auto& a = table[i - 1];
    const auto& b = table[i];
    if (std::isinf(a.dbc_hz) || std::isinf(b.dbc_hz)) {
        // interpolate in linear power when an endpoint carries no noise
        const double t = (std::log(f) - std::log(a.offset_hz)) / (std::log(b.offset_hz) - std::log(a.offset_hz));
        return (1.0 - t) * db_to_linear(a.dbc_hz) + t * db_to_linear(b.dbc_hz);
    }
    const double t = (std::log(f) - std::log(a.offset_hz)) / (std::log(b.offset_hz) - std::log(a.offset_hz));
    return db_to_linear(a.dbc_hz + t * (b.dbc_hz - a.dbc_hz));
}

double sigma_t_from_phase_noise(const std::vector<PhaseNoisePoint>& table, double f_s) {
    if (table.size() < 2) throw ArgumentError("phase noise table needs at least two points");
    if (!(f_s > 0.0)) throw ArgumentError("f_s must be positive");
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!(table[i].offset_hz > 0.0)) throw ArgumentError("phase noise offsets must be positive");
        if (i > 0 && !(table[i].offset_hz > table[i - 1].offset_hz))
            throw ArgumentError("phase noise offsets must be ascending");
    }
    auto f = [&](double x) {
        const double s = std::sin(pi * x / f_s);
        return phase_noise_density(table, x) * s * s;
    };
    // integrate piecewise so the quadrature never straddles a table knot
    double total = 0.0;
    double lo = 0.0;
    for (const auto& p : table) {
        if (p.offset_hz >= f_s) break;
        total += integrate(f, lo, p.offset_hz, 0.0, 1e-12);
        lo = p.offset_hz;
    }
    total += integrate(f, lo, f_s, 0.0, 1e-12);
    const double w = 2.0 * pi * f_s;
    return std::sqrt(8.0 / (w * w) * total);
}

double combine_jitter(const std::vector<double>& sigmas) {
    double acc = 0.0;
    for (double s : sigmas) {
        if (s < 0.0) throw ArgumentError("jitter contributions must be >= 0");
        acc += s * s;
    }
    return std::sqrt(acc);
}

} // namespace dsfl
