#pragma once

#include "dsfl/transfer_function.hpp"

#include <vector>

namespace dsfl {

/// One point of a single-sideband phase noise table.
struct PhaseNoisePoint {
    double offset_hz;
    double dbc_hz; // -infinity means no noise at this offset
};

/// Clock impairment. When `phase_noise` is non-empty the rms period jitter is
/// derived from it and `sigma_t` is ignored.
struct ClockModel {
    double sigma_t = 0.0; // seconds rms
    std::vector<PhaseNoisePoint> phase_noise;

    double effective_sigma_t(double f_s) const;
};

/// In-band noise from DAC pulse-width jitter:
///   (sigma_t f_s)^2 * delta^2 / (12 pi osr) * integral over [0, pi] of |(1 - e^{-jw}) NTF|^2.
/// The bracketed integral is the mean square of the feedback step v[n] - v[n-1]
/// under the white delta^2/12 quantization model.
double jitter_variance_closed_form(const TransferFunction& ntf, double osr, double sigma_t, double f_s,
                                   double delta = 2.0);

/// Phase-noise density (linear, 1/Hz) at `f`, interpolating dBc/Hz linearly in log frequency.
/// Flat extrapolation outside the table.
double phase_noise_density(const std::vector<PhaseNoisePoint>& table, double f);

/// rms period jitter: sigma_t^2 = 8 / (2 pi f_s)^2 * integral over (0, f_s] of L(f) sin^2(pi f / f_s).
/// Throws ArgumentError for tables with fewer than two points or non-ascending offsets.
double sigma_t_from_phase_noise(const std::vector<PhaseNoisePoint>& table, double f_s);

/// Root-sum-square combination of independent jitter contributions.
double combine_jitter(const std::vector<double>& sigmas);

} // namespace dsfl
