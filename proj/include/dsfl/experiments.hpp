#pragma once

#include "dsfl/metrics.hpp"
#include "dsfl/modulator.hpp"

#include <iosfwd>
#include <vector>

namespace dsfl {

/// Measurement setup shared by the modulator experiments.
struct ToneTest {
    std::size_t fft_length = 1 << 16;
    std::size_t settle = 1024;  // leading bits discarded
    double f_band = 0.0;        // 0: f_s / (2 osr)
    double f_tone = 0.0;        // 0: coherent tone near f_band / 3
    std::size_t runs = 1;       // independent seeds averaged in the linear domain

    double band(const ModulatorConfig& cfg) const;
    double tone(const ModulatorConfig& cfg) const;
};

struct AmplitudePoint {
    double amplitude_dbfs = 0.0;
    double snr_db = 0.0;
    double sndr_db = 0.0;
    double signal_power = 0.0;
    double noise_power = 0.0;   // in-band, excluding signal and harmonics
    bool stable = true;
};

/// One simulation of a sine of the given amplitude (dBFS, full scale = delta/2).
AmplitudePoint measure_amplitude(const ModulatorConfig& cfg, double amplitude_dbfs, const ToneTest& test = {});

/// Runs measure_amplitude over the grid in parallel. Order of results follows the grid.
std::vector<AmplitudePoint> sweep_amplitude(const ModulatorConfig& cfg, const std::vector<double>& amps_dbfs,
                                            const ToneTest& test = {});

/// Best stable point by SNR. Throws MeasurementError when no point is stable.
AmplitudePoint peak_point(const std::vector<AmplitudePoint>& sweep);

/// Uniform grid from `lo` to `hi` inclusive in `step` dB.
std::vector<double> amplitude_grid(double lo, double hi, double step);

struct TcCell {
    double dk_over_k = 0.0;
    double amplitude_dbfs = 0.0;
    double sqnr_db = 0.0;
    bool stable = true;
};

/// SQNR over (dk/k, amplitude). The common tc_error of cfg is replaced per row.
std::vector<TcCell> sweep_tc_error(const ModulatorConfig& cfg, const std::vector<double>& dk_grid,
                                   const std::vector<double>& amp_grid, const ToneTest& test = {});
void write_tc_sweep_csv(std::ostream& os, const std::vector<TcCell>& cells);

/// Largest stable amplitude for one dk/k row, or -infinity if none.
double max_stable_amplitude(const std::vector<TcCell>& cells, double dk_over_k);
/// Peak SQNR for one dk/k row, or -infinity if none is stable.
double peak_sqnr_for(const std::vector<TcCell>& cells, double dk_over_k);

struct ClockPoint {
    double ratio = 1.0;         // f_s_actual / f_s
    double peak_sndr_db = 0.0;  // best over the amplitude grid, stable or not
    double amplitude_dbfs = 0.0;
    bool stable = true;         // at least one grid point stayed stable
};

/// Peak SNDR versus applied clock. Signal band and tone stay fixed in hertz. Runs are
/// not cut short on instability so every point carries a measured SNDR.
std::vector<ClockPoint> sweep_clock(const ModulatorConfig& cfg, const std::vector<double>& ratios,
                                    const std::vector<double>& amp_grid, const ToneTest& test = {});
void write_clock_sweep_csv(std::ostream& os, const std::vector<ClockPoint>& pts);

/// In-band quantization noise at the peak-SNR amplitude of an ideal run.
struct QuantizationBaseline {
    double sigma2_q = 0.0;
    double peak_snr_db = 0.0;
    double amplitude_dbfs = 0.0;
};
QuantizationBaseline quantization_baseline(const ModulatorConfig& cfg, const std::vector<double>& amp_grid,
                                           const ToneTest& test = {});

struct JitterNoise {
    double simulated = 0.0;    // in-band noise added by jitter, averaged over runs
    double closed_form = 0.0;
    double transition_rate = 0.0; // mean (v[n] - v[n-1])^2 / delta^2
};

/// Difference of in-band noise with and without jitter at a fixed amplitude, same seeds.
JitterNoise measure_jitter_noise(const ModulatorConfig& cfg, const TransferFunction& ntf, double amplitude_dbfs,
                                 const ToneTest& test);

} // namespace dsfl
