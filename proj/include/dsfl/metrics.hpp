#pragma once

#include "dsfl/signal.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace dsfl {

/// Analysis band of a spectrum plus the bins that hold the fundamental.
struct BandSpec {
    double f_low = 0.0;
    double f_high = 0.0;
    std::vector<std::size_t> signal_bins;
    std::size_t dc_guard_bins = 4;
};

/// Band [0, f_high] with the fundamental at `f_signal` occupying its bin +/- `guard` bins.
BandSpec make_band(const Spectrum& spec, double f_high, double f_signal, std::size_t guard = 2,
                   double f_low = 0.0);

/// In-band SNR. Bins of harmonics 2..n_harmonics of the fundamental (+/- the same guard
/// width) are treated as distortion and replaced by the mean noise power per bin.
double compute_snr(const Spectrum& spec, const BandSpec& band, int n_harmonics = 9);

struct Sndr {
    double in_band_db;  // all non-fundamental bins in the band
    double wideband_db; // all non-fundamental bins up to f_s/2, excluding the DC guard
};
Sndr compute_sndr(const Spectrum& spec, const BandSpec& band);

/// Sum of in-band bins that are neither signal nor DC guard.
double inband_noise_power(const Spectrum& spec, const BandSpec& band);
/// Sum of the signal bins.
double signal_power(const Spectrum& spec, const BandSpec& band);

struct SweepPoint {
    double input = 0.0;  // dBm or dBFS, as labelled by the caller
    double output = 0.0; // output power, same unit family
    double snr_db = 0.0;
    double sndr_db = 0.0;
    bool stable = true;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    /// Throws ArgumentError unless inputs are strictly increasing.
    void validate() const;
};

void write_sweep_csv(std::ostream& os, const SweepResult& r);

struct PeakSearch {
    double amplitude;
    double snr_db;
    std::size_t index;
};

/// `measure` returns the SNR for one grid point or std::nullopt if that point is unstable.
/// Throws MeasurementError if every point is unstable; ArgumentError if the grid is empty
/// or not ascending.
PeakSearch peak_snr_search(const std::vector<double>& amp_grid,
                           const std::function<std::optional<double>(double)>& measure);

struct P1dbResult {
    bool open_ended = false;  // no 1 dB compression inside the sweep
    double p1db_in = 0.0;     // input power at -1 dB deviation (valid unless open_ended)
    double p1db_out = 0.0;
    double slope = 0.0;       // fitted linear-region slope (dB/dB)
    double intercept = 0.0;   // fitted output at 0 input (linear gain in dB for dBm axes)
    double gain_db = 0.0;     // median output - input over the linear region
    std::size_t linear_points = 0;
};

/// Takes the longest contiguous run of points whose local slope stays within 1 +/- slope_tol
/// as the linear region, then interpolates where the gain first falls 1 dB below the median
/// gain of that region. The region is also fitted with a line for reporting.
/// Unstable points are ignored. Requires at least 5 usable points.
P1dbResult estimate_p1db(const SweepResult& sweep, double slope_tol = 0.05);

void write_p1db_report(std::ostream& os, const P1dbResult& r, double noise_floor_in_dbm,
                       double reference_impedance);

/// p1db_in - noise_floor_in. Throws ArgumentError unless p1db_in > noise_floor_in.
double dynamic_range(double p1db_in, double noise_floor_in);

/// Power (dBm) of a sine of the given peak amplitude (V) into `impedance` ohms.
double sine_dbm(double amplitude, double impedance = 50.0);
/// Peak amplitude (V) of a sine of the given power.
double dbm_to_amplitude(double dbm, double impedance = 50.0);
/// dBm of a mean-square voltage across `impedance`.
double mean_square_dbm(double mean_square, double impedance = 50.0);

struct ToneMeasurement {
    double snr_db = 0.0;
    Sndr sndr{};
    double signal_power = 0.0; // mean-square, linear
    double noise_power = 0.0;  // in-band, excluding signal and DC guard
    Spectrum spectrum;
};

/// Hann-windowed single-record measurement of a tone at `f_tone` against the band
/// [0, f_band], using the last `fft_length` samples of `sig`.
ToneMeasurement measure_tone(const RealSignal& sig, std::size_t fft_length, double f_band, double f_tone);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr);

} // namespace dsfl
