#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dsfl {

using cplx = std::complex<double>;

/// Uniformly sampled real waveform. Amplitudes are in full-scale units
/// (the 1-bit output alphabet is +/-1, i.e. full scale = 1.0).
class RealSignal {
public:
    /// Throws ArgumentError if sample_rate <= 0, samples is empty, or any sample is non-finite.
    RealSignal(std::vector<double> samples, double sample_rate);

    const std::vector<double>& samples() const noexcept { return samples_; }
    double sample_rate() const noexcept { return sample_rate_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double operator[](std::size_t i) const { return samples_[i]; }
    double duration() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_; }

    /// Mean-square value.
    double power() const;

private:
    std::vector<double> samples_;
    double sample_rate_;
};

/// Uniformly sampled complex baseband waveform.
class ComplexSignal {
public:
    ComplexSignal(std::vector<cplx> samples, double sample_rate);

    const std::vector<cplx>& samples() const noexcept { return samples_; }
    double sample_rate() const noexcept { return sample_rate_; }
    std::size_t size() const noexcept { return samples_.size(); }
    cplx operator[](std::size_t i) const { return samples_[i]; }

    double power() const;
    RealSignal real_part() const;
    RealSignal imag_part() const;

private:
    std::vector<cplx> samples_;
    double sample_rate_;
};

enum class Window { rectangular, hann };

enum class PsdScale { linear, dbfs };

/// One-sided averaged periodogram. `psd` holds mean-square power per bin
/// (DC and Nyquist bins unfolded, all others doubled), so that the sum of all
/// bins equals the time-domain mean-square power. `enbw_bins` records how many
/// bins a single tone spreads its power over.
struct Spectrum {
    std::vector<double> bin_freqs;
    std::vector<double> psd;
    PsdScale scale = PsdScale::linear;
    Window window = Window::rectangular;
    std::size_t fft_length = 0;
    std::size_t n_averages = 0;
    double enbw_bins = 1.0;
    double sample_rate = 0.0;

    double bin_width() const { return sample_rate / static_cast<double>(fft_length); }
    std::size_t bin_of(double freq) const;
    double total_power() const;
    /// Copy of this spectrum in dBFS (full scale sine power 0.5 = 0 dBFS). No-op if already dB.
    Spectrum to_dbfs() const;
};

double window_enbw(Window w);

/// amplitude*cos(2*pi*freq*i/sample_rate + phase). Throws if freq >= sample_rate/2 (aliasing).
RealSignal generate_tone(double freq, double amplitude, double phase, std::size_t n, double sample_rate);

/// Frequency snapped to an odd integer number of cycles in `record_length` samples,
/// nearest to `target`. Used for leakage-free test stimuli.
double coherent_frequency(double target, std::size_t record_length, double sample_rate);

/// Adds zero-mean Gaussian noise of the given variance; deterministic for a fixed seed.
RealSignal add_white_noise(const RealSignal& sig, double variance, std::uint64_t seed);

/// Non-overlapping Welch estimate. Requires fft_length a power of two and
/// sig.size() >= fft_length * n_averages. Segments are taken from the start.
Spectrum estimate_psd(const RealSignal& sig, std::size_t fft_length, Window window, std::size_t n_averages = 1);

/// Writes `# sample_rate_hz=<rate>` then one sample per row.
void write_signal_csv(std::ostream& os, const RealSignal& sig);
void write_signal_csv(std::ostream& os, const ComplexSignal& sig);
RealSignal read_real_signal_csv(std::istream& is);
ComplexSignal read_complex_signal_csv(std::istream& is);

/// Columns `freq_hz,psd_db` (dBFS).
void write_spectrum_csv(std::ostream& os, const Spectrum& spec);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace dsfl
