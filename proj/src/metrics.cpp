#include "dsfl/metrics.hpp"

#include "dsfl/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace dsfl {

namespace {

struct BandBins {
    std::size_t lo, hi; // inclusive
};

BandBins band_bins(const Spectrum& spec, const BandSpec& band) {
    if (!(band.f_low >= 0.0) || !(band.f_high > band.f_low) || band.f_high > spec.sample_rate / 2.0 * (1.0 + 1e-12))
        throw ArgumentError("band must satisfy 0 <= f_low < f_high <= f_s/2");
    const double bw = spec.bin_width();
    std::size_t lo = static_cast<std::size_t>(std::ceil(band.f_low / bw - 1e-9));
    std::size_t hi = static_cast<std::size_t>(std::floor(band.f_high / bw + 1e-9));
    lo = std::max(lo, band.dc_guard_bins);
    hi = std::min(hi, spec.psd.size() - 1);
    if (lo > hi) throw ArgumentError("band contains no bins after the DC guard");
    return {lo, hi};
}

void check_linear(const Spectrum& spec) {
    if (spec.scale != PsdScale::linear) throw ArgumentError("metrics require a linear-scale spectrum");
}

void check_signal(const Spectrum& spec, const BandSpec& band, const BandBins& bb) {
    if (band.signal_bins.empty()) throw ArgumentError("signal bin set is empty");
    for (auto k : band.signal_bins)
        if (k >= spec.psd.size()) throw ArgumentError("signal bin outside spectrum");
    const bool any_inside = std::any_of(band.signal_bins.begin(), band.signal_bins.end(),
                                        [&](std::size_t k) { return k >= bb.lo && k <= bb.hi; });
    if (!any_inside) throw ArgumentError("signal bins lie outside the analysis band");
}

} // namespace

BandSpec make_band(const Spectrum& spec, double f_high, double f_signal, std::size_t guard, double f_low) {
    BandSpec b;
    b.f_low = f_low;
    b.f_high = f_high;
    const std::size_t k0 = spec.bin_of(f_signal);
    const std::size_t first = k0 > guard ? k0 - guard : 0;
    for (std::size_t k = first; k <= std::min(k0 + guard, spec.psd.size() - 1); ++k) b.signal_bins.push_back(k);
    return b;
}

double signal_power(const Spectrum& spec, const BandSpec& band) {
    check_linear(spec);
    double p = 0.0;
    for (auto k : band.signal_bins) p += spec.psd.at(k);
    return p;
}

double inband_noise_power(const Spectrum& spec, const BandSpec& band) {
    check_linear(spec);
    const auto bb = band_bins(spec, band);
    const std::set<std::size_t> sig(band.signal_bins.begin(), band.signal_bins.end());
    double n = 0.0;
    for (std::size_t k = bb.lo; k <= bb.hi; ++k)
        if (!sig.count(k)) n += spec.psd[k];
    return n;
}

double compute_snr(const Spectrum& spec, const BandSpec& band, int n_harmonics) {
    check_linear(spec);
    const auto bb = band_bins(spec, band);
    check_signal(spec, band, bb);

    std::set<std::size_t> sig(band.signal_bins.begin(), band.signal_bins.end());
    std::set<std::size_t> excluded;
    const std::size_t k0 = band.signal_bins[band.signal_bins.size() / 2];
    const std::size_t half_width = band.signal_bins.size() / 2;
    const std::size_t n = spec.fft_length;
    for (int h = 2; h <= n_harmonics && k0 > 0; ++h) {
        std::size_t kh = (static_cast<std::size_t>(h) * k0) % n;
        if (kh > n / 2) kh = n - kh;
        for (std::size_t k = (kh > half_width ? kh - half_width : 0); k <= kh + half_width; ++k)
            if (!sig.count(k)) excluded.insert(k);
    }

    double noise = 0.0;
    std::size_t counted = 0, total = 0;
    for (std::size_t k = bb.lo; k <= bb.hi; ++k) {
        if (sig.count(k)) continue;
        ++total;
        if (excluded.count(k)) continue;
        noise += spec.psd[k];
        ++counted;
    }
    if (counted == 0) throw ArgumentError("no noise bins left in band");
    noise *= static_cast<double>(total) / static_cast<double>(counted);
    return 10.0 * std::log10(signal_power(spec, band) / noise);
}

Sndr compute_sndr(const Spectrum& spec, const BandSpec& band) {
    check_linear(spec);
    const auto bb = band_bins(spec, band);
    check_signal(spec, band, bb);
    const std::set<std::size_t> sig(band.signal_bins.begin(), band.signal_bins.end());
    double in_band = 0.0, wide = 0.0;
    for (std::size_t k = band.dc_guard_bins; k < spec.psd.size(); ++k) {
        if (sig.count(k)) continue;
        wide += spec.psd[k];
        if (k >= bb.lo && k <= bb.hi) in_band += spec.psd[k];
    }
    const double ps = signal_power(spec, band);
    return {10.0 * std::log10(ps / in_band), 10.0 * std::log10(ps / wide)};
}

void SweepResult::validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].input > points[i - 1].input))
            throw ArgumentError("sweep input axis must be strictly increasing");
}

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
    os << "input_dbm,output_dbm,snr_db,sndr_db,stable\n";
    for (const auto& p : r.points)
        os << format_double(p.input) << ',' << format_double(p.output) << ',' << format_double(p.snr_db) << ','
           << format_double(p.sndr_db) << ',' << (p.stable ? 1 : 0) << '\n';
}

PeakSearch peak_snr_search(const std::vector<double>& amp_grid,
                           const std::function<std::optional<double>(double)>& measure) {
    if (amp_grid.empty()) throw ArgumentError("amplitude grid is empty");
    for (std::size_t i = 1; i < amp_grid.size(); ++i)
        if (!(amp_grid[i] > amp_grid[i - 1])) throw ArgumentError("amplitude grid must be ascending");
    std::optional<PeakSearch> best;
    for (std::size_t i = 0; i < amp_grid.size(); ++i) {
        const auto snr = measure(amp_grid[i]);
        if (!snr) continue;
        if (!best || *snr > best->snr_db) best = PeakSearch{amp_grid[i], *snr, i};
    }
    if (!best) throw MeasurementError("peak search failed: every grid point was unstable");
    return *best;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("line fit needs at least two (x, y) pairs");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ArgumentError("line fit needs distinct x values");
    const double s = sxy / sxx;
    if (intercept) *intercept = my - s * mx;
    return s;
}

P1dbResult estimate_p1db(const SweepResult& sweep, double slope_tol) {
    sweep.validate();
    std::vector<double> in, out;
    for (const auto& p : sweep.points)
        if (p.stable) {
            in.push_back(p.input);
            out.push_back(p.output);
        }
    if (in.size() < 5) throw ArgumentError("P1dB estimation needs at least 5 stable sweep points");

    // longest run of consecutive segments whose slope is 1 within tolerance
    std::size_t best_start = 0, best_len = 0;
    for (std::size_t i = 0; i + 1 < in.size();) {
        std::size_t j = i;
        while (j + 1 < in.size() && std::abs((out[j + 1] - out[j]) / (in[j + 1] - in[j]) - 1.0) <= slope_tol) ++j;
        if (j - i > best_len) {
            best_len = j - i;
            best_start = i;
        }
        i = (j == i) ? i + 1 : j;
    }
    if (best_len == 0) throw MeasurementError("no linear region found in sweep");

    std::vector<double> fx(in.begin() + static_cast<long>(best_start),
                           in.begin() + static_cast<long>(best_start + best_len + 1));
    std::vector<double> fy(out.begin() + static_cast<long>(best_start),
                           out.begin() + static_cast<long>(best_start + best_len + 1));
    P1dbResult r;
    r.slope = fit_slope(fx, fy, &r.intercept);
    r.linear_points = fx.size();

    // Small-signal gain as the median per-point gain of the run; a least-squares line would
    // be tilted by run points already at the onset of compression.
    std::vector<double> g(fx.size());
    for (std::size_t i = 0; i < fx.size(); ++i) g[i] = fy[i] - fx[i];
    std::nth_element(g.begin(), g.begin() + static_cast<long>(g.size() / 2), g.end());
    r.gain_db = g[g.size() / 2];

    auto dev = [&](std::size_t i) { return out[i] - in[i] - r.gain_db; };
    for (std::size_t i = best_start + 1; i < in.size(); ++i) {
        const double d1 = dev(i);
        if (d1 <= -1.0) {
            const double d0 = dev(i - 1);
            const double t = (d0 - (-1.0)) / (d0 - d1);
            r.p1db_in = in[i - 1] + t * (in[i] - in[i - 1]);
            r.p1db_out = r.p1db_in + r.gain_db - 1.0;
            return r;
        }
    }
    r.open_ended = true;
    return r;
}

void write_p1db_report(std::ostream& os, const P1dbResult& r, double noise_floor_in_dbm, double reference_impedance) {
    os << "# powers in dBm into " << format_double(reference_impedance) << " ohm; floor is input-referred\n";
    os << "open_ended=" << (r.open_ended ? "true" : "false") << '\n';
    os << "linear_fit_slope=" << format_double(r.slope) << '\n';
    os << "linear_fit_gain_db=" << format_double(r.intercept) << '\n';
    os << "linear_fit_points=" << r.linear_points << '\n';
    os << "small_signal_gain_db=" << format_double(r.gain_db) << '\n';
    os << "noise_floor_in_dbm=" << format_double(noise_floor_in_dbm) << '\n';
    if (!r.open_ended) {
        os << "p1db_in_dbm=" << format_double(r.p1db_in) << '\n';
        os << "p1db_out_dbm=" << format_double(r.p1db_out) << '\n';
        if (r.p1db_in > noise_floor_in_dbm)
            os << "dynamic_range_db=" << format_double(dynamic_range(r.p1db_in, noise_floor_in_dbm)) << '\n';
    }
}

double dynamic_range(double p1db_in, double noise_floor_in) {
    if (!(p1db_in > noise_floor_in)) throw ArgumentError("P1dB must lie above the noise floor");
    return p1db_in - noise_floor_in;
}

double sine_dbm(double amplitude, double impedance) {
    return 10.0 * std::log10(amplitude * amplitude / (2.0 * impedance) / 1e-3);
}

double dbm_to_amplitude(double dbm, double impedance) {
    return std::sqrt(2.0 * impedance * 1e-3 * std::pow(10.0, dbm / 10.0));
}

double mean_square_dbm(double mean_square, double impedance) {
    return 10.0 * std::log10(mean_square / impedance / 1e-3);
}

ToneMeasurement measure_tone(const RealSignal& sig, std::size_t fft_length, double f_band, double f_tone) {
    if (sig.size() < fft_length) throw ArgumentError("record shorter than fft_length");
    std::vector<double> tail(sig.samples().end() - static_cast<long>(fft_length), sig.samples().end());
    ToneMeasurement m;
    m.spectrum = estimate_psd(RealSignal(std::move(tail), sig.sample_rate()), fft_length, Window::hann, 1);
    const BandSpec band = make_band(m.spectrum, f_band, f_tone);
    m.snr_db = compute_snr(m.spectrum, band);
    m.sndr = compute_sndr(m.spectrum, band);
    m.signal_power = signal_power(m.spectrum, band);
    m.noise_power = inband_noise_power(m.spectrum, band);
    return m;
}

} // namespace dsfl
