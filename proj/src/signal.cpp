#include "dsfl/signal.hpp"

#include "dsfl/error.hpp"
#include "dsfl/fft.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace dsfl {

namespace {

void check_rate_and_length(double sample_rate, std::size_t n) {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
        throw ArgumentError("sample_rate must be positive and finite");
    if (n == 0)
        throw ArgumentError("signal must contain at least one sample");
}

std::vector<double> window_coefficients(Window w, std::size_t n) {
    std::vector<double> c(n, 1.0);
    if (w == Window::hann) {
        // periodic Hann: exact ENBW of 1.5 bins and exact 3-bin support for integer-bin tones
        for (std::size_t i = 0; i < n; ++i)
            c[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return c;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
        throw ParseError("invalid number '" + s + "'", line);
    return v;
}

double read_rate_header(std::istream& is, std::size_t& line) {
    std::string header;
    if (!std::getline(is, header))
        throw ParseError("missing '# sample_rate_hz=' header", 1);
    line = 1;
    const std::string key = "# sample_rate_hz=";
    if (header.rfind(key, 0) != 0)
        throw ParseError("missing '# sample_rate_hz=' header", 1);
    return parse_double(header.substr(key.size()), 1);
}

} // namespace

RealSignal::RealSignal(std::vector<double> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
    check_rate_and_length(sample_rate_, samples_.size());
    for (double s : samples_)
        if (!std::isfinite(s)) throw ArgumentError("signal contains a non-finite sample");
}

double RealSignal::power() const {
    double acc = 0.0;
    for (double s : samples_) acc += s * s;
    return acc / static_cast<double>(samples_.size());
}

ComplexSignal::ComplexSignal(std::vector<cplx> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
    check_rate_and_length(sample_rate_, samples_.size());
    for (const auto& s : samples_)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw ArgumentError("signal contains a non-finite sample");
}

double ComplexSignal::power() const {
    double acc = 0.0;
    for (const auto& s : samples_) acc += std::norm(s);
    return acc / static_cast<double>(samples_.size());
}

RealSignal ComplexSignal::real_part() const {
    std::vector<double> r(samples_.size());
    std::transform(samples_.begin(), samples_.end(), r.begin(), [](cplx c) { return c.real(); });
    return RealSignal(std::move(r), sample_rate_);
}

RealSignal ComplexSignal::imag_part() const {
    std::vector<double> r(samples_.size());
    std::transform(samples_.begin(), samples_.end(), r.begin(), [](cplx c) { return c.imag(); });
    return RealSignal(std::move(r), sample_rate_);
}

std::size_t Spectrum::bin_of(double freq) const {
    const double k = std::round(freq / bin_width());
    if (k < 0.0) return 0;
    return std::min(static_cast<std::size_t>(k), psd.size() - 1);
}

double Spectrum::total_power() const {
    if (scale != PsdScale::linear) throw ArgumentError("total_power requires a linear spectrum");
    return std::accumulate(psd.begin(), psd.end(), 0.0);
}

Spectrum Spectrum::to_dbfs() const {
    Spectrum out = *this;
    if (scale == PsdScale::dbfs) return out;
    for (double& p : out.psd) p = 10.0 * std::log10(std::max(p, 1e-300) / 0.5);
    out.scale = PsdScale::dbfs;
    return out;
}

double window_enbw(Window w) { return w == Window::hann ? 1.5 : 1.0; }

RealSignal generate_tone(double freq, double amplitude, double phase, std::size_t n, double sample_rate) {
    check_rate_and_length(sample_rate, n);
    if (freq < 0.0) throw ArgumentError("tone frequency must be non-negative");
    if (freq >= sample_rate / 2.0)
        throw ArgumentError("tone frequency at or above Nyquist would alias");
    std::vector<double> s(n);
    const double w = 2.0 * std::numbers::pi * freq / sample_rate;
    for (std::size_t i = 0; i < n; ++i)
        s[i] = amplitude * std::cos(w * static_cast<double>(i) + phase);
    return RealSignal(std::move(s), sample_rate);
}

double coherent_frequency(double target, std::size_t record_length, double sample_rate) {
    const double bw = sample_rate / static_cast<double>(record_length);
    double cycles = std::round(target / bw);
    if (std::fmod(cycles, 2.0) == 0.0) cycles += (target / bw >= cycles) ? 1.0 : -1.0;
    if (cycles < 1.0) cycles = 1.0;
    return cycles * bw;
}

RealSignal add_white_noise(const RealSignal& sig, double variance, std::uint64_t seed) {
    if (variance < 0.0 || !std::isfinite(variance)) throw ArgumentError("noise variance must be >= 0");
    std::vector<double> s = sig.samples();
    if (variance > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(variance));
        for (double& x : s) x += nd(rng);
    }
    return RealSignal(std::move(s), sig.sample_rate());
}

Spectrum estimate_psd(const RealSignal& sig, std::size_t fft_length, Window window, std::size_t n_averages) {
    if (!fft::is_power_of_two(fft_length)) throw ArgumentError("fft_length must be a power of two");
    if (n_averages == 0) throw ArgumentError("n_averages must be >= 1");
    if (sig.size() < fft_length * n_averages)
        throw ArgumentError("signal shorter than fft_length * n_averages");

    const auto w = window_coefficients(window, fft_length);
    double s2 = 0.0;
    for (double c : w) s2 += c * c;

    const std::size_t nbins = fft_length / 2 + 1;
    std::vector<double> acc(nbins, 0.0);
    std::vector<double> seg(fft_length);
    const auto& x = sig.samples();
    for (std::size_t a = 0; a < n_averages; ++a) {
        const std::size_t off = a * fft_length;
        for (std::size_t i = 0; i < fft_length; ++i) seg[i] = x[off + i] * w[i];
        const auto X = fft::forward_real(seg);
        for (std::size_t k = 0; k < nbins; ++k) acc[k] += std::norm(X[k]);
    }

    Spectrum sp;
    sp.fft_length = fft_length;
    sp.n_averages = n_averages;
    sp.window = window;
    sp.enbw_bins = window_enbw(window);
    sp.sample_rate = sig.sample_rate();
    sp.bin_freqs.resize(nbins);
    sp.psd.resize(nbins);
    const double norm = static_cast<double>(fft_length) * s2 * static_cast<double>(n_averages);
    for (std::size_t k = 0; k < nbins; ++k) {
        sp.bin_freqs[k] = static_cast<double>(k) * sig.sample_rate() / static_cast<double>(fft_length);
        const double fold = (k == 0 || k == nbins - 1) ? 1.0 : 2.0;
        sp.psd[k] = fold * acc[k] / norm;
    }
    return sp;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_signal_csv(std::ostream& os, const RealSignal& sig) {
    os << "# sample_rate_hz=" << format_double(sig.sample_rate()) << '\n';
    for (double s : sig.samples()) os << format_double(s) << '\n';
}

void write_signal_csv(std::ostream& os, const ComplexSignal& sig) {
    os << "# sample_rate_hz=" << format_double(sig.sample_rate()) << '\n';
    for (const auto& s : sig.samples()) os << format_double(s.real()) << ',' << format_double(s.imag()) << '\n';
}

RealSignal read_real_signal_csv(std::istream& is) {
    std::size_t line = 0;
    const double rate = read_rate_header(is, line);
    std::vector<double> s;
    std::string row;
    while (std::getline(is, row)) {
        ++line;
        if (row.empty()) continue;
        s.push_back(parse_double(row, line));
    }
    if (s.empty()) throw ParseError("signal file has no samples", line);
    return RealSignal(std::move(s), rate);
}

ComplexSignal read_complex_signal_csv(std::istream& is) {
    std::size_t line = 0;
    const double rate = read_rate_header(is, line);
    std::vector<cplx> s;
    std::string row;
    while (std::getline(is, row)) {
        ++line;
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string::npos) throw ParseError("expected 're,im'", line);
        s.emplace_back(parse_double(row.substr(0, comma), line), parse_double(row.substr(comma + 1), line));
    }
    if (s.empty()) throw ParseError("signal file has no samples", line);
    return ComplexSignal(std::move(s), rate);
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spec) {
    const Spectrum db = spec.to_dbfs();
    os << "freq_hz,psd_db\n";
    for (std::size_t k = 0; k < db.psd.size(); ++k)
        os << format_double(db.bin_freqs[k]) << ',' << format_double(db.psd[k]) << '\n';
}

} // namespace dsfl
