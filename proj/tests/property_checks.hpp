#pragma once

// Measurements shared by the property tests and the acceptance runner.

#include "dsfl/fft.hpp"
#include "dsfl/kspace.hpp"
#include "dsfl/link.hpp"
#include "dsfl/metrics.hpp"
#include "dsfl/modulator.hpp"
#include "dsfl/ntf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dsfl::checks {

inline RealSignal sine_input(const ModulatorConfig& m, double dbfs, std::size_t n) {
    const double fb = m.f_s / (2.0 * m.osr);
    return generate_tone(coherent_frequency(fb / 3.0, n, m.f_s), std::pow(10.0, dbfs / 20.0) * m.delta / 2.0, 0.0, n, m.f_s);
}

// Number of output samples that are not exactly +/- delta/2.
inline std::size_t alphabet_violations(const ModulatorConfig& m, double dbfs, std::size_t n = 1 << 14) {
    const auto r = simulate(m, sine_input(m, dbfs, n));
    return static_cast<std::size_t>(std::count_if(r.bits.begin(), r.bits.end(), [&](double b) {
        return b != m.delta / 2.0 && b != -m.delta / 2.0;
    }));
}

// |mean| of the bitstream for zero input, in units of delta/2.
inline double zero_input_mean(const ModulatorConfig& m, std::size_t n = 1 << 16) {
    const auto r = simulate(m, RealSignal(std::vector<double>(n, 0.0), m.f_s));
    return std::abs(std::accumulate(r.bits.begin(), r.bits.end(), 0.0) / double(r.bits.size())) / (m.delta / 2.0);
}

// Fitted in-band noise slope in dB/decade of OSR for the pure N-th order difference NTF.
inline double noise_osr_slope(int order, std::size_t n = 1 << 16) {
    TransferFunction ntf;
    ntf.zeros.assign(order, cplx(1.0, 0.0));
    ntf.poles.assign(order, cplx(0.0, 0.0));
    std::vector<double> x, y;
    for (double osr : {16.0, 32.0, 64.0, 128.0, 256.0}) {
        const double fb = 1.0 / (2.0 * osr);
        const double ft = coherent_frequency(fb / 3.0, n, 1.0);
        const auto u = generate_tone(ft, 0.5, 0.0, n + 256, 1.0);
        const auto run = simulate_ntf_loop(ntf, u.samples());
        const auto m = measure_tone(RealSignal(run.v, 1.0), n, fb, ft);
        x.push_back(std::log10(osr));
        y.push_back(10.0 * std::log10(m.noise_power));
    }
    return fit_slope(x, y);
}

// |10 log10(sum of PSD bins / time-domain power)| for a Hann-windowed, averaged estimate.
inline double parseval_error_db(std::uint64_t seed, std::size_t n = 1 << 15) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> f(0.01, 0.45), a(0.1, 1.0);
    auto s = generate_tone(f(rng), a(rng), 0.3, n, 1.0);
    s = add_white_noise(s, 0.05 * a(rng), seed);
    const auto psd = estimate_psd(s, n / 8, Window::hann, 8);
    return std::abs(10.0 * std::log10(psd.total_power() / s.power()));
}

// Wanted over image sideband power after quadrature down-conversion of an upper-sideband tone.
inline double image_rejection_db(double offset_hz = 50e3) {
    LinkConfig l;
    l.mixer_mode = MixerMode::quadrature;
    l.f_lo = 120e6;
    const double rate = 480e6;
    const std::size_t n = 1 << 16;
    const std::size_t m = n / 2; // analysed tail, clear of the filter transient
    const double df = std::round(offset_hz * m / rate) * rate / m;
    const auto bb = mix_down(generate_tone(l.f_lo + df, 0.1, 0.0, n, rate), l);
    const auto spec = fft::transform(std::vector<cplx>(bb.samples().end() - m, bb.samples().end()), true);
    const auto k = static_cast<std::size_t>(std::llround(df * m / rate));
    return 10.0 * std::log10(std::norm(spec[k]) / std::norm(spec[m - k]));
}

struct BitErrors {
    std::size_t compared = 0;
    std::size_t errors = 0;
    bool violation = false;
};

// Modulator bits through the optical channel and comparator on a noiseless fiber.
inline BitErrors ideal_channel_ber(std::size_t n_bits = 1 << 16, double fiber_length = 2.0) {
    OpticalConfig opt;
    opt.tia_bandwidth = 0.0;
    auto m = design_modulator(2, 50.0, 20e6, LoopKind::discrete_time);
    const auto bits = simulate(m, sine_input(m, -6.0, n_bits + 64));
    const double delay = fiber_delay_nominal * fiber_length;
    const auto rt = comparator_retime(ook_channel(bits, opt, delay), m.f_s, delay, fiber_length);
    BitErrors out;
    out.violation = rt.violation;
    for (std::size_t i = 0; i < rt.bits.bits.size() && i + rt.bit_offset < bits.bits.size(); ++i) {
        ++out.compared;
        out.errors += (rt.bits.bits[i] > 0) != (bits.bits[i + rt.bit_offset] > 0);
    }
    return out;
}

// Max |k - F(F^-1(k))| for a random grid.
inline double kspace_roundtrip_error(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    KSpaceData k;
    k.rows = rows;
    k.cols = cols;
    k.center_row = rows / 2;
    k.center_col = cols / 2;
    k.data.resize(rows * cols);
    for (auto& v : k.data) v = {g(rng), g(rng)};
    const auto back = image_to_kspace(reconstruct_image(k), k.dwell_time);
    double err = 0.0;
    for (std::size_t i = 0; i < k.data.size(); ++i) err = std::max(err, std::abs(back.data[i] - k.data[i]));
    return err;
}

// Two runs with every noise source enabled and the same seeds.
inline bool seeded_reruns_identical() {
    auto m = design_modulator(4, 50.0, 100e6, LoopKind::continuous_time);
    m.thermal_noise_variance = 1e-8;
    m.jitter.sigma_t = 1.2e-12;
    m.seed = 7;
    const auto u = sine_input(m, -6.0, 1 << 13);
    const auto ct = [&] {
        std::vector<double> x;
        for (double v : u.samples())
            for (int r = 0; r < 4; ++r) x.push_back(v);
        return RealSignal(std::move(x), 4.0 * m.f_s);
    }();
    if (simulate(m, ct).bits != simulate(m, ct).bits) return false;

    LinkConfig l;
    l.optical.detector_noise_variance = 1e-4;
    l.output_noise_dbm_hz = -150.0;
    l.lo_phase_noise = {{1e3, -90.0}, {1e6, -130.0}};
    auto lm = design_modulator(2, 20e6 / (2.0 * l.baseband_edge()), 20e6, LoopKind::discrete_time);
    lm.thermal_noise_variance = 1e-7;
    const double rate = rf_sample_rate(l, lm.f_s);
    const auto rf = generate_tone(l.f_l, dbm_to_amplitude(-20.0), 0.0, 16 * 1024, rate);
    const auto a = run_chain(rf, l, lm, false), b = run_chain(rf, l, lm, false);
    return a.output.samples() == b.output.samples() && a.transmitted[0].bits == b.transmitted[0].bits;
}

} // namespace dsfl::checks
