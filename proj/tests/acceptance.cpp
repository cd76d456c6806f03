// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "property_checks.hpp"

#include "dsfl/ciff.hpp"
#include "dsfl/experiments.hpp"
#include "dsfl/kspace.hpp"
#include "dsfl/link.hpp"
#include "dsfl/ntf.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <string>

using namespace dsfl;

namespace {

int failures = 0;

bool within(double v, double target, double tol) { return std::isfinite(v) && std::abs(v - target) <= tol; }

void verdict(int id, bool ok, const std::string& detail) {
    std::printf("%s [%d] %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void info(int id, const std::string& detail) {
    std::printf("     [%d] info: %s\n", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// A criterion that throws counts as failed rather than aborting the run.
void guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, false, std::string("threw: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void fig5() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cells = sweep_peak_sqnr({1, 2, 3, 4, 5, 6, 7, 8}, {8, 16, 32, 50, 64, 128});
    const double runtime = seconds_since(t0);
    auto at = [&](int n, double osr) {
        for (const auto& c : cells)
            if (c.order == n && c.osr == osr && c.ok) return c.peak_sqnr_db;
        return std::numeric_limits<double>::quiet_NaN();
    };
    std::size_t failed = 0;
    for (const auto& c : cells) failed += !c.ok;
    info(1, fmt("%.0f cells, %.0f without a stable design", double(cells.size()), double(failed)));
    const double n4 = at(4, 50);
    verdict(1, within(n4, 95.0, 3.0), fmt("N=4 OSR=50 peak SQNR %.2f dB (95 +/- 3)", n4));
    const double g34 = at(4, 50) - at(3, 50), g45 = at(5, 50) - at(4, 50);
    verdict(1, std::isfinite(g34) && std::isfinite(g45) && g45 < g34,
            fmt("order saturation at OSR=50: N3->4 %+.2f dB, N4->5 %+.2f dB", g34, g45));
    verdict(1, runtime < 600.0, fmt("sweep runtime %.1f s (< 600 s)", runtime));
}

void second_order() {
    NtfSpec s;
    s.order = 2;
    s.osr = 20;
    const auto p20 = predict_sqnr(synthesize_ntf(s), 20.0);
    s.osr = 40;
    const auto p40 = predict_sqnr(synthesize_ntf(s), 40.0);
    verdict(2, within(p20.peak_sqnr_db, 52.0, 3.0), fmt("N=2 OSR=20 peak SQNR %.2f dB (52 +/- 3)", p20.peak_sqnr_db));
    // quadrature (linear-model) SQNR at the stable amplitude limit, the quantity behind the 15 dB rule
    const double lin = p40.linear_sqnr_db - p20.linear_sqnr_db;
    verdict(2, within(lin, 15.0, 1.5), fmt("N=2 OSR 20->40 linear SQNR gain %.2f dB (15 +/- 1.5)", lin));
    info(2, fmt("simulated 1-bit peak SQNR gain %.2f dB (%.2f -> %.2f dB)", p40.peak_sqnr_db - p20.peak_sqnr_db,
                p20.peak_sqnr_db, p40.peak_sqnr_db));
}

void stf() {
    const auto c = realize_ciff(synthesize_ntf({4, 50}));
    const double peak = compute_stf(c).peak_magnitude;
    const double db = 20.0 * std::log10(peak);
    verdict(3, within(peak, 2.51, 0.05) && within(db, 8.3, 0.2),
            fmt("N=4 CIFF STF peak %.4f = %.2f dB (2.51 +/- 0.05, 8.3 +/- 0.2 dB)", peak, db));
}

void jitter() {
    auto ideal = design_modulator(4, 50.0, 100e6, LoopKind::continuous_time);
    ToneTest test;
    test.f_band = ideal.f_s / (2.0 * ideal.osr);
    const auto amps = amplitude_grid(-20.0, 0.0, 0.5);
    const auto q = quantization_baseline(ideal, amps, test);
    info(4, fmt("ideal peak SQNR %.2f dB, in-band quantization noise %.3g", q.peak_snr_db, q.sigma2_q));

    auto thermal = ideal;
    thermal.thermal_noise_variance = 4.0 * q.sigma2_q;
    const auto pt = peak_point(sweep_amplitude(thermal, amps, test));
    auto jittered = thermal;
    jittered.jitter.sigma_t = 1.2e-12;
    const auto pj = peak_point(sweep_amplitude(jittered, amps, test));

    verdict(4, within(pt.snr_db, 88.0, 2.0), fmt("jitter-free thermal-limited SNR_max %.2f dB (88 +/- 2)", pt.snr_db));
    verdict(4, within(pj.snr_db, 81.7, 1.5), fmt("SNR_max with 1.2 ps jitter %.2f dB (81.7 +/- 1.5)", pj.snr_db));
    const double deg = pt.snr_db - pj.snr_db;
    verdict(4, within(deg, 3.3, 1.0), fmt("jitter degradation %.2f dB (3.3 +/- 1)", deg));

    ToneTest many = test;
    many.runs = 16;
    const auto jn = measure_jitter_noise(jittered, synthesize_ntf({4, 50}), pj.amplitude_dbfs, many);
    const double gap = 10.0 * std::log10(jn.simulated / jn.closed_form);
    verdict(4, within(gap, 0.0, 1.0),
            fmt("simulated jitter noise vs closed form %+.2f dB over 16 runs (within 1 dB)", gap));
    info(4, fmt("mean squared feedback step %.3f (white-noise model 1.50)", 4.0 * jn.transition_rate));
}

void clock_and_tc() {
    auto m = design_modulator(4, 50.0, 100e6, LoopKind::continuous_time);
    ToneTest test;
    test.f_band = m.f_s / (2.0 * m.osr);
    const auto amps = amplitude_grid(-20.0, 0.0, 0.5);
    const auto pts = sweep_clock(m, {0.7, 1.0}, amps, test);
    const double drop = pts[1].peak_sndr_db - pts[0].peak_sndr_db;
    verdict(5, std::isfinite(drop) && drop > 40.0,
            fmt("f_s_actual = 0.7 f_s: peak SNDR %.2f dB vs %.2f dB nominal, drop %.1f dB (> 40)", pts[0].peak_sndr_db,
                pts[1].peak_sndr_db, drop));

    const std::vector<double> neg = {0.0, -0.05, -0.1, -0.15, -0.2, -0.25, -0.3};
    const std::vector<double> pos = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
    std::vector<double> dk(neg.rbegin(), neg.rend());
    dk.insert(dk.end(), pos.begin() + 1, pos.end());
    const auto cells = sweep_tc_error(m, dk, amps, test);
    std::string row;
    for (double d : dk) row += fmt(" %+.2f:%.1f/%.1f", d, peak_sqnr_for(cells, d), max_stable_amplitude(cells, d));
    info(5, "dk/k:peak SQNR/max stable dBFS" + row);

    // dk/k < 0: SQNR falls step by step while the stable range is kept
    bool gradual = true;
    for (std::size_t i = 1; i < neg.size(); ++i) {
        gradual &= peak_sqnr_for(cells, neg[i]) <= peak_sqnr_for(cells, neg[i - 1]);
        gradual &= max_stable_amplitude(cells, neg[i]) >= max_stable_amplitude(cells, 0.0);
    }
    verdict(5, gradual, "dk/k < 0: peak SQNR non-increasing with |dk/k|, stable amplitude not reduced");

    // dk/k > 0: the largest stable amplitude shrinks
    bool shrinking = true;
    for (std::size_t i = 1; i < pos.size(); ++i)
        shrinking &= max_stable_amplitude(cells, pos[i]) <= max_stable_amplitude(cells, pos[i - 1]);
    shrinking &= max_stable_amplitude(cells, pos.back()) < max_stable_amplitude(cells, 0.0);
    verdict(5, shrinking, "dk/k > 0: max stable amplitude non-increasing and below nominal at +0.3");
}

void link_dr() {
    // bench chain: 20 MHz second-order DT modulator, -5 dBm input compression,
    // 7 dB output gain, -79 dBm/Hz receiver floor
    LinkConfig l;
    const double a = dbm_to_amplitude(-5.0, l.impedance);
    l.nonlinearity.a3 = -(4.0 / 3.0) * (1.0 - std::pow(10.0, -1.0 / 20.0)) / (a * a);
    l.dac_full_scale = std::pow(10.0, 7.0 / 20.0);
    l.output_noise_dbm_hz = -79.0;
    l.fiber_length = 2.0;
    l.optical.tia_bandwidth = 70e6;
    l.seed = 11;
    const double f_s = 20e6;
    auto m = design_modulator(2, f_s / (2.0 * l.baseband_edge()), f_s, LoopKind::discrete_time);
    m.thermal_noise_variance = 1e-7;
    m.seed = 12;

    std::vector<double> grid;
    for (double p = -86.0; p <= 6.0; p += 2.0) grid.push_back(p);
    const auto rep = link_input_sweep(l, m, grid, 1 << 16, 1.0);
    verdict(6, !rep.p1db.open_ended && within(rep.p1db.p1db_in, -5.0, 0.5),
            fmt("input P1dB %.2f dBm (-5 +/- 0.5)", rep.p1db.p1db_in));
    verdict(6, within(rep.dynamic_range_db, 81.0, 1.0),
            fmt("dynamic range %.2f dB (81 +/- 1); output floor %.2f dBm, input floor %.2f dBm in 1 Hz", rep.dynamic_range_db,
                rep.noise_floor_out_dbm, rep.noise_floor_in_dbm));

    // single tone at -20 dBm for the in-band SNDR of the same chain
    const double rate = rf_sample_rate(l, m.f_s_actual);
    const std::size_t n = static_cast<std::size_t>(std::llround(rate / f_s)) << 16;
    const double f_tone = 4.0 * std::round(l.f_l * double(n) / (4.0 * rate)) * rate / double(n);
    const auto res = run_chain(generate_tone(f_tone, dbm_to_amplitude(-20.0), 0.0, n + n / 4, rate), l, m, false);
    const auto tone = measure_link_output(res.output, l, f_tone, 1);
    info(6, fmt("-20 dBm tone: in-band SNR %.2f dB, bit errors %.0f", tone.snr_db, double(res.bit_errors)));
}

void properties() {
    std::size_t bad = 0;
    for (int order : {1, 2, 3, 4, 5})
        for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time})
            bad += checks::alphabet_violations(design_modulator(order, 50.0, 1e6, kind), -6.0, 1 << 14);
    verdict(7, bad == 0, fmt("bitstream alphabet: %.0f samples off +/-delta/2", double(bad)));

    double worst_mean = 0.0;
    for (int order : {1, 2, 4})
        for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time})
            worst_mean = std::max(worst_mean, checks::zero_input_mean(design_modulator(order, 50.0, 1e6, kind)));
    verdict(7, worst_mean < 1e-2, fmt("zero-input balance: worst |mean| %.2e (< 1e-2)", worst_mean));

    for (int n : {1, 2}) {
        const double slope = checks::noise_osr_slope(n);
        const double want = -(2.0 * n + 1.0) * 10.0;
        verdict(7, within(slope, want, 2.0), fmt("N=%.0f in-band noise slope %.2f dB/decade (%.0f +/- 2)", n, slope, want));
    }

    double parseval = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) parseval = std::max(parseval, checks::parseval_error_db(seed));
    verdict(7, parseval <= 0.1, fmt("Parseval: worst PSD power error %.4f dB (<= 0.1)", parseval));

    const double irr = checks::image_rejection_db();
    verdict(7, irr >= 60.0, fmt("quadrature image rejection %.1f dB (>= 60)", irr));

    const auto ber = checks::ideal_channel_ber(1 << 16);
    verdict(7, ber.errors == 0 && !ber.violation && ber.compared >= (1u << 16) - 8,
            fmt("ideal channel: %.0f errors in %.0f bits", double(ber.errors), double(ber.compared)));

    const double rt = std::max(checks::kspace_roundtrip_error(64, 64, 1), checks::kspace_roundtrip_error(24, 40, 2));
    verdict(7, rt <= 1e-9, fmt("k-space round trip max error %.2e (<= 1e-9)", rt));

    verdict(7, checks::seeded_reruns_identical(), "seeded reruns bit identical");
}

void fidelity() {
    const auto k = generate_phantom(32, 32, default_phantom());
    const double f_s = 20e6;
    LinkConfig link;
    link.mixer_mode = MixerMode::quadrature;
    link.f_l = link.f_lo = 119.8e6;
    link.f_b = 2.0 / k.dwell_time;
    const double osr = f_s / link.f_b;

    const auto amps = amplitude_grid(-12.0, -2.0, 1.0);
    // thermal noise that brings the peak SNR of `m` down to `snr_db`
    auto limited = [&](ModulatorConfig m, double snr_db) {
        const auto q = quantization_baseline(m, amps);
        const double ps = 0.5 * std::pow(10.0, q.amplitude_dbfs / 10.0);
        m.thermal_noise_variance = std::max(0.0, ps / std::pow(10.0, snr_db / 10.0) - q.sigma2_q);
        return m;
    };
    const auto ideal = design_modulator(4, osr, f_s, LoopKind::continuous_time);
    const auto noisy = limited(ideal, 81.0);
    const auto low = limited(design_modulator(2, osr, f_s, LoopKind::discrete_time), 52.0);

    const ModulatorConfig* mods[] = {&low, &noisy, &ideal};
    const char* names[] = {"52 dB class", "81 dB class", "95 dB class"};
    double nrmse[3];
    bool clean = true;
    for (int i = 0; i < 3; ++i) {
        const double snr = peak_point(sweep_amplitude(*mods[i], amps)).snr_db;
        const auto r = link_fidelity(k, link, *mods[i]);
        nrmse[i] = r.nrmse;
        clean &= r.bit_errors == 0 && r.modulator_stable;
        info(8, std::string(names[i]) + fmt(": SNR_max %.1f dB, NRMSE %.3e, bit errors %.0f", snr, r.nrmse, double(r.bit_errors)));
    }
    verdict(8, clean && nrmse[0] > nrmse[1] && nrmse[1] > nrmse[2],
            fmt("image NRMSE strictly decreasing: %.3e > %.3e > %.3e", nrmse[0], nrmse[1], nrmse[2]));
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    guarded(1, fig5);
    guarded(2, second_order);
    guarded(3, stf);
    guarded(4, jitter);
    guarded(5, clock_and_tc);
    guarded(6, link_dr);
    guarded(7, properties);
    guarded(8, fidelity);
    std::printf("%s: %d failing check(s), %.0f s\n", failures ? "FAILED" : "ALL PASSED", failures, seconds_since(t0));
    return failures ? 1 : 0;
}
