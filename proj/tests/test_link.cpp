#include "dsfl/error.hpp"
#include "dsfl/fft.hpp"
#include "dsfl/filters.hpp"
#include "dsfl/link.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace dsfl;

namespace {

LinkConfig quiet_link() {
    LinkConfig l;
    l.optical.tia_bandwidth = 0.0;
    return l;
}

ModulatorConfig link_mod(const LinkConfig& l, double f_s = 20e6) {
    return design_modulator(2, f_s / (2.0 * l.baseband_edge()), f_s, LoopKind::discrete_time);
}

} // namespace

TEST_CASE("Butterworth low-pass magnitude") {
    const double rate = 1e6, fc = 50e3;
    for (int order : {1, 2, 5, 8}) {
        const auto f = butterworth_lowpass(order, fc, rate);
        CAPTURE(order);
        CHECK(std::abs(f.response(0.0, rate)) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(f.response(fc, rate)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
        // bilinear warping only steepens the analog N * 20 dB/decade slope
        CHECK(20.0 * std::log10(std::abs(f.response(10.0 * fc, rate))) < -20.0 * order + 0.1);
    }
    CHECK_THROWS_AS(butterworth_lowpass(0, fc, rate), ArgumentError);
    CHECK_THROWS_AS(butterworth_lowpass(17, fc, rate), ArgumentError);
    CHECK_THROWS_AS(butterworth_lowpass(4, rate / 2, rate), ArgumentError);
}

TEST_CASE("filter processing agrees with its frequency response") {
    const double rate = 1e6, f0 = 40e3;
    const auto f = butterworth_lowpass(4, 50e3, rate);
    const std::size_t n = 20000;
    const auto x = generate_tone(f0, 1.0, 0.0, n, rate);
    const auto y = f.process(x);
    const cplx h = f.response(f0, rate);
    for (std::size_t i = n - 100; i < n; ++i) {
        const double expected = std::abs(h) * std::cos(2.0 * std::numbers::pi * f0 * double(i) / rate + std::arg(h));
        CHECK(y[i] == doctest::Approx(expected).epsilon(1e-6).scale(1.0));
    }
    const auto p = one_pole_lowpass(10e3, rate);
    CHECK(std::abs(p.response(0.0, rate)) == doctest::Approx(1.0));
}

TEST_CASE("link configuration checks") {
    LinkConfig l;
    CHECK(l.f_if() == doctest::Approx(200e3));
    CHECK(l.baseband_edge() == doctest::Approx(300e3));
    CHECK(l.lpf_cutoff() == doctest::Approx(360e3));
    l.f_b = 500e3;
    CHECK_THROWS_AS(l.validate(), ArgumentError);
    l.mixer_mode = MixerMode::quadrature;
    CHECK_NOTHROW(l.validate());
    CHECK(l.baseband_edge() == doctest::Approx(250e3));

    OpticalConfig o;
    o.i_bias = 5e-3;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o.i_bias = -1.0;
    CHECK_THROWS(o.validate());
}

TEST_CASE("RF simulation rate") {
    LinkConfig l;
    const double r = rf_sample_rate(l, 20e6);
    CHECK(std::fmod(r, 80e6) == doctest::Approx(0.0));
    CHECK(r > 2.2 * (l.f_lo + l.f_b));
    CHECK(r - 80e6 <= 2.2 * (l.f_lo + l.f_b));
}

TEST_CASE("fiber delay range") {
    const auto m = fiber_mismatch(2.0);
    CHECK(m.min_s == doctest::Approx(10e-9));
    CHECK(m.max_s == doctest::Approx(11e-9));
    CHECK_THROWS(fiber_mismatch(-1.0));
}

TEST_CASE("cubic model and its compression point") {
    const auto y = cubic_nonlinearity(RealSignal({0.5, -1.0}, 1.0), 2.0, -0.1);
    CHECK(y[0] == doctest::Approx(1.0 - 0.0125));
    CHECK(y[1] == doctest::Approx(-2.0 + 0.1));
    CHECK_THROWS_AS(cubic_nonlinearity(RealSignal({0.0}, 1.0), 0.0, 0.0), ArgumentError);
    const double a = compression_amplitude(1.0, -0.2);
    CHECK(1.0 - 0.75 * 0.2 * a * a == doctest::Approx(std::pow(10.0, -1.0 / 20.0)));
}

TEST_CASE("quadrature mixing separates the two sidebands") {
    LinkConfig l = quiet_link();
    l.mixer_mode = MixerMode::quadrature;
    l.f_lo = 120e6;
    const double rate = 480e6;
    const std::size_t n = 1 << 16;
    const std::size_t m = n / 2;
    const double df = std::round(50e3 * m / rate) * rate / m;
    const auto upper = generate_tone(l.f_lo + df, 0.1, 0.0, n, rate);
    const auto bb = mix_down(upper, l);
    const auto spec = fft::transform(std::vector<cplx>(bb.samples().end() - (n / 2), bb.samples().end()), true);
    const auto k = static_cast<std::size_t>(std::llround(df * m / rate));
    const double wanted = std::norm(spec[k]), image = std::norm(spec[m - k]);
    CHECK(10.0 * std::log10(wanted / image) >= 60.0);
    // 2 exp(-j LO) mixing: amplitude is preserved at baseband
    CHECK(std::sqrt(wanted) / double(m) == doctest::Approx(0.1).epsilon(0.01));
}

TEST_CASE("optical channel and retiming recover every bit") {
    const auto l = quiet_link();
    auto mod = link_mod(l);
    const std::size_t n = 4096;
    const auto u = generate_tone(coherent_frequency(100e3, n, 20e6), 0.5, 0.0, n, 20e6);
    const auto bits = simulate(mod, u);
    const auto analog = ook_channel(bits, l.optical, fiber_delay_nominal * 2.0);
    CHECK(analog.sample_rate() == doctest::Approx(4.0 * 20e6));
    const auto rt = comparator_retime(analog, 20e6, fiber_delay_nominal * 2.0, 2.0);
    CHECK_FALSE(rt.violation);
    CHECK(rt.margin > 0.0);
    std::size_t errors = 0, compared = 0;
    for (std::size_t i = 0; i + rt.bit_offset < bits.bits.size() && i < rt.bits.bits.size(); ++i) {
        ++compared;
        errors += (rt.bits.bits[i] > 0) != (bits.bits[i + rt.bit_offset] > 0);
    }
    CHECK(compared > n - 8);
    CHECK(errors == 0);
}

TEST_CASE("sampling in the transition window is flagged") {
    const auto l = quiet_link();
    const auto bits = simulate(link_mod(l), RealSignal(std::vector<double>(512, 0.0), 20e6));
    const auto analog = ook_channel(bits, l.optical, 0.0);
    const auto rt = comparator_retime(analog, 20e6, -0.5 / 20e6, 0.0);
    CHECK(rt.violation);
    CHECK(rt.margin < 0.0);
}

TEST_CASE("chain trace stages and export") {
    LinkConfig l = quiet_link();
    l.fiber_length = 1.0;
    const auto mod = link_mod(l);
    const double rate = rf_sample_rate(l, mod.f_s_actual);
    const std::size_t n = 16 * 2048;
    const auto rf = generate_tone(l.f_l, dbm_to_amplitude(-20.0), 0.0, n, rate);
    const auto res = run_chain(rf, l, mod, true);
    CHECK(res.bit_errors == 0);
    CHECK(res.modulator_stable);
    CHECK(res.output.size() == n);
    for (const char* s : {"post_mixer", "post_lpf", "bitstream", "post_optical", "post_comparator", "post_retime", "final_rf"})
        CHECK_NOTHROW(res.trace.stage(s));
    CHECK_THROWS(res.trace.stage("nope"));

    const auto dir = std::filesystem::temp_directory_path() / "dsfl_trace_test";
    std::filesystem::remove_all(dir);
    res.trace.export_csv(dir);
    std::ifstream manifest(dir / "manifest.csv");
    REQUIRE(manifest);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(manifest, line)) ++rows;
    CHECK(rows == res.trace.stages.size() + 1);
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(run_chain(RealSignal(std::vector<double>(100, 0.0), rate / 2), l, mod), ArgumentError);
}

TEST_CASE("quadrature chain runs two channels") {
    LinkConfig l = quiet_link();
    l.mixer_mode = MixerMode::quadrature;
    l.f_lo = 119.85e6;
    const auto mod = link_mod(l);
    const double rate = rf_sample_rate(l, mod.f_s_actual);
    const auto rf = generate_tone(l.f_l, dbm_to_amplitude(-20.0), 0.0, 16 * 2048, rate);
    const auto res = run_chain(rf, l, mod, true);
    CHECK(res.transmitted.size() == 2);
    CHECK(res.received.size() == 2);
    CHECK_NOTHROW(res.trace.stage("bitstream_q"));
}

TEST_CASE("bias network power") {
    OpticalConfig o;
    const auto p = power_budget(o, {10.0, 5.0});
    CHECK(p.bias_network_mw == doctest::Approx(75.0));
    CHECK(p.fixed_mw == doctest::Approx(15.0));
    CHECK(p.total_mw == doctest::Approx(90.0));
}

TEST_CASE("phase noise synthesis") {
    const std::vector<PhaseNoisePoint> t = {{1e3, -100.0}, {1e6, -140.0}};
    const auto a = synthesize_phase_noise(t, 4096, 1e7, 3);
    const auto b = synthesize_phase_noise(t, 4096, 1e7, 3);
    CHECK(a.size() == 4096);
    CHECK(a == b);
    CHECK_THROWS(synthesize_phase_noise({}, 16, 1e7, 3));
}
