#include "dsfl/error.hpp"
#include "dsfl/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsfl;

TEST_CASE("SNR of a tone in white noise follows the band fraction") {
    const double fs = 1.0, fb = 1.0 / 64.0, var = 1e-6;
    const std::size_t n = 1 << 16;
    const double ft = coherent_frequency(fb / 3.0, n, fs);
    const auto s = add_white_noise(generate_tone(ft, 0.5, 0.0, n, fs), var, 8);
    const auto m = measure_tone(s, n, fb, ft);
    const double expected = 10.0 * std::log10(0.125 / (var * fb / (fs / 2.0)));
    CHECK(m.snr_db == doctest::Approx(expected).epsilon(0.01));
    CHECK(m.sndr.in_band_db <= m.snr_db + 0.1);
    CHECK(m.signal_power == doctest::Approx(0.125).epsilon(0.01));
}

TEST_CASE("harmonic distortion lowers SNDR but not SNR") {
    const double fs = 1.0, fb = 0.1;
    const std::size_t n = 1 << 14;
    const double ft = coherent_frequency(0.01, n, fs);
    auto clean = generate_tone(ft, 0.5, 0.0, n, fs);
    std::vector<double> x = clean.samples();
    for (std::size_t i = 0; i < n; ++i) x[i] += 1e-3 * std::cos(2.0 * std::numbers::pi * 3.0 * ft * double(i));
    const auto s = add_white_noise(RealSignal(x, fs), 1e-9, 3);
    const auto m = measure_tone(s, n, fb, ft);
    // third harmonic 1e-3 against 0.5 is -54 dBc
    CHECK(m.sndr.in_band_db == doctest::Approx(20.0 * std::log10(0.5 / 1e-3)).epsilon(0.01));
    CHECK(m.snr_db > m.sndr.in_band_db + 20.0);
}

TEST_CASE("dBm conversions") {
    CHECK(sine_dbm(1.0) == doctest::Approx(10.0));
    CHECK(sine_dbm(1.0, 75.0) == doctest::Approx(10.0 * std::log10(1000.0 / 150.0)));
    CHECK(dbm_to_amplitude(sine_dbm(0.37)) == doctest::Approx(0.37));
    CHECK(mean_square_dbm(0.05) == doctest::Approx(0.0));
}

TEST_CASE("least-squares slope of an exact line") {
    double icpt = 0.0;
    CHECK(fit_slope({1, 2, 3, 4}, {5, 7, 9, 11}, &icpt) == doctest::Approx(2.0));
    CHECK(icpt == doctest::Approx(3.0));
    CHECK_THROWS_AS(fit_slope({1}, {1}), ArgumentError);
}

namespace {

// Fundamental output of y = x + a3 x^3 for a sine of power p (dBm), gain g dB.
SweepResult cubic_sweep(double a3, double g_db, double lo, double hi, double step) {
    SweepResult r;
    for (double p = lo; p <= hi + 1e-9; p += step) {
        const double a = dbm_to_amplitude(p);
        const double y = std::abs(a + 0.75 * a3 * a * a * a);
        r.points.push_back({p, sine_dbm(y) + g_db, 0.0, 0.0, true});
    }
    return r;
}

} // namespace

TEST_CASE("P1dB of a cubic characteristic") {
    const double a3 = -0.2;
    // 1 dB compression where 1 + 0.75 a3 A^2 = 10^(-1/20)
    const double a1db = std::sqrt((1.0 - std::pow(10.0, -1.0 / 20.0)) / (0.75 * -a3));
    const auto sweep = cubic_sweep(a3, 7.0, -60.0, 12.0, 0.5);
    const auto r = estimate_p1db(sweep);
    CHECK_FALSE(r.open_ended);
    CHECK(r.p1db_in == doctest::Approx(sine_dbm(a1db)).epsilon(0.01));
    CHECK(r.slope == doctest::Approx(1.0).epsilon(0.01));
    CHECK(r.intercept == doctest::Approx(7.0).epsilon(0.01));
    CHECK(r.p1db_out == doctest::Approx(r.p1db_in + 6.0).epsilon(0.01));
}

TEST_CASE("P1dB ignores a noise-limited low end") {
    auto sweep = cubic_sweep(-0.2, 0.0, -80.0, 12.0, 2.0);
    for (auto& p : sweep.points)
        if (p.input < -60.0) p.output = -60.0; // floor
    const auto r = estimate_p1db(sweep);
    CHECK(r.slope == doctest::Approx(1.0).epsilon(0.02));
    CHECK(r.p1db_in == doctest::Approx(sine_dbm(std::sqrt((1.0 - std::pow(10.0, -0.05)) / 0.15))).epsilon(0.02));
}

TEST_CASE("P1dB edge cases") {
    SweepResult linear;
    for (int i = 0; i < 10; ++i) linear.points.push_back({-50.0 + i, -40.0 + i, 0, 0, true});
    CHECK(estimate_p1db(linear).open_ended);

    SweepResult few;
    for (int i = 0; i < 4; ++i) few.points.push_back({double(i), double(i), 0, 0, true});
    CHECK_THROWS(estimate_p1db(few));

    SweepResult unordered;
    unordered.points = {{0, 0, 0, 0, true}, {-1, -1, 0, 0, true}};
    CHECK_THROWS_AS(unordered.validate(), ArgumentError);
}

TEST_CASE("dynamic range is the P1dB to floor span") {
    CHECK(dynamic_range(-5.0, -86.0) == doctest::Approx(81.0));
    CHECK_THROWS_AS(dynamic_range(-90.0, -86.0), ArgumentError);
}

TEST_CASE("peak SNR search") {
    const std::vector<double> grid = {-20, -10, -6, -3, 0};
    const auto pk = peak_snr_search(grid, [](double a) -> std::optional<double> {
        if (a > -4) return std::nullopt;
        return 80.0 + a;
    });
    CHECK(pk.amplitude == -6);
    CHECK(pk.index == 2);
    CHECK_THROWS_AS(peak_snr_search(grid, [](double) -> std::optional<double> { return std::nullopt; }),
                    MeasurementError);
    CHECK_THROWS_AS(peak_snr_search({}, [](double) -> std::optional<double> { return 1.0; }), ArgumentError);
    CHECK_THROWS_AS(peak_snr_search({0, -1}, [](double) -> std::optional<double> { return 1.0; }), ArgumentError);
}
