#include "dsfl/error.hpp"
#include "dsfl/fft.hpp"
#include "dsfl/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace dsfl;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x, bool forward) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    const double s = forward ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            out[k] += x[i] * std::polar(1.0, s * 2.0 * std::numbers::pi * double(k * i % n) / double(n));
    return out;
}

std::vector<cplx> random_complex(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    std::vector<cplx> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    return x;
}

} // namespace

TEST_CASE("complex transform matches a direct DFT for power-of-two and odd lengths") {
    for (std::size_t n : {1u, 8u, 12u, 17u, 64u}) {
        const auto x = random_complex(n, static_cast<unsigned>(n));
        for (bool fwd : {true, false}) {
            const auto a = fft::transform(x, fwd);
            const auto b = naive_dft(x, fwd);
            for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(a[k] - b[k]) < 1e-9 * double(n));
        }
    }
}

TEST_CASE("real transform returns the non-negative half of the complex one") {
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> x(30);
    std::vector<cplx> xc(30);
    for (std::size_t i = 0; i < x.size(); ++i) xc[i] = x[i] = g(rng);
    const auto r = fft::forward_real(x);
    const auto c = naive_dft(xc, true);
    REQUIRE(r.size() == 16);
    for (std::size_t k = 0; k < r.size(); ++k) CHECK(std::abs(r[k] - c[k]) < 1e-9);
}

TEST_CASE("2-D transform is separable") {
    const std::size_t rows = 4, cols = 6;
    const auto x = random_complex(rows * cols, 9);
    const auto t = fft::transform_2d(x, rows, cols, true);
    std::vector<cplx> ref(x);
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<cplx> row(ref.begin() + r * cols, ref.begin() + (r + 1) * cols);
        row = naive_dft(row, true);
        std::copy(row.begin(), row.end(), ref.begin() + r * cols);
    }
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<cplx> col(rows);
        for (std::size_t r = 0; r < rows; ++r) col[r] = ref[r * cols + c];
        col = naive_dft(col, true);
        for (std::size_t r = 0; r < rows; ++r) ref[r * cols + c] = col[r];
    }
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(t[i] - ref[i]) < 1e-9);
}

TEST_CASE("is_power_of_two") {
    CHECK(fft::is_power_of_two(1));
    CHECK(fft::is_power_of_two(1024));
    CHECK_FALSE(fft::is_power_of_two(0));
    CHECK_FALSE(fft::is_power_of_two(96));
}

TEST_CASE("signals reject empty, non-finite and badly sampled data") {
    CHECK_THROWS_AS(RealSignal({}, 1.0), ArgumentError);
    CHECK_THROWS_AS(RealSignal({1.0}, 0.0), ArgumentError);
    CHECK_THROWS_AS(RealSignal({1.0, NAN}, 1.0), ArgumentError);
    CHECK_THROWS_AS(ComplexSignal({}, 1.0), ArgumentError);
}

TEST_CASE("tone power and aliasing guard") {
    const double fs = 1e6;
    const double f = coherent_frequency(12e3, 4096, fs);
    const auto s = generate_tone(f, 0.8, 0.3, 4096, fs);
    CHECK(s.power() == doctest::Approx(0.32).epsilon(1e-9));
    CHECK_THROWS_AS(generate_tone(fs / 2, 1.0, 0.0, 16, fs), ArgumentError);
}

TEST_CASE("coherent frequency lands on an odd number of cycles") {
    const double fs = 100e6;
    const std::size_t n = 1 << 16;
    for (double target : {1e5, 333.3e3, 2.2e6}) {
        const double cycles = coherent_frequency(target, n, fs) * double(n) / fs;
        CHECK(cycles == doctest::Approx(std::round(cycles)));
        CHECK(static_cast<long>(std::round(cycles)) % 2 == 1);
        CHECK(std::abs(cycles - target * double(n) / fs) <= 1.0 + 1e-9);
    }
}

TEST_CASE("white noise variance and seeding") {
    const RealSignal zero(std::vector<double>(1 << 15, 0.0), 1.0);
    const auto a = add_white_noise(zero, 0.25, 4);
    const auto b = add_white_noise(zero, 0.25, 4);
    const auto c = add_white_noise(zero, 0.25, 5);
    CHECK(a.samples() == b.samples());
    CHECK(a.samples() != c.samples());
    CHECK(a.power() == doctest::Approx(0.25).epsilon(0.03));
    CHECK_THROWS_AS(add_white_noise(zero, -1.0, 1), ArgumentError);
}

TEST_CASE("PSD bins sum to the time-domain power") {
    const auto s = add_white_noise(generate_tone(0.1, 1.0, 0.0, 1 << 14, 1.0), 0.01, 2);
    const auto rect = estimate_psd(s, 1 << 14, Window::rectangular);
    CHECK(rect.total_power() == doctest::Approx(s.power()).epsilon(1e-9));
    const auto hann = estimate_psd(s, 1 << 12, Window::hann, 4);
    CHECK(std::abs(10.0 * std::log10(hann.total_power() / s.power())) < 0.1);
    CHECK(hann.n_averages == 4);
    CHECK(hann.enbw_bins == doctest::Approx(1.5));
    CHECK(hann.bin_width() == doctest::Approx(1.0 / 4096));
}

TEST_CASE("PSD argument checks") {
    const RealSignal s(std::vector<double>(1000, 0.1), 1.0);
    CHECK_THROWS_AS(estimate_psd(s, 1000, Window::hann), ArgumentError);
    CHECK_THROWS_AS(estimate_psd(s, 512, Window::hann, 2), ArgumentError);
}

TEST_CASE("dBFS conversion puts a full-scale sine at 0 dB") {
    const auto s = generate_tone(coherent_frequency(0.05, 4096, 1.0), 1.0, 0.0, 4096, 1.0);
    const auto db = estimate_psd(s, 4096, Window::rectangular).to_dbfs();
    double peak = -1e9;
    for (double v : db.psd) peak = std::max(peak, v);
    CHECK(peak == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("signal CSV round trip is exact") {
    const auto s = add_white_noise(RealSignal(std::vector<double>(50, 0.0), 3.2e6), 1.0, 1);
    std::stringstream ss;
    write_signal_csv(ss, s);
    const auto back = read_real_signal_csv(ss);
    CHECK(back.samples() == s.samples());
    CHECK(back.sample_rate() == s.sample_rate());

    const ComplexSignal c({{1.5, -2.0}, {0.1, 1e-300}}, 10.0);
    std::stringstream cs;
    write_signal_csv(cs, c);
    const auto cb = read_complex_signal_csv(cs);
    CHECK(cb.samples() == c.samples());
}

TEST_CASE("malformed signal CSV reports a parse error") {
    std::stringstream ss("# sample_rate_hz=10\n1.0\nabc\n");
    CHECK_THROWS_AS(read_real_signal_csv(ss), ParseError);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 95.36})
        CHECK(std::stod(format_double(v)) == v);
}
