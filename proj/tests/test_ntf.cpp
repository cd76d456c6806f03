#include "dsfl/error.hpp"
#include "dsfl/ntf.hpp"
#include "dsfl/signal.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace dsfl;

namespace {

// Positive roots of the Legendre polynomial P_n by sign-change bracketing and bisection.
std::vector<double> legendre_roots(int n) {
    std::vector<double> roots;
    const int grid = 20000;
    for (int i = 0; i < grid; ++i) {
        double a = double(i) / grid, b = double(i + 1) / grid;
        const double fa = std::legendre(n, a), fb = std::legendre(n, b);
        if (fa == 0.0) {
            roots.push_back(a);
            continue;
        }
        if (fa * fb > 0.0) continue;
        for (int k = 0; k < 100; ++k) {
            const double m = 0.5 * (a + b);
            (std::legendre(n, a) * std::legendre(n, m) <= 0.0 ? b : a) = m;
        }
        roots.push_back(0.5 * (a + b));
    }
    return roots;
}

TransferFunction differentiator(int n) {
    TransferFunction t;
    t.zeros.assign(n, cplx(1.0, 0.0));
    t.poles.assign(n, cplx(0.0, 0.0));
    return t;
}

} // namespace

TEST_CASE("spec validation") {
    NtfSpec s;
    s.order = 0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s.order = 9;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s.order = 4;
    s.osr = 1.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s.osr = 50.0;
    s.h_inf = 1.0;
    CHECK_THROWS_AS(s.validate(), ArgumentError);
    s.h_inf = 1.5;
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("oversampling ratio") {
    CHECK(compute_osr(100e6, 1e6) == doctest::Approx(50.0));
    CHECK_THROWS_AS(compute_osr(1e6, 1e6), ArgumentError);
    CHECK_THROWS_AS(compute_osr(1e6, 0.0), ArgumentError);
}

TEST_CASE("synthesized NTFs are causal, stable and meet the gain bound") {
    for (int order = 1; order <= 8; ++order)
        for (double osr : {16.0, 64.0}) {
            NtfSpec s;
            s.order = order;
            s.osr = osr;
            const auto ntf = synthesize_ntf(s);
            CAPTURE(order);
            CHECK(ntf.is_stable());
            CHECK(ntf.zeros.size() == std::size_t(order));
            const auto num = ntf.numerator(), den = ntf.denominator();
            CHECK(num.front() == doctest::Approx(den.front())); // NTF(inf) = 1
            CHECK(ntf.peak_magnitude() <= s.h_inf + 1e-6);
            if (order >= 2) CHECK(ntf.peak_magnitude() == doctest::Approx(s.h_inf).epsilon(1e-3));
        }
}

TEST_CASE("zeros stay at dc without optimization") {
    NtfSpec s;
    s.order = 3;
    s.optimize_zeros = false;
    for (const auto& z : synthesize_ntf(s).zeros) CHECK(std::abs(z - cplx(1.0, 0.0)) < 1e-12);
}

TEST_CASE("optimized zero angles sit at scaled Legendre roots") {
    const double osr = 32.0;
    for (int n = 1; n <= 8; ++n) {
        const auto got = optimized_zero_angles(n, osr);
        auto roots = legendre_roots(n);
        // the DC zero of odd orders is implicit
        std::erase_if(roots, [](double r) { return r < 1e-9; });
        CAPTURE(n);
        REQUIRE(got.size() == roots.size());
        for (std::size_t i = 0; i < roots.size(); ++i)
            // Legendre placement is the small-angle optimum; sin(w/2) ~ w/2 holds to ~1e-4 here
            CHECK(got[i] == doctest::Approx(roots[i] * std::numbers::pi / osr).epsilon(1e-3));
    }
}

TEST_CASE("in-band noise integral of differentiators") {
    const double osr = 20.0, w0 = std::numbers::pi / osr;
    // |1 - e^{-jw}|^2 = 2 - 2 cos w;  squared: 6 - 8 cos w + 2 cos 2w
    CHECK(inband_noise_integral(differentiator(1), osr) ==
          doctest::Approx((2.0 * w0 - 2.0 * std::sin(w0)) / std::numbers::pi).epsilon(1e-9));
    CHECK(inband_noise_integral(differentiator(2), osr) ==
          doctest::Approx((6.0 * w0 - 8.0 * std::sin(w0) + std::sin(2.0 * w0)) / std::numbers::pi).epsilon(1e-8));
    CHECK(inband_quantization_noise(differentiator(1), osr, 2.0) ==
          doctest::Approx(inband_noise_integral(differentiator(1), osr) / 3.0));
}

TEST_CASE("zero optimization lowers in-band noise") {
    for (int n = 2; n <= 6; ++n) {
        NtfSpec a, b;
        a.order = b.order = n;
        b.optimize_zeros = false;
        CHECK(inband_noise_integral(synthesize_ntf(a), 50.0) < inband_noise_integral(synthesize_ntf(b), 50.0));
    }
}

TEST_CASE("error-feedback loop emits +/-1 and flags unstable NTFs") {
    const auto u = generate_tone(0.01, 0.5, 0.0, 2048, 1.0);
    const auto run = simulate_ntf_loop(differentiator(2), u.samples());
    CHECK(run.stable);
    CHECK(run.v.size() == 2048);
    for (double v : run.v) CHECK(std::abs(v) == 1.0);

    TransferFunction bad = differentiator(1);
    bad.poles = {cplx(1.2, 0.0)};
    CHECK_THROWS_AS(simulate_ntf_loop(bad, u.samples()), ArgumentError);
    CHECK_THROWS_AS(predict_sqnr(bad, 32.0), ArgumentError);
}

TEST_CASE("peak SQNR prediction is self-consistent") {
    NtfSpec s;
    s.order = 2;
    s.osr = 32.0;
    const auto ntf = synthesize_ntf(s);
    SqnrOptions o;
    o.fft_length = 1 << 14;
    const auto p = predict_sqnr(ntf, s.osr, 2.0, o);
    CHECK(p.a_max > 0.3);
    CHECK(p.a_max <= 1.0);
    CHECK(p.amplitude_at_peak <= p.a_max + 1e-12);
    CHECK(p.sigma2_q == doctest::Approx(inband_quantization_noise(ntf, s.osr)));
    CHECK(p.linear_sqnr_db == doctest::Approx(10.0 * std::log10(p.a_max * p.a_max / 2.0 / p.sigma2_q)));
    CHECK(p.peak_sqnr_db > 40.0);
}

TEST_CASE("sweep records per-cell failures instead of throwing") {
    SqnrOptions o;
    o.fft_length = 1 << 12;
    const auto cells = sweep_peak_sqnr({1, 8}, {8.0}, 1.5, true, o);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].ok);
    CHECK_FALSE(cells[1].ok);
    CHECK_FALSE(cells[1].error.empty());
    std::ostringstream os;
    write_sqnr_sweep_csv(os, cells);
    CHECK(os.str().rfind("order,osr,peak_sqnr_db\n", 0) == 0);
    CHECK(os.str().find("nan") != std::string::npos);
}

TEST_CASE("transfer function JSON round trip is exact") {
    NtfSpec s;
    s.order = 5;
    const auto ntf = synthesize_ntf(s);
    const auto back = transfer_function_from_json(to_json(ntf));
    CHECK(back.zeros == ntf.zeros);
    CHECK(back.poles == ntf.poles);
    CHECK(back.gain == ntf.gain);
}

TEST_CASE("polynomial helpers") {
    const std::vector<cplx> r = {{0.5, 0.2}, {0.5, -0.2}, {-0.3, 0.0}};
    const auto p = poly_from_roots(r);
    REQUIRE(p.size() == 4);
    CHECK(p[0] == 1.0);
    for (const auto& z : r) CHECK(std::abs(poly_eval(p, z)) < 1e-12);
    auto back = poly_roots(p);
    REQUIRE(back.size() == 3);
    for (const auto& z : r)
        CHECK(std::any_of(back.begin(), back.end(), [&](cplx b) { return std::abs(b - z) < 1e-9; }));
}
