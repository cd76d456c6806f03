#include "property_checks.hpp"

#include <doctest.h>

using namespace dsfl;

TEST_CASE("bitstream holds only the two quantizer levels") {
    for (int order : {1, 2, 3, 4, 5, 6})
        for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time}) {
            auto m = design_modulator(order, 32.0, 1e6, kind);
            m.thermal_noise_variance = 1e-6;
            m.stop_on_unstable = false;
            for (double a : {-40.0, -6.0, 0.0, 3.0}) CHECK(checks::alphabet_violations(m, a, 4096) == 0);
        }
}

TEST_CASE("zero input gives a balanced bitstream") {
    for (int order : {1, 2, 4})
        for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time}) {
            CAPTURE(order);
            CHECK(checks::zero_input_mean(design_modulator(order, 50.0, 1e6, kind)) < 1e-2);
        }
}

TEST_CASE("in-band noise falls at (2N+1) x 10 dB per decade of OSR") {
    for (int order : {1, 2}) {
        CAPTURE(order);
        CHECK(checks::noise_osr_slope(order) == doctest::Approx(-(2.0 * order + 1.0) * 10.0).epsilon(2.0 / ((2.0 * order + 1.0) * 10.0)));
    }
}

TEST_CASE("PSD power matches time-domain power") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) CHECK(checks::parseval_error_db(seed) <= 0.1);
}

TEST_CASE("quadrature image rejection") {
    for (double off : {20e3, 50e3, 150e3}) CHECK(checks::image_rejection_db(off) >= 60.0);
}

TEST_CASE("ideal optical channel is error free") {
    for (double len : {0.0, 2.0, 10.0}) {
        const auto b = checks::ideal_channel_ber(1 << 16, len);
        CHECK_FALSE(b.violation);
        CHECK(b.compared >= (1u << 16) - 8);
        CHECK(b.errors == 0);
    }
}

TEST_CASE("k-space round trip") {
    for (auto [r, c] : {std::pair<std::size_t, std::size_t>{8, 8}, {16, 24}, {64, 64}, {9, 31}})
        CHECK(checks::kspace_roundtrip_error(r, c, r * 100 + c) <= 1e-9);
}

TEST_CASE("seeded reruns are bit identical") { CHECK(checks::seeded_reruns_identical()); }
