#include "dsfl/ciff.hpp"
#include "dsfl/error.hpp"
#include "dsfl/ntf.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace dsfl;

namespace {

TransferFunction ntf_for(int order, double osr) {
    NtfSpec s;
    s.order = order;
    s.osr = osr;
    return synthesize_ntf(s);
}

double max_response_error(const TransferFunction& a, const TransferFunction& b) {
    double worst = 0.0;
    for (int i = 1; i <= 512; ++i) {
        const double w = std::numbers::pi * i / 512.0;
        worst = std::max(worst, std::abs(a.response(w) - b.response(w)));
    }
    return worst;
}

} // namespace

TEST_CASE("realized loops reproduce the target NTF") {
    for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time})
        for (int order = 1; order <= 6; ++order) {
            const auto ntf = ntf_for(order, 40.0);
            RealizeOptions o;
            o.kind = kind;
            const auto c = realize_ciff(ntf, o);
            CAPTURE(order);
            CHECK(c.order() == std::size_t(order));
            CHECK(max_response_error(extract_ntf(c), ntf) < 1e-8);
        }
}

TEST_CASE("resonators follow the optimized zero pairs") {
    const auto c = realize_ciff(ntf_for(4, 50.0));
    CHECK(c.resonators.size() == 2);
    const auto dt = realize_ciff(ntf_for(4, 50.0), {LoopKind::discrete_time, 0.0, {}});
    CHECK(dt.resonators.size() == 2);
    NtfSpec s;
    s.order = 4;
    s.optimize_zeros = false;
    CHECK(realize_ciff(synthesize_ntf(s)).resonators.empty());
}

TEST_CASE("signal transfer function is unity at dc") {
    for (auto kind : {LoopKind::discrete_time, LoopKind::continuous_time}) {
        RealizeOptions o;
        o.kind = kind;
        const auto c = realize_ciff(ntf_for(4, 50.0), o);
        CHECK(std::abs(stf_response(c, 1e-7)) == doctest::Approx(1.0).epsilon(1e-4));
        const auto r = compute_stf(c, 1024);
        CHECK(r.dc_magnitude == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(r.peak_magnitude >= r.dc_magnitude);
        CHECK(r.omega.size() == r.magnitude.size());
    }
}

TEST_CASE("excess loop delay is compensated by the direct DAC path") {
    RealizeOptions none, some;
    none.excess_delay = 0.0;
    some.excess_delay = 0.3;
    const auto ntf = ntf_for(3, 32.0);
    const auto a = realize_ciff(ntf, none), b = realize_ciff(ntf, some);
    CHECK(std::abs(a.dac2_gain) < 1e-9);
    CHECK(b.dac2_gain > 0.0);
    CHECK(max_response_error(extract_ntf(b), ntf) < 1e-8);
}

TEST_CASE("realization argument checks") {
    TransferFunction unstable;
    unstable.zeros = {cplx(1, 0)};
    unstable.poles = {cplx(1.5, 0)};
    CHECK_THROWS_AS(realize_ciff(unstable), ArgumentError);
    TransferFunction big;
    big.zeros.assign(9, cplx(1, 0));
    big.poles.assign(9, cplx(0, 0));
    CHECK_THROWS_AS(realize_ciff(big), ArgumentError);

    auto c = realize_ciff(ntf_for(2, 20.0));
    c.feedforward.pop_back();
    CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("time-constant errors scale the integrator gains") {
    const auto c = realize_ciff(ntf_for(3, 32.0));
    const auto nominal = loop_matrices(c);
    const auto scaled = loop_matrices(c, {0.1, 0.1, 0.1});
    CHECK((scaled.A - 1.1 * nominal.A).norm() < 1e-12);
    CHECK((scaled.b - 1.1 * nominal.b).norm() < 1e-12);
}

TEST_CASE("state scale calibration gives positive per-state magnitudes") {
    auto c = realize_ciff(ntf_for(4, 50.0));
    calibrate_state_scale(c);
    REQUIRE(c.state_scale.size() == 4);
    for (double s : c.state_scale) CHECK(s > 0.0);
}
