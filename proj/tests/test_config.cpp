#include "dsfl/config.hpp"
#include "dsfl/error.hpp"
#include "dsfl/svg.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

using namespace dsfl;

namespace {

std::vector<ConfigKey> schema() {
    return {
        {"f_s", ValueKind::number, "Hz", 0.0, 1e12, {}, "clock"},
        {"order", ValueKind::integer, "", 1, 8, {}, ""},
        {"nonlinear", ValueKind::boolean, "", 0, 1, {}, ""},
        {"kind", ValueKind::text, "", 0, 0, {"dt", "ct"}, ""},
        {"tone", ValueKind::number, "dBm", -200, 50, {}, ""},
    };
}

std::size_t error_line(const std::string& text) {
    Config c(schema());
    std::istringstream is(text);
    try {
        c.load(is);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line " + std::to_string(e.location())) != std::string::npos);
        return e.location();
    }
    FAIL("expected a parse error");
    return 0;
}

} // namespace

TEST_CASE("quantities with SI prefixes") {
    CHECK(parse_quantity("20MHz", "Hz") == doctest::Approx(20e6));
    CHECK(parse_quantity("1.2 ps", "s") == doctest::Approx(1.2e-12));
    CHECK(parse_quantity("2m", "m") == doctest::Approx(2.0));
    CHECK(parse_quantity("500mm", "m") == doctest::Approx(0.5));
    CHECK(parse_quantity("3k", "Hz") == doctest::Approx(3e3));
    CHECK(parse_quantity("7", "Hz") == 7.0);
    CHECK(parse_quantity("-5dBm", "dBm") == -5.0);
    CHECK(parse_quantity("-79 dBm/Hz", "dBm/Hz") == -79.0);
    CHECK(parse_quantity("50ohm", "ohm") == 50.0);
    CHECK(parse_quantity("1kOhm", "ohm") == 1e3);
    CHECK(parse_quantity("4.5mA", "A") == doctest::Approx(4.5e-3));
}

TEST_CASE("malformed quantities") {
    CHECK_THROWS_AS(parse_quantity("20mhz", "Hz"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("20MHz", "s"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("-5mdBm", "dBm"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("", "Hz"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("fast", "Hz"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("inf", "Hz"), ArgumentError);
    CHECK_THROWS_AS(parse_quantity("3x", ""), ArgumentError);
}

TEST_CASE("config loading") {
    Config c(schema());
    std::istringstream is("# comment\n\nf_s = 40 MHz\norder=4\nnonlinear = no\nkind = ct\n");
    c.load(is);
    CHECK(c.number("f_s", 0) == doctest::Approx(40e6));
    CHECK(c.integer("order", 0) == 4);
    CHECK_FALSE(c.boolean("nonlinear", true));
    CHECK(c.text("kind", "dt") == "ct");
    CHECK_FALSE(c.has("tone"));
    CHECK(c.number("tone", -20) == -20);
    c.set("order", "5");
    CHECK(c.integer("order", 0) == 5);
    CHECK_THROWS_AS(c.set("colour", "1"), ArgumentError);
    CHECK_THROWS_AS(c.number("colour", 0), ArgumentError);
}

TEST_CASE("config errors name the line") {
    CHECK(error_line("f_s = 1MHz\norder = 2\ncolour = red\n") == 3);
    CHECK(error_line("order = 2\norder = 3\n") == 2);
    CHECK(error_line("order = 9\n") == 1);
    CHECK(error_line("order = 2.5\n") == 1);
    CHECK(error_line("\nkind = sigma\n") == 2);
    CHECK(error_line("nonlinear = maybe\n") == 1);
    CHECK(error_line("f_s 20MHz\n") == 1);
    CHECK(error_line("# ok\nf_s = 20 MV\n") == 2);
}

TEST_CASE("missing config file") {
    Config c(schema());
    CHECK_THROWS_AS(c.load_file("/nonexistent/x.cfg"), ArgumentError);
}

TEST_CASE("schema description lists every key") {
    std::ostringstream os;
    Config(schema()).describe(os);
    const auto s = os.str();
    for (const auto& k : schema()) CHECK(s.find(k.name) != std::string::npos);
    CHECK(s.find("{dt|ct}") != std::string::npos);
}

TEST_CASE("svg plot") {
    std::ostringstream os;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    write_svg_plot(os, {{"a<b", {1, 10, 100, 1000}, {0, 1, nan, 3}}}, {"t", "x", "y", true});
    const auto s = os.str();
    CHECK(s.rfind("<svg", 0) == 0);
    CHECK(s.find("</svg>") != std::string::npos);
    CHECK(s.find("a&lt;b") != std::string::npos);
    // the NaN splits the trace into two sub-paths
    const auto d = s.substr(s.find("<path d=\""));
    CHECK(std::count(d.begin(), d.begin() + d.find("\" fill"), 'M') == 2);

    std::ostringstream sink;
    CHECK_THROWS_AS(write_svg_plot(sink, {{"", {1, 2}, {1}}}), ArgumentError);
    PlotOptions log;
    log.log_x = true;
    CHECK_THROWS_AS(write_svg_plot(sink, {{"", {0, 2}, {1, 2}}}, log), ArgumentError);
    CHECK_NOTHROW(write_svg_plot(sink, {}));
}
