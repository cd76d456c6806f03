// dsfl: command-line front end for the delta-sigma fiber link toolkit.

#include "dsfl/ciff.hpp"
#include "dsfl/config.hpp"
#include "dsfl/error.hpp"
#include "dsfl/experiments.hpp"
#include "dsfl/fft.hpp"
#include "dsfl/kspace.hpp"
#include "dsfl/link.hpp"
#include "dsfl/metrics.hpp"
#include "dsfl/modulator.hpp"
#include "dsfl/ntf.hpp"
#include "dsfl/svg.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;
using namespace dsfl;

namespace {

// Bad command-line or config input; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_failure = 3;

std::string fixed(double v, int digits = 2) {
    if (std::isnan(v)) return "undefined";
    char b[64];
    std::snprintf(b, sizeof b, "%.*f", digits, v);
    return b;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

// Settings shared by every subcommand: config file, key overrides, output directory.
struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::string out_dir = ".";
    bool svg = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_file, "key = value settings file (SI units, e.g. 20MHz)");
    sub->add_option("--set", c.sets, "override one setting, key=value")->take_all();
    sub->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    sub->add_flag("--svg", c.svg, "also write SVG plots");
}

// Loads the config file, then --set overrides, then flags that were given explicitly.
Config load_config(std::vector<ConfigKey> schema, const Common& c,
                   const std::vector<std::pair<std::string, std::string>>& flags) {
    Config cfg(std::move(schema));
    try {
        if (!c.config_file.empty()) cfg.load_file(c.config_file);
        for (const auto& s : c.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : flags) cfg.set(k, v);
    } catch (const ParseError& e) {
        throw UsageError(e.what());
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

fs::path prepare_out(const Common& c) {
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void emit_report(const fs::path& dir, const std::string& name, const std::string& text) {
    std::cout << text;
    auto f = open_out(dir / name);
    f << text;
}

LoopKind parse_kind(const std::string& k) { return k == "dt" ? LoopKind::discrete_time : LoopKind::continuous_time; }

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw UsageError("bad list entry '" + item + "' in '" + s + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

// "lo:hi" or "lo:hi:step"
std::vector<double> parse_range(const std::string& s, double default_step) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) {
        char* end = nullptr;
        const double x = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw UsageError("bad range '" + s + "', expected lo:hi[:step]");
        v.push_back(x);
    }
    if (v.size() < 2 || v.size() > 3) throw UsageError("bad range '" + s + "', expected lo:hi[:step]");
    try {
        return amplitude_grid(v[0], v[1], v.size() == 3 ? v[2] : default_step);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
}

void check_power_of_two(long long n, const std::string& what) {
    if (n < 64 || !fft::is_power_of_two(static_cast<std::size_t>(n)))
        throw UsageError(what + " must be a power of two >= 64");
}

// ---------------------------------------------------------------- synth

std::vector<ConfigKey> synth_schema() {
    return {
        {"order", ValueKind::integer, "", 1, 8, {}, "loop order"},
        {"osr", ValueKind::number, "", 1.0, 1e6, {}, "oversampling ratio"},
        {"h_inf", ValueKind::number, "", 1.0, 10.0, {}, "out-of-band NTF gain bound"},
        {"optimize_zeros", ValueKind::boolean, "", 0, 1, {}, "spread NTF zeros across the band"},
        {"kind", ValueKind::text, "", 0, 0, {"ct", "dt"}, "loop filter realization"},
        {"excess_delay", ValueKind::number, "", 0.0, 0.9, {}, "CT excess loop delay, clock periods"},
        {"fft_length", ValueKind::integer, "", 64, 1 << 24, {}, "simulation record for the SQNR estimate"},
    };
}

int cmd_synth(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
    const auto cfg = load_config(synth_schema(), c, flags);
    NtfSpec spec;
    spec.order = static_cast<int>(cfg.integer("order", 4));
    spec.osr = cfg.number("osr", 50.0);
    spec.h_inf = cfg.number("h_inf", 1.5);
    spec.optimize_zeros = cfg.boolean("optimize_zeros", true);
    SqnrOptions so;
    so.fft_length = static_cast<std::size_t>(cfg.integer("fft_length", 1 << 16));
    check_power_of_two(static_cast<long long>(so.fft_length), "fft_length");
    try {
        spec.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    RealizeOptions ro;
    ro.kind = parse_kind(cfg.text("kind", "ct"));
    ro.excess_delay = cfg.number("excess_delay", default_excess_delay);
    const auto dir = prepare_out(c);

    const auto ntf = synthesize_ntf(spec);
    const auto pred = predict_sqnr(ntf, spec.osr, 2.0, so);
    const auto coeffs = realize_ciff(ntf, ro);
    const auto stf = compute_stf(coeffs);

    std::ostringstream r;
    r << "order " << spec.order << ", osr " << format_double(spec.osr) << ", h_inf " << format_double(spec.h_inf)
      << (spec.optimize_zeros ? ", optimized zeros" : ", zeros at dc") << "\n";
    r << "ntf zeros:";
    for (const auto& z : ntf.zeros) r << ' ' << format_double(z.real()) << (z.imag() < 0 ? "-" : "+") << format_double(std::abs(z.imag())) << 'j';
    r << "\nntf poles:";
    for (const auto& p : ntf.poles) r << ' ' << format_double(p.real()) << (p.imag() < 0 ? "-" : "+") << format_double(std::abs(p.imag())) << 'j';
    r << "\nntf peak gain " << fixed(ntf.peak_magnitude(), 4) << "\n";
    r << "predicted peak SQNR " << fixed(pred.peak_sqnr_db) << " dB at " << fixed(20.0 * std::log10(pred.amplitude_at_peak))
      << " dBFS (stability limit " << fixed(20.0 * std::log10(pred.a_max)) << " dBFS, linear-model SQNR "
      << fixed(pred.linear_sqnr_db) << " dB)\n";
    r << (ro.kind == LoopKind::continuous_time ? "continuous-time" : "discrete-time") << " CIFF realization";
    if (ro.kind == LoopKind::continuous_time) r << ", excess delay " << format_double(ro.excess_delay);
    r << "\n  feedforward:";
    for (double a : coeffs.feedforward) r << ' ' << format_double(a);
    r << "\n  resonators:";
    for (const auto& g : coeffs.resonators) r << " (" << g.first << ", " << format_double(g.g) << ")";
    r << "\n  dac2 " << format_double(coeffs.dac2_gain) << ", input gain " << format_double(coeffs.input_gain) << "\n";
    r << "STF peak " << fixed(stf.peak_magnitude, 3) << " (" << fixed(20.0 * std::log10(stf.peak_magnitude)) << " dB) at "
      << fixed(stf.peak_omega / (2.0 * std::numbers::pi), 4) << " f_s\n";
    emit_report(dir, "synth_report.txt", r.str());

    {
        auto f = open_out(dir / "ntf.json");
        f << to_json(ntf) << '\n';
    }
    std::vector<double> fx, ntf_db, stf_db;
    {
        auto f = open_out(dir / "synth_response.csv");
        f << "freq_over_fs,ntf_db,stf_db\n";
        for (std::size_t i = 1; i <= 1024; ++i) {
            const double w = std::numbers::pi * static_cast<double>(i) / 1024.0;
            const double n = 20.0 * std::log10(ntf.magnitude(w));
            const double s = 20.0 * std::log10(std::abs(stf_response(coeffs, w)));
            f << format_double(w / (2.0 * std::numbers::pi)) << ',' << format_double(n) << ',' << format_double(s) << '\n';
            fx.push_back(w / (2.0 * std::numbers::pi));
            ntf_db.push_back(n);
            stf_db.push_back(s);
        }
    }
    if (c.svg) {
        auto f = open_out(dir / "synth_response.svg");
        write_svg_plot(f, {{"NTF", fx, ntf_db}, {"STF", fx, stf_db}},
                       {"Loop transfer functions", "frequency / f_s", "magnitude (dB)", true});
    }
    return exit_ok;
}

// ---------------------------------------------------------------- sim

std::vector<ConfigKey> sim_schema() {
    return {
        {"order", ValueKind::integer, "", 1, 8, {}, "loop order"},
        {"osr", ValueKind::number, "", 1.0, 1e6, {}, "oversampling ratio"},
        {"h_inf", ValueKind::number, "", 1.0, 10.0, {}, "out-of-band NTF gain bound"},
        {"kind", ValueKind::text, "", 0, 0, {"ct", "dt"}, "loop filter realization"},
        {"f_s", ValueKind::number, "Hz", 1.0, 1e12, {}, "design clock"},
        {"fs_ratio", ValueKind::number, "", 0.1, 10.0, {}, "applied clock / design clock"},
        {"amplitude", ValueKind::number, "dBFS", -200.0, 6.0, {}, "fixed input amplitude (default: peak search)"},
        {"amp_min", ValueKind::number, "dBFS", -200.0, 6.0, {}, "amplitude grid start"},
        {"amp_max", ValueKind::number, "dBFS", -200.0, 6.0, {}, "amplitude grid end"},
        {"amp_step", ValueKind::number, "dB", 0.01, 50.0, {}, "amplitude grid step"},
        {"jitter", ValueKind::number, "s", 0.0, 1e-6, {}, "rms clock jitter"},
        {"thermal", ValueKind::text, "", 0, 0, {}, "in-band thermal noise variance or 'auto' (4x quantization noise)"},
        {"tc_error", ValueKind::number, "", -0.49, 0.49, {}, "common integrator time-constant error dk/k"},
        {"fft_length", ValueKind::integer, "", 64, 1 << 24, {}, "analysis record"},
        {"runs", ValueKind::integer, "", 1, 1024, {}, "seeds averaged per point"},
        {"seed", ValueKind::integer, "", 0, 9e15, {}, "random seed"},
        {"sweep", ValueKind::text, "", 0, 0, {"none", "amp", "tc", "fs", "jitter"}, "parameter sweep"},
        {"from", ValueKind::number, "", -1e6, 1e6, {}, "sweep start (dk/k, clock ratio, dBFS or ps)"},
        {"to", ValueKind::number, "", -1e6, 1e6, {}, "sweep end"},
        {"step", ValueKind::number, "", 1e-9, 1e6, {}, "sweep step"},
    };
}

struct SimSetup {
    ModulatorConfig mod;
    ToneTest test;
    std::vector<double> amps;
    std::string thermal_note;
};

SimSetup build_sim(const Config& cfg) {
    SimSetup s;
    const int order = static_cast<int>(cfg.integer("order", 4));
    const double osr = cfg.number("osr", 50.0);
    if (!(osr > 1.0)) throw UsageError("osr must be > 1");
    const double f_s = cfg.number("f_s", 100e6);
    s.mod = design_modulator(order, osr, f_s, parse_kind(cfg.text("kind", "ct")), cfg.number("h_inf", 1.5));
    s.mod.f_s_actual = f_s * cfg.number("fs_ratio", 1.0);
    s.mod.tc_error = cfg.number("tc_error", 0.0);
    s.mod.seed = static_cast<std::uint64_t>(cfg.integer("seed", 1));
    s.test.fft_length = static_cast<std::size_t>(cfg.integer("fft_length", 1 << 16));
    check_power_of_two(static_cast<long long>(s.test.fft_length), "fft_length");
    s.test.runs = static_cast<std::size_t>(cfg.integer("runs", 1));
    s.test.f_band = f_s / (2.0 * osr);
    s.amps = amplitude_grid(cfg.number("amp_min", -20.0), cfg.number("amp_max", 0.0), cfg.number("amp_step", 0.5));

    const std::string th = cfg.text("thermal", "0");
    if (th == "auto") {
        ModulatorConfig nominal = s.mod;
        nominal.f_s_actual = f_s;
        nominal.tc_error = 0.0;
        const auto q = quantization_baseline(nominal, s.amps, s.test);
        s.mod.thermal_noise_variance = 4.0 * q.sigma2_q;
        s.thermal_note = "thermal noise variance " + format_double(s.mod.thermal_noise_variance) +
                         " (4x quantization noise " + format_double(q.sigma2_q) + ", ideal peak SNR " +
                         fixed(q.peak_snr_db) + " dB)\n";
    } else {
        try {
            s.mod.thermal_noise_variance = parse_quantity(th, "");
        } catch (const ArgumentError& e) {
            throw UsageError(std::string("thermal: ") + e.what());
        }
        if (s.mod.thermal_noise_variance < 0.0) throw UsageError("thermal must be >= 0 or 'auto'");
    }
    s.mod.jitter.sigma_t = cfg.number("jitter", 0.0);
    try {
        s.mod.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    return s;
}

std::string describe_mod(const ModulatorConfig& m) {
    std::ostringstream r;
    r << "order " << m.coeffs.order() << (m.kind() == LoopKind::continuous_time ? " continuous-time" : " discrete-time")
      << ", osr " << format_double(m.osr) << ", f_s " << format_double(m.f_s) << " Hz, applied clock "
      << format_double(m.f_s_actual) << " Hz\n";
    r << "jitter " << format_double(m.jitter.sigma_t) << " s rms, thermal variance " << format_double(m.thermal_noise_variance)
      << ", tc error " << format_double(m.tc_error) << ", seed " << m.seed << "\n";
    return r.str();
}

int cmd_sim(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
    const auto cfg = load_config(sim_schema(), c, flags);
    const std::string sweep = cfg.text("sweep", "none");
    const bool has_range = cfg.has("from") || cfg.has("to") || cfg.has("step");
    if (sweep == "none" && has_range) throw UsageError("--from/--to/--step need --sweep");
    auto s = build_sim(cfg);
    const auto dir = prepare_out(c);
    std::ostringstream r;
    r << describe_mod(s.mod) << s.thermal_note;

    auto range = [&](double lo, double hi, double step) {
        try {
            return amplitude_grid(cfg.number("from", lo), cfg.number("to", hi), cfg.number("step", step));
        } catch (const ArgumentError& e) {
            throw UsageError(e.what());
        }
    };

    if (sweep == "amp") {
        const auto grid = has_range ? range(-20, 0, 0.5) : s.amps;
        const auto pts = sweep_amplitude(s.mod, grid, s.test);
        auto f = open_out(dir / "amplitude_sweep.csv");
        f << "amplitude_dbfs,snr_db,sndr_db,stable\n";
        std::vector<double> x, y;
        for (const auto& p : pts) {
            f << format_double(p.amplitude_dbfs) << ',' << format_double(p.snr_db) << ',' << format_double(p.sndr_db) << ','
              << (p.stable ? 1 : 0) << '\n';
            x.push_back(p.amplitude_dbfs);
            y.push_back(p.stable ? p.snr_db : NAN);
        }
        try {
            const auto pk = peak_point(pts);
            r << "peak SNR " << fixed(pk.snr_db) << " dB at " << fixed(pk.amplitude_dbfs) << " dBFS\n";
        } catch (const MeasurementError&) {
            r << "no stable amplitude in the sweep\n";
        }
        if (c.svg) {
            auto g = open_out(dir / "amplitude_sweep.svg");
            write_svg_plot(g, {{"SNR", x, y}}, {"SNR versus input amplitude", "amplitude (dBFS)", "SNR (dB)"});
        }
    } else if (sweep == "tc") {
        const auto dk = range(-0.2, 0.3, 0.05);
        const auto cells = sweep_tc_error(s.mod, dk, s.amps, s.test);
        auto f = open_out(dir / "tc_sweep.csv");
        write_tc_sweep_csv(f, cells);
        r << "dk/k  max stable amplitude (dBFS)  peak SQNR (dB)\n";
        std::vector<double> y;
        for (double d : dk) {
            r << "  " << fixed(d, 3) << "  " << fixed(max_stable_amplitude(cells, d)) << "  " << fixed(peak_sqnr_for(cells, d))
              << '\n';
            const double p = peak_sqnr_for(cells, d);
            y.push_back(std::isfinite(p) ? p : NAN);
        }
        if (c.svg) {
            auto g = open_out(dir / "tc_sweep.svg");
            write_svg_plot(g, {{"peak SQNR", dk, y}}, {"Time-constant error", "dk/k", "peak SQNR (dB)"});
        }
    } else if (sweep == "fs") {
        const auto ratios = range(0.6, 1.3, 0.05);
        const auto pts = sweep_clock(s.mod, ratios, s.amps, s.test);
        auto f = open_out(dir / "clock_sweep.csv");
        write_clock_sweep_csv(f, pts);
        r << "clock ratio  peak SNDR (dB)  at amplitude (dBFS)  stable\n";
        std::vector<double> y;
        for (const auto& p : pts) {
            r << "  " << fixed(p.ratio, 3) << "  " << fixed(p.peak_sndr_db) << "  " << fixed(p.amplitude_dbfs) << "  "
              << (p.stable ? "yes" : "no") << '\n';
            y.push_back(std::isfinite(p.peak_sndr_db) ? p.peak_sndr_db : NAN);
        }
        if (c.svg) {
            auto g = open_out(dir / "clock_sweep.svg");
            write_svg_plot(g, {{"peak SNDR", ratios, y}}, {"Clock frequency error", "f_s actual / f_s", "peak SNDR (dB)"});
        }
    } else if (sweep == "jitter") {
        const auto ps = range(0.0, 2.0, 0.2);
        std::vector<double> y, a;
        for (double p : ps) {
            if (p < 0.0) throw UsageError("jitter sweep values must be >= 0 ps");
            ModulatorConfig m = s.mod;
            m.jitter.sigma_t = p * 1e-12;
            const auto pts = sweep_amplitude(m, s.amps, s.test);
            try {
                const auto pk = peak_point(pts);
                y.push_back(pk.snr_db);
                a.push_back(pk.amplitude_dbfs);
            } catch (const MeasurementError&) {
                y.push_back(NAN);
                a.push_back(NAN);
            }
        }
        auto f = open_out(dir / "jitter_sweep.csv");
        f << "sigma_t_ps,peak_snr_db,amplitude_dbfs\n";
        r << "jitter (ps)  peak SNR (dB)\n";
        for (std::size_t i = 0; i < ps.size(); ++i) {
            f << format_double(ps[i]) << ',' << format_double(y[i]) << ',' << format_double(a[i]) << '\n';
            r << "  " << fixed(ps[i]) << "  " << fixed(y[i]) << '\n';
        }
        if (c.svg) {
            auto g = open_out(dir / "jitter_sweep.svg");
            write_svg_plot(g, {{"peak SNR", ps, y}}, {"Clock jitter", "sigma_t (ps)", "peak SNR (dB)"});
        }
    } else {
        double amp;
        if (cfg.has("amplitude")) {
            amp = cfg.number("amplitude", -6.0);
        } else {
            const auto pts = sweep_amplitude(s.mod, s.amps, s.test);
            try {
                const auto pk = peak_point(pts);
                amp = pk.amplitude_dbfs;
                r << "SNR_max " << fixed(pk.snr_db) << " dB at " << fixed(pk.amplitude_dbfs) << " dBFS\n";
            } catch (const MeasurementError&) {
                r << "no stable amplitude on the grid; modulator unstable\n";
                emit_report(dir, "sim_report.txt", r.str());
                return exit_ok;
            }
        }
        const double ft = s.test.tone(s.mod);
        const auto u = generate_tone(ft, std::pow(10.0, amp / 20.0) * s.mod.delta / 2.0, 0.0,
                                     s.test.fft_length + s.test.settle, s.mod.f_s_actual);
        const auto bits = simulate(s.mod, u);
        {
            auto f = open_out(dir / "bitstream.csv");
            write_bitstream_csv(f, bits);
        }
        r << "tone " << format_double(ft) << " Hz at " << fixed(amp) << " dBFS, band " << format_double(s.test.band(s.mod))
          << " Hz\n";
        if (!bits.stable) r << "UNSTABLE: state bound exceeded at sample " << bits.unstable_at << '\n';
        if (bits.bits.size() >= s.test.fft_length) {
            const auto m = measure_tone(bits.signal(), s.test.fft_length, s.test.band(s.mod), ft);
            r << "SNR " << fixed(m.snr_db) << " dB, SNDR " << fixed(m.sndr.in_band_db) << " dB (wideband "
              << fixed(m.sndr.wideband_db) << " dB)\n";
            const auto db = m.spectrum.to_dbfs();
            auto f = open_out(dir / "spectrum.csv");
            write_spectrum_csv(f, m.spectrum);
            if (c.svg) {
                std::vector<double> x(db.bin_freqs.begin() + 1, db.bin_freqs.end()), y(db.psd.begin() + 1, db.psd.end());
                auto g = open_out(dir / "spectrum.svg");
                write_svg_plot(g, {{"PSD", x, y}}, {"Output spectrum", "frequency (Hz)", "PSD (dBFS/bin)", true});
            }
        } else {
            r << "run stopped before a full analysis record\n";
        }
    }
    emit_report(dir, "sim_report.txt", r.str());
    return exit_ok;
}

// ---------------------------------------------------------------- link

std::vector<ConfigKey> link_schema() {
    return {
        {"f_s", ValueKind::number, "Hz", 1e3, 1e11, {}, "modulator clock"},
        {"order", ValueKind::integer, "", 1, 8, {}, "modulator order"},
        {"kind", ValueKind::text, "", 0, 0, {"ct", "dt"}, "modulator loop realization"},
        {"dither", ValueKind::number, "", 0.0, 1.0, {}, "modulator thermal noise variance"},
        {"f_lo", ValueKind::number, "Hz", 1.0, 1e11, {}, "local oscillator"},
        {"f_l", ValueKind::number, "Hz", 1.0, 1e11, {}, "carrier (Larmor) frequency"},
        {"f_b", ValueKind::number, "Hz", 1.0, 1e10, {}, "signal bandwidth"},
        {"mixer", ValueKind::text, "", 0, 0, {"single", "quadrature"}, "mixer topology"},
        {"lpf_order", ValueKind::integer, "", 1, 16, {}, "anti-alias filter order"},
        {"lpf_cutoff", ValueKind::number, "Hz", 0.0, 1e11, {}, "anti-alias cutoff (0: automatic)"},
        {"input_p1db", ValueKind::number, "dBm", -100.0, 60.0, {}, "front-end 1 dB compression point"},
        {"nonlinear", ValueKind::boolean, "", 0, 1, {}, "apply the cubic front-end model"},
        {"gain", ValueKind::number, "dB", -100.0, 100.0, {}, "output DAC full scale relative to 1 V"},
        {"output_noise", ValueKind::number, "dBm/Hz", -300.0, 0.0, {}, "receiver output noise density"},
        {"impedance", ValueKind::number, "ohm", 1e-3, 1e6, {}, "reference impedance for dBm"},
        {"fiber_length", ValueKind::number, "m", 0.0, 1e5, {}, "fiber length"},
        {"tia_bandwidth", ValueKind::number, "Hz", 0.0, 1e12, {}, "TIA bandwidth (0: unlimited)"},
        {"i_bias", ValueKind::number, "A", 0.0, 1.0, {}, "laser bias current"},
        {"i_threshold", ValueKind::number, "A", 0.0, 1.0, {}, "laser threshold current"},
        {"detector_noise", ValueKind::number, "", 0.0, 1e3, {}, "detector noise variance (V^2)"},
        {"retime_delay", ValueKind::number, "s", -1e-3, 1e-3, {}, "fixed retime delay (default: tracks the fiber)"},
        {"tone", ValueKind::number, "dBm", -200.0, 60.0, {}, "single-run tone power"},
        {"n_bits", ValueKind::integer, "", 64, 1 << 24, {}, "bits per record"},
        {"rbw", ValueKind::number, "Hz", 1e-6, 1e9, {}, "noise floor resolution bandwidth"},
        {"sweep_input", ValueKind::text, "", 0, 0, {}, "input sweep lo:hi[:step] in dBm"},
        {"seed", ValueKind::integer, "", 0, 9e15, {}, "random seed"},
    };
}

struct LinkSetup {
    LinkConfig link;
    ModulatorConfig mod;
};

// Defaults describe the bench chain: 20 MHz second-order modulators, -5 dBm input
// compression, 7 dB output gain and a -79 dBm/Hz receiver floor.
LinkSetup build_link(const Config& cfg) {
    LinkSetup s;
    auto& l = s.link;
    l.f_lo = cfg.number("f_lo", 120e6);
    l.f_l = cfg.number("f_l", 119.8e6);
    l.f_b = cfg.number("f_b", 200e3);
    l.mixer_mode = cfg.text("mixer", "single") == "quadrature" ? MixerMode::quadrature : MixerMode::single;
    l.lpf.order = static_cast<int>(cfg.integer("lpf_order", 6));
    l.lpf.cutoff = cfg.number("lpf_cutoff", 0.0);
    l.impedance = cfg.number("impedance", 50.0);
    if (cfg.boolean("nonlinear", true)) {
        const double a = dbm_to_amplitude(cfg.number("input_p1db", -5.0), l.impedance);
        l.nonlinearity.a3 = -(4.0 / 3.0) * (1.0 - std::pow(10.0, -1.0 / 20.0)) / (a * a);
    }
    l.dac_full_scale = std::pow(10.0, cfg.number("gain", 7.0) / 20.0);
    l.output_noise_dbm_hz = cfg.number("output_noise", -79.0);
    l.fiber_length = cfg.number("fiber_length", 2.0);
    l.optical.tia_bandwidth = cfg.number("tia_bandwidth", 70e6);
    l.optical.i_bias = cfg.number("i_bias", l.optical.i_bias);
    l.optical.i_threshold = cfg.number("i_threshold", l.optical.i_threshold);
    l.optical.detector_noise_variance = cfg.number("detector_noise", 0.0);
    if (cfg.has("retime_delay")) {
        l.auto_retime = false;
        l.retime_delay = cfg.number("retime_delay", 0.0);
    }
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed", 11));
    l.seed = seed;
    try {
        l.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    const double f_s = cfg.number("f_s", 20e6);
    const double osr = f_s / (2.0 * l.baseband_edge());
    if (!(osr > 1.0)) throw UsageError("f_s is too low for the link bandwidth (osr " + format_double(osr) + ")");
    s.mod = design_modulator(static_cast<int>(cfg.integer("order", 2)), osr, f_s, parse_kind(cfg.text("kind", "dt")));
    s.mod.thermal_noise_variance = cfg.number("dither", 1e-7);
    s.mod.seed = seed + 1;
    return s;
}

int cmd_link(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
    const auto cfg = load_config(link_schema(), c, flags);
    auto s = build_link(cfg);
    const auto n_bits = cfg.integer("n_bits", 1 << 16);
    check_power_of_two(n_bits, "n_bits");
    const double rbw = cfg.number("rbw", 1.0);
    const auto dir = prepare_out(c);
    const auto& l = s.link;
    const double rate = rf_sample_rate(l, s.mod.f_s_actual);

    std::ostringstream r;
    r << "reference impedance " << format_double(l.impedance) << " ohm (all powers in dBm)\n";
    r << "carrier " << format_double(l.f_l) << " Hz, LO " << format_double(l.f_lo) << " Hz, bandwidth " << format_double(l.f_b)
      << " Hz, " << (l.mixer_mode == MixerMode::single ? "single" : "quadrature") << " mixer, RF simulation rate "
      << format_double(rate) << " Hz\n";
    r << describe_mod(s.mod);

    if (cfg.has("sweep_input")) {
        const auto grid = parse_range(cfg.text("sweep_input", ""), 2.0);
        const auto rep = link_input_sweep(l, s.mod, grid, static_cast<std::size_t>(n_bits), rbw);
        {
            auto f = open_out(dir / "link_sweep.csv");
            write_sweep_csv(f, rep.sweep);
        }
        std::ostringstream p;
        write_p1db_report(p, rep.p1db, rep.noise_floor_in_dbm, l.impedance);
        r << p.str();
        r << "output noise floor " << fixed(rep.noise_floor_out_dbm) << " dBm in " << format_double(rbw) << " Hz\n";
        r << "input noise floor " << fixed(rep.noise_floor_in_dbm) << " dBm in " << format_double(rbw) << " Hz\n";
        r << "dynamic range " << fixed(rep.dynamic_range_db) << " dB\n";
        if (c.svg) {
            std::vector<double> x, y, fit;
            for (const auto& pt : rep.sweep.points) {
                x.push_back(pt.input);
                y.push_back(pt.output);
                fit.push_back(rep.p1db.gain_db + pt.input);
            }
            auto g = open_out(dir / "link_sweep.svg");
            write_svg_plot(g, {{"measured", x, y}, {"small-signal gain", x, fit}},
                           {"End-to-end linearity", "input power (dBm)", "output power (dBm)"});
        }
    } else {
        const auto per_bit = static_cast<std::size_t>(std::llround(rate / s.mod.f_s_actual));
        const std::size_t n = per_bit * static_cast<std::size_t>(n_bits);
        const std::size_t len = n + n / 4;
        const double f_tone = 4.0 * std::round(l.f_l * static_cast<double>(n) / (4.0 * rate)) * rate / static_cast<double>(n);
        const double dbm = cfg.number("tone", -20.0);
        const auto rf = generate_tone(f_tone, dbm_to_amplitude(dbm, l.impedance), 0.0, len, rate);
        const auto res = run_chain(rf, l, s.mod, true);
        res.trace.export_csv(dir / "trace");
        const auto m = measure_link_output(res.output, l, f_tone, 1);
        r << "tone " << format_double(f_tone) << " Hz at " << fixed(dbm) << " dBm\n";
        r << "output " << fixed(m.output_dbm) << " dBm, gain " << fixed(m.output_dbm - dbm) << " dB, in-band SNR "
          << fixed(m.snr_db) << " dB, noise density " << fixed(m.noise_density_dbm_hz) << " dBm/Hz\n";
        r << "bit errors " << res.bit_errors << ", modulator " << (res.modulator_stable ? "stable" : "UNSTABLE") << '\n';
        for (std::size_t i = 0; i < res.received.size(); ++i) {
            const auto& rt = res.received[i];
            r << "retime channel " << i << ": phase error " << format_double(rt.phase_error) << " s, worst-case margin "
              << format_double(rt.margin) << " s" << (rt.violation ? " (VIOLATION)" : "") << '\n';
        }
        r << "stage traces written to " << (dir / "trace").string() << '\n';
    }
    emit_report(dir, "link_report.txt", r.str());
    return exit_ok;
}

// ---------------------------------------------------------------- kspace

std::vector<ConfigKey> kspace_schema() {
    return {
        {"size", ValueKind::integer, "", 8, 4096, {}, "phantom grid size"},
        {"noise_dbc", ValueKind::number, "dB", 0.0, 300.0, {}, "phantom noise floor below peak (0: none)"},
        {"taper", ValueKind::number, "", 0.0, 10.0, {}, "phantom k-space taper (0: none)"},
        {"dwell_time", ValueKind::number, "s", 1e-12, 1.0, {}, "phantom dwell time per sample"},
        {"seed", ValueKind::integer, "", 0, 9e15, {}, "random seed"},
        {"f_s", ValueKind::number, "Hz", 1e3, 1e11, {}, "fidelity link modulator clock"},
        {"f_l", ValueKind::number, "Hz", 1.0, 1e11, {}, "fidelity link carrier"},
    };
}

int cmd_kspace(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags, const std::string& action,
               const std::string& file) {
    const auto cfg = load_config(kspace_schema(), c, flags);
    const auto dir = prepare_out(c);
    std::ostringstream r;

    if (action == "phantom") {
        const auto n = static_cast<std::size_t>(cfg.integer("size", 64));
        PhantomOptions po;
        po.taper = cfg.number("taper", po.taper);
        po.dwell_time = cfg.number("dwell_time", po.dwell_time);
        auto k = generate_phantom(n, n, default_phantom(), po);
        const double dbc = cfg.number("noise_dbc", 90.0);
        if (dbc > 0.0) add_kspace_noise(k, dbc, static_cast<std::uint64_t>(cfg.integer("seed", 1)));
        save_kspace(k, file);
        r << "wrote " << n << "x" << n << " phantom to " << file;
        if (dbc > 0.0) r << " with noise " << format_double(dbc) << " dB below peak";
        r << '\n';
        std::cout << r.str();
        return exit_ok;
    }

    if (!fs::exists(file)) throw std::runtime_error("file not found: " + file);
    KSpaceData k;
    try {
        k = load_kspace(file);
    } catch (const ParseError& e) {
        throw std::runtime_error(file + ": " + e.what() + " (at " + std::to_string(e.location()) + ")");
    }
    r << file << ": " << k.rows << "x" << k.cols << ", dwell " << format_double(k.dwell_time) << " s\n";

    if (action == "dr") {
        r << "dynamic range " << fixed(kspace_dynamic_range(k), 1) << " dB\n";
        emit_report(dir, "kspace_report.txt", r.str());
    } else if (action == "recon") {
        const auto img = reconstruct_image(k);
        {
            auto f = open_out(dir / "image.pgm");
            write_pgm(f, img);
        }
        auto f = open_out(dir / "image.csv");
        write_image_csv(f, img);
        r << "image written to " << (dir / "image.pgm").string() << " and image.csv\n";
        emit_report(dir, "kspace_report.txt", r.str());
    } else {
        // Zero-IF quadrature link whose band just holds the row, with three modulator classes.
        const double f_s = cfg.number("f_s", 20e6);
        LinkConfig link;
        link.mixer_mode = MixerMode::quadrature;
        link.f_l = link.f_lo = cfg.number("f_l", 119.8e6);
        link.f_b = 2.0 / k.dwell_time;
        const double osr = f_s / link.f_b;
        if (!(osr > 2.0)) throw UsageError("f_s too low for the k-space dwell time");

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

        struct Class {
            std::string name;
            ModulatorConfig mod;
        };
        const std::vector<Class> classes = {{"2nd-order DT, 52 dB noise floor", low},
                                            {"4th-order CT, 81 dB noise floor", noisy},
                                            {"4th-order CT, ideal", ideal}};
        auto f = open_out(dir / "fidelity.csv");
        f << "modulator,nrmse,bit_errors,stable\n";
        for (std::size_t i = 0; i < classes.size(); ++i) {
            const auto res = link_fidelity(k, link, classes[i].mod);
            f << '"' << classes[i].name << "\"," << format_double(res.nrmse) << ',' << res.bit_errors << ','
              << (res.modulator_stable ? 1 : 0) << '\n';
            r << classes[i].name << ": NRMSE " << format_double(res.nrmse) << '\n';
            if (i + 1 == classes.size()) {
                auto g = open_out(dir / "fidelity_image.pgm");
                write_pgm(g, res.received);
            }
        }
        emit_report(dir, "kspace_report.txt", r.str());
    }
    return exit_ok;
}

// ---------------------------------------------------------------- sweep-fig5

std::vector<ConfigKey> fig5_schema() {
    return {
        {"orders", ValueKind::text, "", 0, 0, {}, "comma-separated loop orders"},
        {"osr", ValueKind::text, "", 0, 0, {}, "comma-separated oversampling ratios"},
        {"h_inf", ValueKind::number, "", 1.0, 10.0, {}, "out-of-band NTF gain bound"},
        {"optimize_zeros", ValueKind::boolean, "", 0, 1, {}, "spread NTF zeros across the band"},
        {"fft_length", ValueKind::integer, "", 64, 1 << 24, {}, "simulation record"},
    };
}

int cmd_fig5(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
    const auto cfg = load_config(fig5_schema(), c, flags);
    std::vector<int> orders;
    for (double o : parse_list(cfg.text("orders", "1,2,3,4,5,6,7,8"))) {
        if (o != std::floor(o) || o < 1 || o > 8) throw UsageError("orders must be integers in 1..8");
        orders.push_back(static_cast<int>(o));
    }
    const auto osrs = parse_list(cfg.text("osr", "8,16,32,50,64,128"));
    for (double o : osrs)
        if (!(o > 1.0)) throw UsageError("osr values must be > 1");
    SqnrOptions so;
    so.fft_length = static_cast<std::size_t>(cfg.integer("fft_length", 1 << 16));
    check_power_of_two(static_cast<long long>(so.fft_length), "fft_length");
    const auto dir = prepare_out(c);

    const auto cells = sweep_peak_sqnr(orders, osrs, cfg.number("h_inf", 1.5), cfg.boolean("optimize_zeros", true), so);
    {
        auto f = open_out(dir / "fig5.csv");
        write_sqnr_sweep_csv(f, cells);
    }
    std::ostringstream r;
    r << "peak SQNR (dB)\norder";
    for (double o : osrs) r << "  osr " << format_double(o);
    r << '\n';
    std::vector<PlotSeries> series;
    for (int n : orders) {
        r << n;
        PlotSeries ps{"N=" + std::to_string(n), {}, {}};
        for (const auto& cell : cells)
            if (cell.order == n) {
                r << "  " << (cell.ok ? fixed(cell.peak_sqnr_db, 1) : std::string("failed"));
                ps.x.push_back(cell.osr);
                ps.y.push_back(cell.ok ? cell.peak_sqnr_db : NAN);
            }
        r << '\n';
        series.push_back(std::move(ps));
    }
    for (const auto& cell : cells)
        if (!cell.ok) r << "order " << cell.order << " osr " << format_double(cell.osr) << ": " << cell.error << '\n';
    emit_report(dir, "fig5_report.txt", r.str());
    if (c.svg) {
        auto g = open_out(dir / "fig5.svg");
        write_svg_plot(g, series, {"Peak SQNR versus oversampling ratio", "OSR", "peak SQNR (dB)", true});
    }
    return exit_ok;
}

} // namespace

std::string key_list(std::vector<ConfigKey> schema) {
    std::ostringstream os;
    os << "\nConfig keys (--config file or --set key=value):\n";
    Config(std::move(schema)).describe(os);
    return os.str();
}

int main(int argc, char** argv) {
    CLI::App app{"Delta-sigma digital RF-over-fiber toolkit.\n"
                 "DSFL_THREADS caps the worker threads used by sweeps."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dsfl 0.1.0");

    Common common;
    std::vector<std::pair<std::string, std::string>> flags;
    // Flags are recorded as config overrides only when given.
    auto flag_opt = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags.emplace_back(key, v); }, help);
    };

    auto* synth = app.add_subcommand("synth", "synthesize an NTF, predict SQNR and realize the loop filter");
    add_common(synth, common);
    synth->footer(key_list(synth_schema()));
    flag_opt(synth, "--order", "order", "loop order 1..8");
    flag_opt(synth, "--osr", "osr", "oversampling ratio");
    flag_opt(synth, "--h-inf", "h_inf", "out-of-band gain bound");
    flag_opt(synth, "--kind", "kind", "ct or dt");
    flag_opt(synth, "--excess-delay", "excess_delay", "CT excess loop delay (clock periods)");
    synth->add_flag_callback("--no-zero-opt", [&] { flags.emplace_back("optimize_zeros", "false"); }, "keep all zeros at dc");

    auto* sim = app.add_subcommand("sim", "simulate a modulator and measure SNR, or run a sweep");
    add_common(sim, common);
    sim->footer(key_list(sim_schema()));
    flag_opt(sim, "--order", "order", "loop order 1..8");
    flag_opt(sim, "--osr", "osr", "oversampling ratio");
    flag_opt(sim, "--kind", "kind", "ct or dt");
    flag_opt(sim, "--fs", "f_s", "design clock, e.g. 100MHz");
    flag_opt(sim, "--fs-ratio", "fs_ratio", "applied clock / design clock");
    flag_opt(sim, "--amplitude", "amplitude", "fixed amplitude in dBFS");
    flag_opt(sim, "--thermal", "thermal", "thermal noise variance or 'auto'");
    flag_opt(sim, "--tc-error", "tc_error", "integrator time-constant error dk/k");
    flag_opt(sim, "--fft-length", "fft_length", "analysis record length");
    flag_opt(sim, "--runs", "runs", "seeds averaged per point");
    flag_opt(sim, "--seed", "seed", "random seed");
    flag_opt(sim, "--sweep", "sweep", "amp, tc, fs or jitter");
    flag_opt(sim, "--from", "from", "sweep start");
    flag_opt(sim, "--to", "to", "sweep end");
    flag_opt(sim, "--step", "step", "sweep step");
    sim->add_option_function<std::string>(
        "--jitter-ps", [&](const std::string& v) { flags.emplace_back("jitter", v + "ps"); }, "rms clock jitter in ps");

    auto* link = app.add_subcommand("link", "run the transmit/receive chain or an input-power sweep");
    add_common(link, common);
    link->footer(key_list(link_schema()));
    flag_opt(link, "--sweep-input", "sweep_input", "input sweep lo:hi[:step] in dBm");
    flag_opt(link, "--tone", "tone", "single-run tone power in dBm");
    flag_opt(link, "--mixer", "mixer", "single or quadrature");
    flag_opt(link, "--fiber-length", "fiber_length", "fiber length, e.g. 2m");
    flag_opt(link, "--n-bits", "n_bits", "bits per record");
    flag_opt(link, "--seed", "seed", "random seed");

    auto* ksp = app.add_subcommand("kspace", "k-space tools: dr, recon, phantom, fidelity");
    add_common(ksp, common);
    ksp->footer(key_list(kspace_schema()));
    std::string action, file;
    ksp->add_option("action", action, "dr | recon | phantom | fidelity")
        ->required()
        ->check(CLI::IsMember({"dr", "recon", "phantom", "fidelity"}));
    ksp->add_option("file", file, "k-space file (.ksp); output path for phantom")->required();
    flag_opt(ksp, "--size", "size", "phantom grid size");
    flag_opt(ksp, "--noise-dbc", "noise_dbc", "phantom noise below peak in dB (0: none)");
    flag_opt(ksp, "--seed", "seed", "random seed");

    auto* fig5 = app.add_subcommand("sweep-fig5", "peak SQNR over loop order and oversampling ratio");
    add_common(fig5, common);
    fig5->footer(key_list(fig5_schema()));
    flag_opt(fig5, "--orders", "orders", "comma-separated orders");
    flag_opt(fig5, "--osr", "osr", "comma-separated oversampling ratios");
    flag_opt(fig5, "--fft-length", "fft_length", "simulation record");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, flags);
        if (sim->parsed()) return cmd_sim(common, flags);
        if (link->parsed()) return cmd_link(common, flags);
        if (ksp->parsed()) return cmd_kspace(common, flags, action, file);
        if (fig5->parsed()) return cmd_fig5(common, flags);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_usage;
    } catch (const SynthesisError& e) {
        std::cerr << "synthesis failed: " << e.what() << " (achieved out-of-band gain " << e.achieved_h_inf() << ")\n";
        return exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_failure;
}
