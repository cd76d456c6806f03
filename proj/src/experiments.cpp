#include "dsfl/experiments.hpp"

#include "dsfl/error.hpp"
#include "dsfl/jitter.hpp"
#include "dsfl/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace dsfl {

namespace {
constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double db(double x) { return 10.0 * std::log10(x); }
} // namespace

double ToneTest::band(const ModulatorConfig& cfg) const {
    return f_band > 0.0 ? f_band : cfg.f_s / (2.0 * cfg.osr);
}

double ToneTest::tone(const ModulatorConfig& cfg) const {
    return coherent_frequency(f_tone > 0.0 ? f_tone : band(cfg) / 3.0, fft_length, cfg.f_s_actual);
}

AmplitudePoint measure_amplitude(const ModulatorConfig& cfg, double amplitude_dbfs, const ToneTest& test) {
    if (test.runs == 0) throw ArgumentError("runs must be >= 1");
    const double ft = test.tone(cfg);
    const double fb = test.band(cfg);
    const double amp = std::pow(10.0, amplitude_dbfs / 20.0) * cfg.delta / 2.0;
    const auto u = generate_tone(ft, amp, 0.0, test.fft_length + test.settle, cfg.f_s_actual);

    AmplitudePoint p;
    p.amplitude_dbfs = amplitude_dbfs;
    double sig = 0.0, noise = 0.0, nd = 0.0;
    for (std::size_t r = 0; r < test.runs; ++r) {
        ModulatorConfig c = cfg;
        c.seed = cfg.seed + r;
        const auto bits = simulate(c, u);
        if (!bits.stable) p.stable = false;
        if (bits.bits.size() < test.fft_length) {
            p.snr_db = p.sndr_db = neg_inf;
            return p;
        }
        const auto m = measure_tone(bits.signal(), test.fft_length, fb, ft);
        sig += m.signal_power;
        noise += m.noise_power;
        nd += m.signal_power / std::pow(10.0, m.sndr.in_band_db / 10.0);
    }
    const double n = static_cast<double>(test.runs);
    p.signal_power = sig / n;
    p.noise_power = noise / n;
    p.snr_db = db(sig / noise);
    p.sndr_db = db(sig / nd);
    return p;
}

std::vector<AmplitudePoint> sweep_amplitude(const ModulatorConfig& cfg, const std::vector<double>& amps_dbfs,
                                            const ToneTest& test) {
    cfg.validate();
    std::vector<AmplitudePoint> out(amps_dbfs.size());
    parallel_for(amps_dbfs.size(), [&](std::size_t i) { out[i] = measure_amplitude(cfg, amps_dbfs[i], test); });
    return out;
}

AmplitudePoint peak_point(const std::vector<AmplitudePoint>& sweep) {
    const AmplitudePoint* best = nullptr;
    for (const auto& p : sweep)
        if (p.stable && (!best || p.snr_db > best->snr_db)) best = &p;
    if (!best) throw MeasurementError("no stable amplitude in sweep");
    return *best;
}

std::vector<double> amplitude_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw ArgumentError("amplitude grid needs step > 0 and hi >= lo");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
    return g;
}

std::vector<TcCell> sweep_tc_error(const ModulatorConfig& cfg, const std::vector<double>& dk_grid,
                                   const std::vector<double>& amp_grid, const ToneTest& test) {
    if (dk_grid.empty() || amp_grid.empty()) throw ArgumentError("tc sweep grids must be non-empty");
    cfg.validate();
    const std::size_t na = amp_grid.size();
    std::vector<TcCell> cells(dk_grid.size() * na);
    parallel_for(cells.size(), [&](std::size_t i) {
        ModulatorConfig c = cfg;
        c.tc_error = dk_grid[i / na];
        c.tc_errors.clear();
        c.validate();
        const auto p = measure_amplitude(c, amp_grid[i % na], test);
        cells[i] = {c.tc_error, p.amplitude_dbfs, p.snr_db, p.stable};
    });
    return cells;
}

void write_tc_sweep_csv(std::ostream& os, const std::vector<TcCell>& cells) {
    os << "dk_over_k,amplitude_fs,sqnr_db,stable\n";
    for (const auto& c : cells)
        os << format_double(c.dk_over_k) << ',' << format_double(std::pow(10.0, c.amplitude_dbfs / 20.0)) << ','
           << (c.stable ? format_double(c.sqnr_db) : std::string("nan")) << ',' << (c.stable ? 1 : 0) << '\n';
}

double max_stable_amplitude(const std::vector<TcCell>& cells, double dk_over_k) {
    double best = neg_inf;
    for (const auto& c : cells)
        if (c.dk_over_k == dk_over_k && c.stable) best = std::max(best, c.amplitude_dbfs);
    return best;
}

double peak_sqnr_for(const std::vector<TcCell>& cells, double dk_over_k) {
    double best = neg_inf;
    for (const auto& c : cells)
        if (c.dk_over_k == dk_over_k && c.stable) best = std::max(best, c.sqnr_db);
    return best;
}

std::vector<ClockPoint> sweep_clock(const ModulatorConfig& cfg, const std::vector<double>& ratios,
                                    const std::vector<double>& amp_grid, const ToneTest& test) {
    if (ratios.empty() || amp_grid.empty()) throw ArgumentError("clock sweep grids must be non-empty");
    cfg.validate();
    ToneTest t = test;
    t.f_band = test.band(cfg);
    t.f_tone = test.f_tone > 0.0 ? test.f_tone : t.f_band / 3.0;
    const std::size_t na = amp_grid.size();
    std::vector<AmplitudePoint> pts(ratios.size() * na);
    parallel_for(pts.size(), [&](std::size_t i) {
        ModulatorConfig c = cfg;
        c.f_s_actual = cfg.f_s * ratios[i / na];
        c.stop_on_unstable = false;
        c.validate();
        pts[i] = measure_amplitude(c, amp_grid[i % na], t);
    });
    std::vector<ClockPoint> out;
    for (std::size_t r = 0; r < ratios.size(); ++r) {
        ClockPoint cp{ratios[r], neg_inf, 0.0, false};
        for (std::size_t a = 0; a < na; ++a) {
            const auto& p = pts[r * na + a];
            cp.stable = cp.stable || p.stable;
            if (std::isfinite(p.sndr_db) && p.sndr_db > cp.peak_sndr_db) {
                cp.peak_sndr_db = p.sndr_db;
                cp.amplitude_dbfs = p.amplitude_dbfs;
            }
        }
        out.push_back(cp);
    }
    return out;
}

void write_clock_sweep_csv(std::ostream& os, const std::vector<ClockPoint>& pts) {
    os << "fs_ratio,peak_sndr_db,amplitude_dbfs,stable\n";
    for (const auto& p : pts)
        os << format_double(p.ratio) << ',' << format_double(p.peak_sndr_db) << ',' << format_double(p.amplitude_dbfs)
           << ',' << (p.stable ? 1 : 0) << '\n';
}

QuantizationBaseline quantization_baseline(const ModulatorConfig& cfg, const std::vector<double>& amp_grid,
                                           const ToneTest& test) {
    ModulatorConfig ideal = cfg;
    ideal.thermal_noise_variance = 0.0;
    ideal.jitter = {};
    const auto peak = peak_point(sweep_amplitude(ideal, amp_grid, test));
    return {peak.noise_power, peak.snr_db, peak.amplitude_dbfs};
}

JitterNoise measure_jitter_noise(const ModulatorConfig& cfg, const TransferFunction& ntf, double amplitude_dbfs,
                                 const ToneTest& test) {
    cfg.validate();
    const double sigma_t = cfg.jitter.effective_sigma_t(cfg.f_s_actual);
    ModulatorConfig clean = cfg;
    clean.jitter = {};
    const std::size_t runs = std::max<std::size_t>(1, test.runs);
    const double ft = test.tone(cfg);
    const double fb = test.band(cfg);
    const double amp = std::pow(10.0, amplitude_dbfs / 20.0) * cfg.delta / 2.0;
    const auto u = generate_tone(ft, amp, 0.0, test.fft_length + test.settle, cfg.f_s_actual);

    std::vector<double> diff(runs), trans(runs);
    parallel_for(runs, [&](std::size_t r) {
        ModulatorConfig a = cfg, b = clean;
        a.seed = b.seed = cfg.seed + r;
        const auto with = simulate(a, u);
        const auto without = simulate(b, u);
        if (!with.stable || !without.stable) throw MeasurementError("jitter measurement run went unstable");
        diff[r] = measure_tone(with.signal(), test.fft_length, fb, ft).noise_power -
                  measure_tone(without.signal(), test.fft_length, fb, ft).noise_power;
        double acc = 0.0;
        for (std::size_t i = 1; i < without.bits.size(); ++i) {
            const double d = (without.bits[i] - without.bits[i - 1]) / cfg.delta;
            acc += d * d;
        }
        trans[r] = acc / static_cast<double>(without.bits.size() - 1);
    });
    JitterNoise j;
    for (std::size_t r = 0; r < runs; ++r) {
        j.simulated += diff[r] / static_cast<double>(runs);
        j.transition_rate += trans[r] / static_cast<double>(runs);
    }
    j.closed_form = jitter_variance_closed_form(ntf, cfg.osr, sigma_t, cfg.f_s_actual, cfg.delta);
    return j;
}

} // namespace dsfl
