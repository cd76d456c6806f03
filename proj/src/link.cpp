#include "dsfl/link.hpp"

#include "dsfl/error.hpp"
#include "dsfl/fft.hpp"
#include "dsfl/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace dsfl {

namespace {
constexpr double pi = std::numbers::pi;

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

// cos/sin phase of a carrier at sample i, reduced to one cycle before scaling
double carrier_phase(double f, std::size_t i, double rate) {
    const double cycles = f * static_cast<double>(i) / rate;
    return 2.0 * pi * (cycles - std::floor(cycles));
}

std::vector<double> lo_phase(const LinkConfig& link, std::size_t n, double rate, std::uint64_t seed) {
    if (link.lo_phase_noise.empty()) return std::vector<double>(n, 0.0);
    return synthesize_phase_noise(link.lo_phase_noise, n, rate, seed);
}

std::size_t integer_ratio(double a, double b, const char* what) {
    const double r = a / b;
    const auto k = static_cast<std::size_t>(std::llround(r));
    if (k == 0 || std::abs(r - static_cast<double>(k)) > 1e-9 * r) throw ArgumentError(what);
    return k;
}

std::vector<cplx> mix_products(const RealSignal& rf, const LinkConfig& link) {
    const auto phi = lo_phase(link, rf.size(), rf.sample_rate(), link.seed);
    std::vector<cplx> p(rf.size());
    for (std::size_t i = 0; i < rf.size(); ++i) {
        const double th = carrier_phase(link.f_lo, i, rf.sample_rate()) + phi[i];
        p[i] = link.mixer_mode == MixerMode::single ? cplx(2.0 * rf[i] * std::cos(th), 0.0)
                                                    : 2.0 * rf[i] * std::polar(1.0, -th);
    }
    return p;
}

// Periodic band-limited interpolation by an integer factor.
std::vector<cplx> fft_upsample(const std::vector<cplx>& x, std::size_t factor) {
    const std::size_t n = x.size();
    const std::size_t m = n * factor;
    const auto X = fft::transform(x, true);
    std::vector<cplx> Y(m, 0.0);
    const std::size_t half = n / 2;
    for (std::size_t k = 0; k < half; ++k) Y[k] = X[k];
    for (std::size_t k = half + 1; k < n; ++k) Y[m - n + k] = X[k];
    if (n % 2 == 0) {
        Y[half] = 0.5 * X[half];
        Y[m - half] = 0.5 * X[half];
    } else {
        Y[half] = X[half];
    }
    auto y = fft::transform(Y, false);
    for (auto& v : y) v /= static_cast<double>(n);
    return y;
}

std::vector<double> nrz(const BitstreamResult& b, std::size_t per_bit) {
    std::vector<double> out;
    out.reserve(b.bits.size() * per_bit);
    for (double v : b.bits) out.insert(out.end(), per_bit, v > 0.0 ? 1.0 : -1.0);
    return out;
}

void add_stage(ChainTrace& t, std::string name, double rate, std::vector<double> re, std::vector<double> im = {}) {
    t.stages.push_back({std::move(name), rate, std::move(re), std::move(im)});
}

void add_stage(ChainTrace& t, std::string name, double rate, const std::vector<cplx>& z, bool complex) {
    std::vector<double> re(z.size()), im;
    for (std::size_t i = 0; i < z.size(); ++i) re[i] = z[i].real();
    if (complex) {
        im.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) im[i] = z[i].imag();
    }
    add_stage(t, std::move(name), rate, std::move(re), std::move(im));
}

} // namespace

void OpticalConfig::validate() const {
    for (double v : {i_bias, i_threshold, v_ref, r2, slope_efficiency, responsivity, attenuation_db,
                     detector_noise_variance, tia_bandwidth, tia_transimpedance})
        if (!finite_nonneg(v)) throw ArgumentError("optical parameters must be finite and >= 0");
    if (!(tia_transimpedance > 0.0) || !(responsivity > 0.0) || !(slope_efficiency > 0.0))
        throw ArgumentError("transimpedance, responsivity and slope efficiency must be positive");
    if (!(i_bias > i_threshold)) throw ConfigError("laser bias current at or below threshold: laser never turns on");
}

double OpticalConfig::on_voltage() const {
    const double p_opt = (i_bias - i_threshold) * slope_efficiency * std::pow(10.0, -attenuation_db / 10.0);
    return p_opt * responsivity * tia_transimpedance;
}

double LinkConfig::f_if() const { return std::abs(f_l - f_lo); }

double LinkConfig::baseband_edge() const {
    return mixer_mode == MixerMode::single ? f_if() + f_b / 2.0 : f_b / 2.0;
}

double LinkConfig::lpf_cutoff() const { return lpf.cutoff > 0.0 ? lpf.cutoff : 1.2 * baseband_edge(); }

void LinkConfig::validate() const {
    if (!(f_lo > 0.0) || !(f_l > 0.0) || !(f_b > 0.0)) throw ArgumentError("f_lo, f_l and f_b must be positive");
    if (mixer_mode == MixerMode::single && f_if() < f_b / 2.0)
        throw ArgumentError("single-mixer IF below f_b/2: sidebands overlap");
    if (lpf.order < 1 || lpf.order > 16) throw ArgumentError("lpf order must be in 1..16");
    if (!(lpf.cutoff >= 0.0)) throw ArgumentError("lpf cutoff must be >= 0");
    if (!(nonlinearity.a1 > 0.0) || !std::isfinite(nonlinearity.a3)) throw ArgumentError("cubic needs a1 > 0");
    if (!finite_nonneg(fiber_length) || !std::isfinite(retime_delay)) throw ArgumentError("invalid fiber/retime settings");
    if (!(adc_full_scale > 0.0) || !(dac_full_scale > 0.0) || !(impedance > 0.0))
        throw ArgumentError("full-scale levels and impedance must be positive");
    if (std::isnan(output_noise_dbm_hz) || output_noise_dbm_hz == std::numeric_limits<double>::infinity())
        throw ArgumentError("output noise density must be a finite dBm/Hz value or -inf");
    optical.validate();
}

double rf_sample_rate(const LinkConfig& link, double f_s) {
    if (!(f_s > 0.0)) throw ArgumentError("f_s must be positive");
    const double base = 4.0 * f_s;
    const double need = 2.2 * (std::max(link.f_l, link.f_lo) + link.f_b);
    return base * std::max(1.0, std::floor(need / base) + 1.0);
}

FiberMismatch fiber_mismatch(double fiber_length) {
    if (!finite_nonneg(fiber_length)) throw ArgumentError("fiber length must be >= 0");
    return {fiber_length * fiber_delay_min, fiber_length * fiber_delay_max};
}

RealSignal cubic_nonlinearity(const RealSignal& sig, double a1, double a3) {
    if (!(a1 > 0.0)) throw ArgumentError("a1 must be positive");
    std::vector<double> y(sig.samples());
    for (double& v : y) v = a1 * v + a3 * v * v * v;
    return RealSignal(std::move(y), sig.sample_rate());
}

double compression_amplitude(double a1, double a3) {
    if (!(a1 > 0.0) || a3 == 0.0) throw ArgumentError("compression needs a1 > 0 and a3 != 0");
    // |1 + (3/4)(a3/a1) A^2| = 10^(-1/20)
    const double c = 1.0 - std::pow(10.0, -1.0 / 20.0);
    return std::sqrt(4.0 / 3.0 * c * std::abs(a1 / a3));
}

std::vector<double> synthesize_phase_noise(const std::vector<PhaseNoisePoint>& table, std::size_t n, double rate,
                                           std::uint64_t seed) {
    if (table.empty()) throw ArgumentError("phase noise table is empty");
    if (n < 2 || !(rate > 0.0)) throw ArgumentError("phase noise needs n >= 2 and rate > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<cplx> X(n, 0.0);
    const double df = rate / static_cast<double>(n);
    for (std::size_t k = 1; k <= n / 2; ++k) {
        // one-sided phase PSD 2 L(f); E|X_k|^2 = n rate S(f) / 2
        const double s = 2.0 * phase_noise_density(table, static_cast<double>(k) * df);
        const double sd = std::sqrt(static_cast<double>(n) * rate * s / 2.0);
        if (2 * k == n) {
            X[k] = sd * g(rng);
        } else {
            X[k] = sd * cplx(g(rng), g(rng)) / std::numbers::sqrt2;
            X[n - k] = std::conj(X[k]);
        }
    }
    const auto x = fft::transform(X, false);
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = x[i].real() / static_cast<double>(n);
    return phi;
}

ComplexSignal mix_down(const RealSignal& rf, const LinkConfig& link) {
    link.validate();
    const auto filt = butterworth_lowpass(link.lpf.order, link.lpf_cutoff(), rf.sample_rate());
    return ComplexSignal(filt.process(std::span<const cplx>(mix_products(rf, link))), rf.sample_rate());
}

RealSignal ook_channel(const BitstreamResult& bits, const OpticalConfig& cfg, double fiber_delay) {
    cfg.validate();
    if (bits.bits.empty() || !(bits.f_s > 0.0)) throw ArgumentError("empty bitstream");
    if (!finite_nonneg(fiber_delay)) throw ArgumentError("fiber delay must be >= 0");
    const double rate = 4.0 * bits.f_s;
    const double v_on = cfg.on_voltage();
    std::vector<double> level(bits.bits.size() * 4);
    for (std::size_t i = 0; i < level.size(); ++i) level[i] = bits.bits[i / 4] > 0.0 ? v_on : 0.0;

    if (fiber_delay > 0.0) {
        const double shift = fiber_delay * rate;
        std::vector<double> d(level.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double pos = static_cast<double>(i) - shift;
            if (pos < 0.0) {
                d[i] = 0.0;
                continue;
            }
            const auto k = static_cast<std::size_t>(pos);
            const double f = pos - static_cast<double>(k);
            d[i] = k + 1 < level.size() ? (1.0 - f) * level[k] + f * level[k + 1] : level[k];
        }
        level.swap(d);
    }
    if (cfg.tia_bandwidth > 0.0) level = one_pole_lowpass(cfg.tia_bandwidth, rate).process(std::span<const double>(level));
    if (cfg.detector_noise_variance > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> g(0.0, std::sqrt(cfg.detector_noise_variance));
        for (double& v : level) v += g(rng);
    }
    for (double& v : level) v -= v_on / 2.0;
    return RealSignal(std::move(level), rate);
}

RetimeResult comparator_retime(const RealSignal& analog, double clock_f, double delay, double fiber_length,
                               double channel_delay) {
    if (!(clock_f > 0.0)) throw ArgumentError("clock frequency must be positive");
    if (!std::isfinite(delay) || !std::isfinite(channel_delay)) throw ArgumentError("delays must be finite");
    RetimeResult r;
    r.mismatch = fiber_mismatch(fiber_length);
    const double period = 1.0 / clock_f;
    const double nominal = fiber_length * fiber_delay_nominal;
    auto wrap = [&](double e) { return e - period * std::round(e / period); };
    r.phase_error = wrap(delay - nominal);
    r.bit_offset = std::lround((delay - nominal) / period);
    const double worst = std::max(std::abs(wrap(delay - r.mismatch.min_s)), std::abs(wrap(delay - r.mismatch.max_s)));
    r.margin = period / 2.0 - period / 32.0 - worst;
    r.violation = r.margin < 0.0;

    const double rate = analog.sample_rate();
    const auto& x = analog.samples();
    r.bits.f_s = clock_f;
    for (std::size_t n = 0;; ++n) {
        const double t = (static_cast<double>(n) + 0.5) * period + channel_delay + delay;
        const double pos = std::max(0.0, t * rate - 0.5);
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 >= x.size()) break;
        const double f = pos - static_cast<double>(k);
        const double v = (1.0 - f) * x[k] + f * x[k + 1];
        r.bits.bits.push_back(v >= 0.0 ? 1.0 : -1.0);
    }
    if (r.bits.bits.empty()) throw ArgumentError("analog record shorter than one bit");
    return r;
}

RealSignal reconstruct_and_upconvert(const BitstreamResult& i, const BitstreamResult* q, const LinkConfig& link,
                                     double rf_rate, std::size_t rf_length) {
    link.validate();
    if (link.mixer_mode == MixerMode::quadrature && !q) throw ArgumentError("quadrature reconstruction needs I and Q");
    if (i.bits.empty()) throw ArgumentError("empty bitstream");
    const double rate4 = 4.0 * i.f_s;
    const std::size_t factor = integer_ratio(rf_rate, rate4, "rf rate must be an integer multiple of 4 f_s");
    const auto lpf = butterworth_lowpass(link.lpf.order, link.lpf_cutoff(), rate4);
    const std::size_t n4 = (rf_length + factor - 1) / factor;

    auto channel = [&](const BitstreamResult& b) {
        auto x = nrz(b, 4);
        x.resize(n4, x.empty() ? 0.0 : x.back());
        auto y = lpf.process(std::span<const double>(x));
        for (double& v : y) v *= link.dac_full_scale;
        return y;
    };
    std::vector<cplx> z(n4);
    {
        const auto yi = channel(i);
        if (q) {
            const auto yq = channel(*q);
            for (std::size_t k = 0; k < n4; ++k) z[k] = cplx(yi[k], yq[k]);
        } else {
            for (std::size_t k = 0; k < n4; ++k) z[k] = yi[k];
        }
    }
    auto up = fft_upsample(z, factor);
    up.resize(rf_length);

    if (link.mixer_mode == MixerMode::single) {
        // analytic signal, then pick the sideband that lands on f_l
        auto X = fft::transform(up, true);
        const std::size_t n = X.size();
        for (std::size_t k = 1; k < (n + 1) / 2; ++k) X[k] *= 2.0;
        for (std::size_t k = n / 2 + 1; k < n; ++k) X[k] = 0.0;
        up = fft::transform(X, false);
        for (auto& v : up) v /= static_cast<double>(n);
        if (link.f_l < link.f_lo)
            for (auto& v : up) v = std::conj(v);
    }
    const auto phi = lo_phase(link, rf_length, rf_rate, link.seed + 1);
    std::vector<double> y(rf_length);
    for (std::size_t k = 0; k < rf_length; ++k)
        y[k] = (up[k] * std::polar(1.0, carrier_phase(link.f_lo, k, rf_rate) + phi[k])).real();

    if (std::isfinite(link.output_noise_dbm_hz)) {
        const double var = std::pow(10.0, (link.output_noise_dbm_hz - 30.0) / 10.0) * link.impedance * rf_rate / 2.0;
        std::mt19937_64 rng(link.seed + 2);
        std::normal_distribution<double> g(0.0, std::sqrt(var));
        for (double& v : y) v += g(rng);
    }

    // brickwall to [f_l - f_b, f_l + f_b]
    std::vector<cplx> Y(y.begin(), y.end());
    Y = fft::transform(Y, true);
    const std::size_t n = Y.size();
    const double df = rf_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(std::min(k, n - k)) * df;
        if (f < link.f_l - link.f_b || f > link.f_l + link.f_b) Y[k] = 0.0;
    }
    Y = fft::transform(Y, false);
    for (std::size_t k = 0; k < n; ++k) y[k] = Y[k].real() / static_cast<double>(n);
    return RealSignal(std::move(y), rf_rate);
}

const TraceStage& ChainTrace::stage(const std::string& name) const {
    for (const auto& s : stages)
        if (s.name == name) return s;
    throw ArgumentError("no trace stage named " + name);
}

void ChainTrace::export_csv(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
    manifest << "stage,sample_rate_hz,length,file\n";
    for (const auto& s : stages) {
        const std::string file = s.name + ".csv";
        std::ofstream os(dir / file);
        if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
        os << "# sample_rate_hz=" << format_double(s.sample_rate) << '\n';
        for (std::size_t i = 0; i < s.re.size(); ++i) {
            os << format_double(s.re[i]);
            if (!s.im.empty()) os << ',' << format_double(s.im[i]);
            os << '\n';
        }
        manifest << s.name << ',' << format_double(s.sample_rate) << ',' << s.re.size() << ',' << file << '\n';
    }
}

ChainResult run_chain(const RealSignal& rf_in, const LinkConfig& link, const ModulatorConfig& mod, bool keep_trace) {
    link.validate();
    mod.validate();
    const double clock = mod.f_s_actual;
    const double rate = rf_sample_rate(link, clock);
    if (std::abs(rf_in.sample_rate() - rate) > 1e-9 * rate)
        throw ArgumentError("rf input must be sampled at " + format_double(rate) + " Hz");
    const bool quad = link.mixer_mode == MixerMode::quadrature;
    ChainTrace trace;

    const auto rf = cubic_nonlinearity(rf_in, link.nonlinearity.a1, link.nonlinearity.a3);
    auto mixed = mix_products(rf, link);
    if (keep_trace) add_stage(trace, "post_mixer", rate, mixed, quad);
    const auto lpf = butterworth_lowpass(link.lpf.order, link.lpf_cutoff(), rate);
    mixed = lpf.process(std::span<const cplx>(mixed));
    if (keep_trace) add_stage(trace, "post_lpf", rate, mixed, quad);

    const bool ct = mod.kind() == LoopKind::continuous_time;
    const double mod_rate = ct ? 4.0 * clock : clock;
    const std::size_t step = integer_ratio(rate, mod_rate, "rf rate must be a multiple of the modulator input rate");
    const double scale = mod.delta / 2.0 / link.adc_full_scale;
    std::vector<double> in_i, in_q;
    for (std::size_t k = 0; k < mixed.size(); k += step) {
        in_i.push_back(mixed[k].real() * scale);
        in_q.push_back(mixed[k].imag() * scale);
    }
    const std::size_t channels = quad ? 2 : 1;
    std::vector<BitstreamResult> tx(channels);
    parallel_for(channels, [&](std::size_t c) {
        ModulatorConfig m = mod;
        m.seed = mod.seed + 1000003ULL * c;
        tx[c] = simulate(m, RealSignal(c == 0 ? in_i : in_q, mod_rate));
    });

    ChainResult res{std::move(trace), RealSignal({0.0}, 1.0), tx, {}, 0, true};
    const double fiber = link.fiber_length * fiber_delay_nominal;
    const double delay = link.auto_retime ? fiber : link.retime_delay;
    const double channel_delay =
        link.optical.tia_bandwidth > 0.0 ? std::numbers::ln2 / (2.0 * pi * link.optical.tia_bandwidth) : 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
        res.modulator_stable = res.modulator_stable && tx[c].stable;
        OpticalConfig oc = link.optical;
        oc.seed = link.optical.seed + 7919ULL * c;
        const auto analog = ook_channel(tx[c], oc, fiber);
        auto rx = comparator_retime(analog, clock, delay, link.fiber_length, channel_delay);
        const std::string suffix = quad ? (c == 0 ? "_i" : "_q") : "";
        if (keep_trace) {
            add_stage(res.trace, "bitstream" + suffix, clock, tx[c].bits);
            add_stage(res.trace, "post_optical" + suffix, analog.sample_rate(), analog.samples());
            std::vector<double> cmp(analog.samples());
            for (double& v : cmp) v = v >= 0.0 ? 1.0 : -1.0;
            add_stage(res.trace, "post_comparator" + suffix, analog.sample_rate(), std::move(cmp));
            add_stage(res.trace, "post_retime" + suffix, clock, rx.bits.bits);
        }
        for (std::size_t n = 0; n < rx.bits.bits.size(); ++n) {
            const long k = static_cast<long>(n) + rx.bit_offset;
            if (k < 0 || k >= static_cast<long>(tx[c].bits.size())) continue;
            if ((tx[c].bits[static_cast<std::size_t>(k)] > 0.0) != (rx.bits.bits[n] > 0.0)) ++res.bit_errors;
        }
        res.received.push_back(std::move(rx));
    }

    res.output = reconstruct_and_upconvert(res.received[0].bits, quad ? &res.received[1].bits : nullptr, link, rate,
                                           rf_in.size());
    if (keep_trace) {
        add_stage(res.trace, "final_rf", rate, res.output.samples());
    }
    return res;
}

PowerBudget power_budget(const OpticalConfig& cfg, const std::vector<double>& fixed_block_mw) {
    if (!finite_nonneg(cfg.i_bias) || !finite_nonneg(cfg.v_ref)) throw ArgumentError("bias current and reference must be >= 0");
    PowerBudget p;
    p.bias_network_mw = cfg.i_bias * cfg.v_ref * 1e3;
    for (double b : fixed_block_mw) {
        if (!finite_nonneg(b)) throw ArgumentError("block powers must be >= 0");
        p.fixed_mw += b;
    }
    p.total_mw = p.bias_network_mw + p.fixed_mw;
    return p;
}

LinkToneMeasurement measure_link_output(const RealSignal& out, const LinkConfig& link, double f_tone,
                                        std::size_t halfwidth) {
    std::size_t n = 1;
    while (n * 2 <= out.size()) n *= 2;
    std::vector<double> tail(out.samples().end() - static_cast<long>(n), out.samples().end());
    const auto spec = estimate_psd(RealSignal(std::move(tail), out.sample_rate()), n, Window::hann);
    const std::size_t tone_bin = spec.bin_of(f_tone);
    const std::size_t lo = spec.bin_of(link.f_l - link.f_b / 2.0), hi = spec.bin_of(link.f_l + link.f_b / 2.0);
    double sig = 0.0, noise = 0.0;
    std::size_t noise_bins = 0;
    for (std::size_t k = lo; k <= hi && k < spec.psd.size(); ++k) {
        const std::size_t dist = k > tone_bin ? k - tone_bin : tone_bin - k;
        if (dist <= halfwidth) sig += spec.psd[k];
        else if (dist > 8) {
            noise += spec.psd[k];
            ++noise_bins;
        }
    }
    if (noise_bins == 0) throw MeasurementError("signal band too narrow for a noise estimate");
    LinkToneMeasurement m;
    const double per_bin = noise / static_cast<double>(noise_bins);
    // remove the expected noise inside the signal bins; keep a floor so weak tones stay finite
    const double tone = std::max(sig - per_bin * static_cast<double>(2 * halfwidth + 1), 1e-3 * per_bin);
    m.output_dbm = mean_square_dbm(tone, link.impedance);
    m.noise_density_dbm_hz = mean_square_dbm(per_bin / spec.bin_width(), link.impedance);
    m.snr_db = 10.0 * std::log10(tone / (per_bin * static_cast<double>(hi - lo + 1)));
    return m;
}

LinkSweepReport link_input_sweep(const LinkConfig& link, const ModulatorConfig& mod, const std::vector<double>& dbm_grid,
                                 std::size_t n_bits, double rbw) {
    link.validate();
    mod.validate();
    if (dbm_grid.empty()) throw ArgumentError("input grid is empty");
    if (!(rbw > 0.0)) throw ArgumentError("rbw must be positive");
    const double rate = rf_sample_rate(link, mod.f_s_actual);
    if (n_bits < 64 || !fft::is_power_of_two(n_bits)) throw ArgumentError("n_bits must be a power of two >= 64");
    const auto per_bit = static_cast<std::size_t>(std::llround(rate / mod.f_s_actual));
    // a quarter-record lead-in; the tone completes whole cycles over both the record and the
    // lead-in so the periodic reconstruction filters see no seam
    const std::size_t n = per_bit * n_bits;
    const std::size_t len = n + n / 4;
    const double f_tone = 4.0 * std::round(link.f_l * static_cast<double>(n) / (4.0 * rate)) * rate / static_cast<double>(n);

    auto run = [&](double amplitude) {
        const auto rf = amplitude > 0.0 ? generate_tone(f_tone, amplitude, 0.0, len, rate)
                                        : RealSignal(std::vector<double>(len, 0.0), rate);
        auto res = run_chain(rf, link, mod, false);
        return std::make_pair(measure_link_output(res.output, link, f_tone, 1), res.modulator_stable);
    };

    LinkSweepReport rep;
    rep.rbw = rbw;
    std::vector<SweepPoint> pts(dbm_grid.size());
    parallel_for(dbm_grid.size(), [&](std::size_t i) {
        const auto [m, stable] = run(dbm_to_amplitude(dbm_grid[i], link.impedance));
        pts[i] = {dbm_grid[i], m.output_dbm, m.snr_db, m.snr_db, stable};
    });
    rep.sweep.points = pts;
    rep.sweep.validate();
    const auto idle = run(0.0).first;
    rep.noise_floor_out_dbm = idle.noise_density_dbm_hz + 10.0 * std::log10(rbw);
    rep.p1db = estimate_p1db(rep.sweep);
    rep.noise_floor_in_dbm = rep.noise_floor_out_dbm - rep.p1db.gain_db;
    rep.dynamic_range_db = rep.p1db.open_ended || !(rep.p1db.p1db_in > rep.noise_floor_in_dbm)
                               ? std::numeric_limits<double>::quiet_NaN()
                               : dynamic_range(rep.p1db.p1db_in, rep.noise_floor_in_dbm);
    return rep;
}

} // namespace dsfl
