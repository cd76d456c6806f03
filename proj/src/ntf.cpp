#include "dsfl/ntf.hpp"

#include "dsfl/error.hpp"
#include "dsfl/metrics.hpp"
#include "dsfl/numeric.hpp"
#include "dsfl/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace dsfl {

namespace {

constexpr double pi = std::numbers::pi;

// Maximally flat pole prototype; x sets how far the poles sit from z = 1.
std::vector<cplx> prototype_poles(int order, double x) {
    const double me2 = -0.5 * std::pow(x, 2.0 / order);
    std::vector<cplx> p;
    for (int k = 1; 2 * k <= order + 1; ++k) {
        const double w = (2.0 * k - 1.0) * pi / order;
        const cplx mb2 = 1.0 + me2 * std::polar(1.0, w);
        cplx r = mb2 - std::sqrt(mb2 * mb2 - 1.0);
        if (std::abs(r) > 1.0) r = 1.0 / r;
        if (2 * k == order + 1) {
            p.emplace_back(r.real(), 0.0);
        } else {
            p.push_back(r);
            p.push_back(std::conj(r));
        }
    }
    return p;
}

std::vector<cplx> zeros_from_angles(int order, const std::vector<double>& angles) {
    std::vector<cplx> z;
    if (order % 2 == 1) z.emplace_back(1.0, 0.0);
    for (double t : angles) {
        if (t == 0.0) {
            z.emplace_back(1.0, 0.0);
            z.emplace_back(1.0, 0.0);
        } else {
            z.push_back(std::polar(1.0, t));
            z.push_back(std::polar(1.0, -t));
        }
    }
    return z;
}

// Finds the pole radius parameter so that the gain at Nyquist equals h_inf.
// |NTF(-1)| grows monotonically with x, unlike the peak over the whole circle.
std::vector<cplx> place_poles(int order, const std::vector<cplx>& zeros, double h_inf) {
    TransferFunction fir{zeros, std::vector<cplx>(zeros.size(), 0.0), 1.0};
    if (fir.peak_magnitude() <= h_inf) return fir.poles;

    auto nyquist_gain = [&](double x) {
        return std::abs(TransferFunction{zeros, prototype_poles(order, x), 1.0}.evaluate(-1.0));
    };
    double lo = 1e-12, hi = 1e6;
    if (nyquist_gain(lo) > h_inf)
        throw SynthesisError("no stable pole set meets the out-of-band gain bound", nyquist_gain(lo));
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-13; ++it) {
        const double x = std::sqrt(lo * hi);
        if (nyquist_gain(x) > h_inf) hi = x;
        else lo = x;
    }
    auto poles = prototype_poles(order, lo);
    TransferFunction tf{zeros, poles, 1.0};
    const double achieved = tf.peak_magnitude();
    if (!tf.is_stable() || achieved > h_inf * (1.0 + 1e-3))
        throw SynthesisError("out-of-band gain bound not met", achieved);
    return poles;
}

double zero_objective(int order, const std::vector<double>& angles, double band) {
    auto f = [&](double w) {
        double m = 1.0;
        if (order % 2 == 1) m *= 4.0 * std::pow(std::sin(w / 2.0), 2);
        for (double t : angles) {
            m *= 4.0 * std::pow(std::sin((w - t) / 2.0), 2);
            m *= 4.0 * std::pow(std::sin((w + t) / 2.0), 2);
        }
        return m;
    };
    return integrate(f, 0.0, band, 0.0, 1e-12);
}

double pick_tone_bin(std::size_t fft_length, double osr) {
    const double nb = static_cast<double>(fft_length) / (2.0 * osr);
    double k = std::round(nb / 3.0);
    if (std::fmod(k, 2.0) == 0.0) k += 1.0;
    return std::max(k, 1.0);
}

} // namespace

void NtfSpec::validate() const {
    if (order < 1 || order > 8) throw ArgumentError("order must be in 1..8");
    if (!(osr > 1.0) || !std::isfinite(osr)) throw ArgumentError("osr must be > 1");
    if (!(h_inf > 1.0) || !std::isfinite(h_inf)) throw ArgumentError("h_inf must be > 1");
}

double compute_osr(double f_s, double f_b) {
    if (!(f_b > 0.0) || !(f_s > 2.0 * f_b))
        throw ArgumentError("sampling rate must exceed twice the signal bandwidth (f_s > 2 f_b > 0)");
    return f_s / (2.0 * f_b);
}

std::vector<double> optimized_zero_angles(int order, double osr) {
    const double band = pi / osr;
    const int m = order / 2;
    std::vector<double> angles;
    for (int k = 1; k <= m; ++k) angles.push_back(band * std::cos((2.0 * k - 1.0) * pi / (2.0 * order)));

    double prev = zero_objective(order, angles, band);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 200; ++sweep) {
        for (int i = 0; i < m; ++i) {
            auto at = [&](double t) {
                angles[i] = t;
                return zero_objective(order, angles, band);
            };
            double lo = 0.0, hi = band;
            double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            double f1 = at(x1), f2 = at(x2);
            while (hi - lo > 1e-12 * band) {
                if (f1 < f2) {
                    hi = x2; x2 = x1; f2 = f1;
                    x1 = hi - g * (hi - lo); f1 = at(x1);
                } else {
                    lo = x1; x1 = x2; f1 = f2;
                    x2 = lo + g * (hi - lo); f2 = at(x2);
                }
            }
            angles[i] = 0.5 * (lo + hi);
        }
        const double cur = zero_objective(order, angles, band);
        if (std::abs(prev - cur) <= 1e-10 * std::abs(prev)) break;
        prev = cur;
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

TransferFunction synthesize_ntf(const NtfSpec& spec) {
    spec.validate();
    std::vector<cplx> zeros;
    if (spec.optimize_zeros) {
        zeros = zeros_from_angles(spec.order, optimized_zero_angles(spec.order, spec.osr));
    } else {
        zeros.assign(static_cast<std::size_t>(spec.order), cplx(1.0, 0.0));
    }
    TransferFunction tf;
    tf.zeros = zeros;
    tf.poles = place_poles(spec.order, zeros, spec.h_inf);
    tf.gain = 1.0;
    return tf;
}

double inband_noise_integral(const TransferFunction& ntf, double osr) {
    if (!(osr > 1.0)) throw ArgumentError("osr must be > 1");
    auto f = [&](double w) { return std::norm(ntf.response(w)); };
    return integrate(f, 0.0, pi / osr, 0.0, 1e-10) / pi;
}

double inband_quantization_noise(const TransferFunction& ntf, double osr, double delta) {
    return delta * delta / 12.0 * inband_noise_integral(ntf, osr);
}

LoopRun simulate_ntf_loop(const TransferFunction& ntf, std::span<const double> u, double bound) {
    if (!ntf.is_stable()) throw ArgumentError("NTF is unstable");
    if (ntf.zeros.size() > ntf.poles.size()) throw ArgumentError("NTF must be proper");
    auto zeros = ntf.zeros;
    zeros.resize(ntf.poles.size(), 0.0);
    const auto b = poly_from_roots(zeros);
    const auto a = poly_from_roots(ntf.poles);
    if (std::abs(ntf.gain - 1.0) > 1e-12) throw ArgumentError("NTF leading coefficient must be 1");
    const std::size_t n = a.size() - 1;

    // f = (B - A)/A applied to e, evaluated from history only (strictly causal)
    std::vector<double> c(n + 1);
    for (std::size_t i = 0; i <= n; ++i) c[i] = b[i] - a[i];
    std::vector<double> eh(n, 0.0), fh(n, 0.0);

    LoopRun run;
    run.v.reserve(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) f += c[i + 1] * eh[i] - a[i + 1] * fh[i];
        const double y = u[k] + f;
        const double v = y >= 0.0 ? 1.0 : -1.0;
        run.max_state = std::max(run.max_state, std::abs(y));
        if (std::abs(y) > bound) {
            run.stable = false;
            return run;
        }
        for (std::size_t i = n; i-- > 1;) {
            eh[i] = eh[i - 1];
            fh[i] = fh[i - 1];
        }
        if (n > 0) {
            eh[0] = v - y;
            fh[0] = f;
        }
        run.v.push_back(v);
    }
    return run;
}

SqnrPrediction predict_sqnr(const TransferFunction& ntf, double osr, double delta, const SqnrOptions& opt) {
    if (!ntf.is_stable()) throw ArgumentError("NTF is unstable");
    if (!(osr > 1.0)) throw ArgumentError("osr must be > 1");
    const std::size_t total = opt.fft_length + opt.settle;
    const double kbin = pick_tone_bin(opt.fft_length, osr);
    const double w = 2.0 * pi * kbin / static_cast<double>(opt.fft_length);
    std::vector<double> u(total);

    auto run_at = [&](double amp) {
        for (std::size_t i = 0; i < total; ++i) u[i] = amp * std::sin(w * static_cast<double>(i));
        return simulate_ntf_loop(ntf, u, opt.bound);
    };

    SqnrPrediction out;
    out.sigma2_q = inband_quantization_noise(ntf, osr, delta);

    // largest stable amplitude on [0, 1] full scale
    double lo = 0.0, hi = 1.0;
    if (run_at(1.0).stable) {
        lo = 1.0;
    } else {
        for (int it = 0; it < 14; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (run_at(mid).stable) lo = mid;
            else hi = mid;
        }
    }
    if (lo <= 0.0) throw MeasurementError("loop unstable at every tested amplitude");
    out.a_max = lo;

    const double f_band = 0.5 / osr; // normalized sample rate 1
    const double f_tone = kbin / static_cast<double>(opt.fft_length);
    bool found = false;
    double best_db = 0.0;
    auto try_level = [&](double level_db) {
        const double amp = out.a_max * std::pow(10.0, level_db / 20.0);
        auto run = run_at(amp);
        if (!run.stable) return;
        const RealSignal sig(std::move(run.v), 1.0);
        const double sqnr = measure_tone(sig, opt.fft_length, f_band, f_tone).sndr.in_band_db;
        if (!found || sqnr > out.peak_sqnr_db) {
            out.peak_sqnr_db = sqnr;
            out.amplitude_at_peak = amp;
            best_db = level_db;
            found = true;
        }
    };
    const int steps = static_cast<int>(std::floor(opt.amp_span_db / opt.amp_step_db + 1e-9));
    for (int i = 0; i <= steps; ++i) try_level(-opt.amp_step_db * i);
    // refine around the coarse maximum at a fifth of the grid step
    if (found) {
        const double centre = best_db;
        for (int j = -4; j <= 4; ++j) {
            const double level = centre + j * opt.amp_step_db / 5.0;
            if (j != 0 && level <= 0.0) try_level(level);
        }
    }
    if (!found) throw MeasurementError("no stable amplitude on the search grid");
    out.a_max *= delta / 2.0;
    out.amplitude_at_peak *= delta / 2.0;
    out.linear_sqnr_db = 10.0 * std::log10(out.a_max * out.a_max / 2.0 / out.sigma2_q);
    return out;
}

std::vector<SweepCell> sweep_peak_sqnr(const std::vector<int>& orders, const std::vector<double>& osr_grid,
                                       double h_inf, bool optimize_zeros, const SqnrOptions& opt) {
    if (orders.empty() || osr_grid.empty()) throw ArgumentError("sweep grids must be non-empty");
    std::vector<SweepCell> cells;
    for (int n : orders)
        for (double r : osr_grid) {
            SweepCell c;
            c.order = n;
            c.osr = r;
            cells.push_back(c);
        }
    parallel_for(cells.size(), [&](std::size_t i) {
        auto& c = cells[i];
        try {
            const auto ntf = synthesize_ntf({c.order, c.osr, h_inf, optimize_zeros});
            const auto p = predict_sqnr(ntf, c.osr, 2.0, opt);
            c.peak_sqnr_db = p.peak_sqnr_db;
            c.linear_sqnr_db = p.linear_sqnr_db;
            c.a_max = p.a_max;
            c.ok = true;
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    });
    return cells;
}

void write_sqnr_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
    os << "order,osr,peak_sqnr_db\n";
    for (const auto& c : cells)
        os << c.order << ',' << format_double(c.osr) << ',' << (c.ok ? format_double(c.peak_sqnr_db) : "nan") << '\n';
}

} // namespace dsfl
