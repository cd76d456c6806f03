#include "dsfl/modulator.hpp"

#include "dsfl/error.hpp"
#include "dsfl/ntf.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace dsfl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Idx = Eigen::Index;

// Variable layout of the per-period map: [x (N) | u0..u4 | w | v_prev | v_cur]
struct PeriodMap {
    MatrixXd phi;
    MatrixXd gu; // N x 5
    VectorXd gw, hp, hc;
};

PeriodMap build_period_map(const CiffCoefficients& c, const std::vector<double>& tc_errors, double period) {
    const auto lm = loop_matrices(c, tc_errors);
    const Idx n = lm.A.rows();
    // the delay is set by clock phases, so it stretches with the applied period
    const double d = c.excess_delay * period;

    std::vector<double> cuts{0.0, period / 4, period / 2, 3 * period / 4, period, d};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-15; }),
               cuts.end());

    const Idx vars = n + 8;
    const Idx u0 = n, w = n + 5, vp = n + 6, vc = n + 7;
    MatrixXd K = MatrixXd::Zero(n, vars);
    K.leftCols(n) = MatrixXd::Identity(n, n);

    // augmented generator over [x; s; r; q]: dx/dt = A x + b (g_in s - g_dac q), ds/dt = r
    MatrixXd M = MatrixXd::Zero(n + 3, n + 3);
    M.topLeftCorner(n, n) = lm.A;
    M.block(0, n, n, 1) = lm.b * c.input_gain;
    M.block(0, n + 2, n, 1) = -lm.b * c.dac1_gain;
    M(n, n + 1) = 1.0;

    const double quarter = period / 4;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double ta = cuts[s], tb = cuts[s + 1];
        const double h = tb - ta;
        if (h <= 0.0) continue;
        const Idx j = std::min<Idx>(3, static_cast<Idx>(std::floor(ta / quarter + 1e-12)));
        const double alpha = (ta - static_cast<double>(j) * quarter) / quarter;
        Eigen::RowVectorXd S = Eigen::RowVectorXd::Zero(vars), R = S, Q = S;
        S(u0 + j) = 1.0 - alpha;
        S(u0 + j + 1) = alpha;
        S(w) = 1.0;
        R(u0 + j) = -1.0 / quarter;
        R(u0 + j + 1) = 1.0 / quarter;
        Q(ta < d - 1e-15 ? vp : vc) = 1.0;

        const MatrixXd E = (M * h).exp();
        MatrixXd next = E.topLeftCorner(n, n) * K;
        next += E.block(0, n, n, 1) * S;
        next += E.block(0, n + 1, n, 1) * R;
        next += E.block(0, n + 2, n, 1) * Q;
        K = next;
    }
    PeriodMap pm;
    pm.phi = K.leftCols(n);
    pm.gu = K.block(0, u0, n, 5);
    pm.gw = K.col(w);
    pm.hp = K.col(vp);
    pm.hc = K.col(vc);
    return pm;
}

struct Noise {
    std::mt19937_64 thermal_rng;
    std::mt19937_64 jitter_rng;
    std::normal_distribution<double> gauss{0.0, 1.0};
    double thermal_std;
    double jitter_std; // sigma_t * f_s_actual
    Noise(std::uint64_t seed, double ts, double js)
        : thermal_rng(seed), jitter_rng(seed ^ 0x9e3779b97f4a7c15ULL), thermal_std(ts), jitter_std(js) {}
    double thermal() { return thermal_std > 0.0 ? thermal_std * gauss(thermal_rng) : 0.0; }
    double jitter() { return jitter_std > 0.0 ? jitter_std * gauss(jitter_rng) : 0.0; }
};

Noise make_noise(const ModulatorConfig& cfg) {
    const double scale = 2.0 / cfg.delta;
    const double ts = std::sqrt(cfg.thermal_noise_variance * cfg.osr) * scale;
    const double js = cfg.jitter.effective_sigma_t(cfg.f_s_actual) * cfg.f_s_actual;
    return Noise(cfg.seed, ts, js);
}

// Tracks normalized state magnitude and the consecutive-overflow counter.
struct Watchdog {
    const std::vector<double>& scale;
    double bound;
    std::size_t limit;
    std::vector<double>* peaks = nullptr;
    bool flagged = false;
    std::size_t run = 0;
    double max_state = 0.0;
    bool tripped(const VectorXd& x) {
        double m = 0.0;
        for (Idx i = 0; i < x.size(); ++i) {
            if (peaks) (*peaks)[static_cast<std::size_t>(i)] = std::max((*peaks)[static_cast<std::size_t>(i)], std::abs(x(i)));
            const double s = scale.empty() ? 1.0 : scale[static_cast<std::size_t>(i)];
            m = std::max(m, std::abs(x(i)) / s);
        }
        if (!std::isfinite(m)) m = std::numeric_limits<double>::infinity();
        max_state = std::max(max_state, m);
        run = m > bound ? run + 1 : 0;
        if (run >= limit) flagged = true;
        return flagged;
    }
};

VectorXd feedforward_vector(const CiffCoefficients& c) {
    return Eigen::Map<const VectorXd>(c.feedforward.data(), static_cast<Idx>(c.order()));
}

bool rate_matches(double a, double b) { return std::abs(a - b) <= 1e-9 * b; }

BitstreamResult run_ct(const ModulatorConfig& cfg, const RealSignal& input, const std::vector<double>& scale,
                       std::vector<double>* peaks = nullptr) {
    const auto& c = cfg.coeffs;
    std::vector<double> u4;
    const double in_scale = 2.0 / cfg.delta;
    std::size_t nbits;
    if (rate_matches(input.sample_rate(), 4.0 * cfg.f_s_actual)) {
        nbits = input.size() / 4;
        if (nbits == 0) throw ArgumentError("input shorter than one clock period");
        u4.assign(input.samples().begin(), input.samples().begin() + static_cast<long>(4 * nbits));
        u4.push_back(input.size() > 4 * nbits ? input[4 * nbits] : input[input.size() - 1]);
    } else if (rate_matches(input.sample_rate(), cfg.f_s_actual)) {
        nbits = input.size();
        u4.resize(4 * nbits + 1);
        for (std::size_t i = 0; i < nbits; ++i) {
            const double a = input[i], b = i + 1 < nbits ? input[i + 1] : input[i];
            for (int j = 0; j < 4; ++j) u4[4 * i + static_cast<std::size_t>(j)] = a + (b - a) * j / 4.0;
        }
        u4[4 * nbits] = input[nbits - 1];
    } else {
        throw ArgumentError("continuous-time input must be sampled at f_s_actual or 4 * f_s_actual");
    }
    for (double& x : u4) x *= in_scale;

    const auto pm = build_period_map(c, cfg.effective_tc_errors(), cfg.f_s / cfg.f_s_actual);
    const VectorXd a = feedforward_vector(c);
    const Idx n = a.size();
    Noise noise = make_noise(cfg);
    Watchdog wd{scale, cfg.state_bound, cfg.unstable_samples, peaks};
    const double jitter_weight = c.dac1_gain / c.input_gain;

    BitstreamResult r;
    r.f_s = cfg.f_s_actual;
    r.bits.reserve(nbits);
    VectorXd x = VectorXd::Zero(n), next(n);
    double v_prev = 1.0;
    for (std::size_t k = 0; k < nbits; ++k) {
        const double y = a.dot(x) - c.dac2_gain * v_prev;
        const double v = y >= 0.0 ? 1.0 : -1.0;
        const double e = (v - v_prev) * noise.jitter();
        const double w = noise.thermal() - jitter_weight * e;
        next.noalias() = pm.phi * x;
        for (Idx j = 0; j < 5; ++j) next += pm.gu.col(j) * u4[4 * k + static_cast<std::size_t>(j)];
        next += pm.gw * w + pm.hp * v_prev + pm.hc * v;
        x.swap(next);
        r.bits.push_back(v * cfg.delta / 2.0);
        v_prev = v;
        if (wd.tripped(x) && r.stable) {
            r.stable = false;
            r.unstable_at = k;
            if (cfg.stop_on_unstable) break;
        }
    }
    r.max_state = wd.max_state;
    return r;
}

BitstreamResult run_dt(const ModulatorConfig& cfg, const RealSignal& input, const std::vector<double>& scale,
                       std::vector<double>* peaks = nullptr) {
    if (!rate_matches(input.sample_rate(), cfg.f_s_actual))
        throw ArgumentError("discrete-time input must be sampled at f_s_actual");
    const auto& c = cfg.coeffs;
    const auto lm = loop_matrices(c, cfg.effective_tc_errors());
    const VectorXd a = feedforward_vector(c);
    const Idx n = a.size();
    const double in_scale = 2.0 / cfg.delta;
    Noise noise = make_noise(cfg);
    Watchdog wd{scale, cfg.state_bound, cfg.unstable_samples, peaks};

    BitstreamResult r;
    r.f_s = cfg.f_s_actual;
    r.bits.reserve(input.size());
    VectorXd x = VectorXd::Zero(n), next(n);
    double v_prev = 1.0;
    for (std::size_t k = 0; k < input.size(); ++k) {
        const double y = a.dot(x);
        const double v = y >= 0.0 ? 1.0 : -1.0;
        const double e = (v - v_prev) * noise.jitter();
        const double drive = c.input_gain * (input[k] * in_scale + noise.thermal()) - c.dac1_gain * (v + e);
        next.noalias() = lm.A * x;
        next += lm.b * drive;
        x.swap(next);
        r.bits.push_back(v * cfg.delta / 2.0);
        v_prev = v;
        if (wd.tripped(x) && r.stable) {
            r.stable = false;
            r.unstable_at = k;
            if (cfg.stop_on_unstable) break;
        }
    }
    r.max_state = wd.max_state;
    return r;
}

} // namespace

void ModulatorConfig::validate() const {
    coeffs.validate();
    if (!(f_s > 0.0) || !(f_s_actual > 0.0)) throw ArgumentError("clock rates must be positive");
    if (!(osr > 1.0)) throw ArgumentError("osr must be > 1");
    if (!(delta > 0.0)) throw ArgumentError("quantizer step must be positive");
    if (!(thermal_noise_variance >= 0.0)) throw ArgumentError("thermal noise variance must be >= 0");
    if (!(std::abs(tc_error) < 0.5)) throw ArgumentError("|tc_error| must be < 0.5");
    if (!tc_errors.empty()) {
        if (tc_errors.size() != coeffs.order()) throw ArgumentError("one tc error per integrator required");
        for (double e : tc_errors)
            if (!(std::abs(e) < 0.5)) throw ArgumentError("|tc error| must be < 0.5");
    }
    if (jitter.sigma_t < 0.0) throw ArgumentError("sigma_t must be >= 0");
    if (!(state_bound > 0.0) || unstable_samples == 0) throw ArgumentError("instability criterion must be positive");
}

std::vector<double> ModulatorConfig::effective_tc_errors() const {
    if (!tc_errors.empty()) return tc_errors;
    if (tc_error == 0.0) return {};
    return std::vector<double>(coeffs.order(), tc_error);
}

BitstreamResult simulate_dt(const ModulatorConfig& cfg, const RealSignal& input) {
    cfg.validate();
    if (cfg.kind() != LoopKind::discrete_time) throw ArgumentError("simulate_dt needs a discrete-time loop");
    return run_dt(cfg, input, cfg.coeffs.state_scale);
}

BitstreamResult simulate_ct(const ModulatorConfig& cfg, const RealSignal& input) {
    cfg.validate();
    if (cfg.kind() != LoopKind::continuous_time) throw ArgumentError("simulate_ct needs a continuous-time loop");
    return run_ct(cfg, input, cfg.coeffs.state_scale);
}

BitstreamResult simulate(const ModulatorConfig& cfg, const RealSignal& input) {
    return cfg.kind() == LoopKind::discrete_time ? simulate_dt(cfg, input) : simulate_ct(cfg, input);
}

void calibrate_state_scale(CiffCoefficients& c) {
    ModulatorConfig cfg;
    cfg.coeffs = c;
    cfg.coeffs.state_scale.clear();
    cfg.f_s = cfg.f_s_actual = 1.0;
    cfg.state_bound = 1e9; // raw states of high-order loops run far above 1; only true runaway reaches this
    cfg.unstable_samples = 1;
    constexpr std::size_t n = 8192;
    for (double amp : {0.5, 0.25, 0.1}) {
        const auto tone = generate_tone(0.0016, amp, 0.0, n, 1.0);
        std::vector<double> peaks(c.order(), 0.0);
        const auto r = c.kind == LoopKind::discrete_time ? run_dt(cfg, tone, {}, &peaks) : run_ct(cfg, tone, {}, &peaks);
        if (!r.stable) continue;
        for (double& p : peaks) p = std::max(p, 1e-3);
        c.state_scale = peaks;
        return;
    }
    throw RealizationError("realized loop is unstable even at small inputs");
}

ModulatorConfig design_modulator(int order, double osr, double f_s, LoopKind kind, double h_inf, bool optimize_zeros) {
    const auto ntf = synthesize_ntf({order, osr, h_inf, optimize_zeros});
    RealizeOptions opt;
    opt.kind = kind;
    ModulatorConfig cfg;
    cfg.coeffs = realize_ciff(ntf, opt);
    cfg.f_s = cfg.f_s_actual = f_s;
    cfg.osr = osr;
    return cfg;
}

void write_bitstream_csv(std::ostream& os, const BitstreamResult& r) {
    os << "# f_s_hz=" << format_double(r.f_s) << '\n';
    for (double b : r.bits) os << (b >= 0.0 ? "1" : "-1") << '\n';
}

BitstreamResult read_bitstream_csv(std::istream& is, double delta) {
    std::string line;
    const std::string key = "# f_s_hz=";
    if (!std::getline(is, line) || line.rfind(key, 0) != 0) throw ParseError("missing '# f_s_hz=' header", 1);
    BitstreamResult r;
    const std::string rate = line.substr(key.size());
    auto [p, ec] = std::from_chars(rate.data(), rate.data() + rate.size(), r.f_s);
    if (ec != std::errc() || !(r.f_s > 0.0)) throw ParseError("invalid sample rate in header", 1);
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        if (line == "1") r.bits.push_back(delta / 2.0);
        else if (line == "-1") r.bits.push_back(-delta / 2.0);
        else throw ParseError("bitstream rows must be 1 or -1", row);
    }
    return r;
}

} // namespace dsfl
