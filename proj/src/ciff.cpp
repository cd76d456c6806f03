#include "dsfl/ciff.hpp"

#include "dsfl/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dsfl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Idx = Eigen::Index;

constexpr double pi = std::numbers::pi;

// Integral of exp(A s) b over [0, h].
VectorXd held_input_response(const MatrixXd& A, const VectorXd& b, double h) {
    const Idx n = A.rows();
    MatrixXd M = MatrixXd::Zero(n + 1, n + 1);
    M.topLeftCorner(n, n) = A * h;
    M.topRightCorner(n, 1) = b * h;
    const MatrixXd E = M.exp();
    return E.topRightCorner(n, 1);
}

// One-period discretization of the feedback path:
//   x[n+1] = phi x[n] - gamma0 v[n] - gamma1 v[n-1]
struct FeedbackMap {
    MatrixXd phi;
    VectorXd gamma0;
    VectorXd gamma1;
};

FeedbackMap feedback_map(const CiffCoefficients& c) {
    const auto lm = loop_matrices(c);
    FeedbackMap f;
    const VectorXd bd = lm.b * c.dac1_gain;
    if (c.kind == LoopKind::discrete_time) {
        f.phi = lm.A;
        f.gamma0 = bd;
        f.gamma1 = VectorXd::Zero(lm.b.size());
        return f;
    }
    const double d = c.excess_delay;
    f.phi = lm.A.exp();
    f.gamma0 = held_input_response(lm.A, bd, 1.0 - d);
    f.gamma1 = (lm.A * (1.0 - d)).exp() * held_input_response(lm.A, bd, d);
    return f;
}

// L(z) of the realized loop (v -> -y, unity quantizer gain).
cplx loop_gain(const CiffCoefficients& c, const FeedbackMap& f, cplx z) {
    const Idx n = f.phi.rows();
    Eigen::MatrixXcd zi = z * Eigen::MatrixXcd::Identity(n, n) - f.phi.cast<cplx>();
    Eigen::VectorXcd rhs = f.gamma0.cast<cplx>() + f.gamma1.cast<cplx>() / z;
    Eigen::VectorXcd x = zi.partialPivLu().solve(rhs);
    Eigen::VectorXcd a = Eigen::Map<const VectorXd>(c.feedforward.data(), n).cast<cplx>();
    return a.dot(x) + c.dac2_gain / z; // dot() conjugates the first argument, a is real
}

// Input path to the quantizer summing node (before the loop closes).
cplx input_path(const CiffCoefficients& c, double omega) {
    const auto lm = loop_matrices(c);
    const Idx n = lm.A.rows();
    const cplx s = c.kind == LoopKind::continuous_time ? cplx(0.0, omega) : std::polar(1.0, omega);
    Eigen::MatrixXcd m = s * Eigen::MatrixXcd::Identity(n, n) - lm.A.cast<cplx>();
    Eigen::VectorXcd x = m.partialPivLu().solve(lm.b.cast<cplx>());
    Eigen::VectorXcd a = Eigen::Map<const VectorXd>(c.feedforward.data(), n).cast<cplx>();
    return c.input_gain * a.dot(x);
}

std::vector<cplx> eigenvalues(const MatrixXd& m) {
    Eigen::EigenSolver<MatrixXd> es(m, false);
    std::vector<cplx> out;
    for (Idx i = 0; i < m.rows(); ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

} // namespace

void CiffCoefficients::validate() const {
    const std::size_t n = integrator_gains.size();
    if (n == 0 || n > 8) throw ArgumentError("loop order must be in 1..8");
    if (feedforward.size() != n) throw ArgumentError("feedforward size must equal the loop order");
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::all_of(integrator_gains.begin(), integrator_gains.end(), finite) ||
        !std::all_of(feedforward.begin(), feedforward.end(), finite) || !finite(dac1_gain) ||
        !finite(dac2_gain) || !finite(input_gain))
        throw ArgumentError("loop coefficients must be finite");
    for (const auto& r : resonators)
        if (r.first + 1 >= n || !std::isfinite(r.g)) throw ArgumentError("resonator indices out of range");
    if (!(excess_delay >= 0.0 && excess_delay <= 1.0)) throw ArgumentError("excess delay must be in [0, 1]");
    if (!state_scale.empty() && state_scale.size() != n) throw ArgumentError("state_scale size mismatch");
}

LoopMatrices loop_matrices(const CiffCoefficients& c, const std::vector<double>& tc_errors) {
    const Idx n = static_cast<Idx>(c.order());
    if (!tc_errors.empty() && tc_errors.size() != c.order())
        throw ArgumentError("one time-constant error per integrator required");
    std::vector<double> k = c.integrator_gains;
    for (std::size_t i = 0; i < tc_errors.size(); ++i) k[i] *= 1.0 + tc_errors[i];

    LoopMatrices m;
    m.A = MatrixXd::Zero(n, n);
    m.b = VectorXd::Zero(n);
    m.b(0) = k[0];
    if (c.kind == LoopKind::continuous_time) {
        for (Idx i = 1; i < n; ++i) m.A(i, i - 1) = k[static_cast<std::size_t>(i)];
        for (const auto& r : c.resonators) {
            const Idx i = static_cast<Idx>(r.first);
            m.A(i, i + 1) = -r.g * k[r.first];
        }
        return m;
    }

    // Discrete time: accumulate row by row so non-delaying stages see the
    // already-updated state of their driver.
    std::vector<bool> non_delaying(c.order(), false);
    for (const auto& r : c.resonators) non_delaying[r.first + 1] = true;
    m.A = MatrixXd::Identity(n, n);
    for (const auto& r : c.resonators) {
        const Idx i = static_cast<Idx>(r.first);
        m.A(i, i + 1) -= r.g * k[r.first];
    }
    for (Idx i = 1; i < n; ++i) {
        const double ki = k[static_cast<std::size_t>(i)];
        if (non_delaying[static_cast<std::size_t>(i)]) {
            m.A.row(i) += ki * m.A.row(i - 1);
            m.b(i) += ki * m.b(i - 1);
        } else {
            m.A(i, i - 1) += ki;
        }
    }
    return m;
}

CiffCoefficients realize_ciff(const TransferFunction& ntf, const RealizeOptions& opt) {
    if (!ntf.is_stable()) throw ArgumentError("NTF is unstable");
    const std::size_t n = ntf.poles.size();
    if (n == 0 || n > 8) throw ArgumentError("NTF order must be in 1..8");
    if (ntf.zeros.size() != n) throw ArgumentError("NTF must have as many zeros as poles");
    if (std::abs(ntf.gain - 1.0) > 1e-9) throw ArgumentError("NTF leading coefficient must be 1");
    if (opt.kind == LoopKind::continuous_time && !(opt.excess_delay >= 0.0 && opt.excess_delay <= 1.0))
        throw ArgumentError("excess delay must be in [0, 1]");

    std::vector<double> dc_angles, pair_angles;
    for (const auto& z : ntf.zeros) {
        if (std::abs(std::abs(z) - 1.0) > 1e-6)
            throw RealizationError("CIFF realization needs NTF zeros on the unit circle");
        const double t = std::arg(z);
        if (std::abs(t) < 1e-9) dc_angles.push_back(0.0);
        else if (t > 0.0) pair_angles.push_back(t);
        else if (t > pi - 1e-9) throw RealizationError("NTF zero at z = -1 is not realizable");
    }
    if (dc_angles.size() + 2 * pair_angles.size() != n)
        throw RealizationError("NTF zeros are not in conjugate pairs");
    std::sort(pair_angles.begin(), pair_angles.end());

    CiffCoefficients c;
    c.kind = opt.kind;
    c.excess_delay = opt.kind == LoopKind::continuous_time ? opt.excess_delay : 0.0;
    c.integrator_gains = opt.integrator_gains.empty() ? std::vector<double>(n, 1.0) : opt.integrator_gains;
    if (c.integrator_gains.size() != n) throw ArgumentError("integrator_gains size must equal the NTF order");
    c.feedforward.assign(n, 0.0);
    std::size_t idx = dc_angles.size();
    for (double t : pair_angles) {
        const double kk = c.integrator_gains[idx] * c.integrator_gains[idx + 1];
        const double g = opt.kind == LoopKind::continuous_time ? t * t / kk : 2.0 * (1.0 - std::cos(t)) / kk;
        c.resonators.push_back({idx, g});
        idx += 2;
    }

    // Fit feedforward weights (and the DAC2 weight when the DAC pulse is delayed)
    // so the sampled pulse response of the loop equals that of L = 1/NTF - 1.
    const auto fm = feedback_map(c);
    const bool use_dac2 = opt.kind == LoopKind::continuous_time && c.excess_delay > 0.0;
    const Idx cols = static_cast<Idx>(n) + (use_dac2 ? 1 : 0);
    const Idx rows = 3 * (static_cast<Idx>(n) + 2);
    MatrixXd M = MatrixXd::Zero(rows, cols);
    VectorXd x = VectorXd::Zero(static_cast<Idx>(n));
    for (Idx r = 0; r < rows; ++r) {
        M.block(r, 0, 1, static_cast<Idx>(n)) = x.transpose();
        if (use_dac2 && r == 1) M(r, cols - 1) = 1.0;
        // states driven by +pulse at n = 0 (the loop applies it with a minus sign)
        VectorXd next = fm.phi * x;
        if (r == 0) next += fm.gamma0;
        if (r == 1) next += fm.gamma1;
        x = next;
    }
    const auto bpoly = poly_from_roots(ntf.zeros);
    const auto apoly = poly_from_roots(ntf.poles);
    VectorXd target = VectorXd::Zero(rows);
    for (Idx r = 0; r < rows; ++r) {
        double v = r <= static_cast<Idx>(n) ? apoly[static_cast<std::size_t>(r)] - bpoly[static_cast<std::size_t>(r)] : 0.0;
        for (Idx i = 1; i <= std::min<Idx>(r, static_cast<Idx>(n)); ++i) v -= bpoly[static_cast<std::size_t>(i)] * target(r - i);
        target(r) = v;
    }
    const VectorXd sol = M.colPivHouseholderQr().solve(target);
    const double resid = (M * sol - target).norm();
    if (!std::isfinite(resid) || resid > 1e-6 * std::max(1.0, target.norm()))
        throw RealizationError("loop filter cannot reproduce the NTF (residual " + std::to_string(resid) + ")");
    for (std::size_t i = 0; i < n; ++i) c.feedforward[i] = sol(static_cast<Idx>(i));
    c.dac2_gain = use_dac2 ? sol(cols - 1) : 0.0;

    auto too_big = [](double v) { return !std::isfinite(v) || std::abs(v) > 1e3; };
    if (std::any_of(c.feedforward.begin(), c.feedforward.end(), too_big) || too_big(c.dac2_gain) ||
        std::any_of(c.resonators.begin(), c.resonators.end(), [&](const Resonator& r) { return too_big(r.g); }))
        throw RealizationError("realized coefficients are ill-conditioned (magnitude above 1e3)");

    // unity STF at DC; approach omega -> 0 since integrators make the input path singular there
    c.input_gain = 1.0;
    const cplx raw = stf_response(c, 1e-7);
    if (!(std::abs(raw) > 0.0)) throw RealizationError("signal path has zero DC gain");
    c.input_gain = 1.0 / std::abs(raw);

    calibrate_state_scale(c);
    return c;
}

TransferFunction extract_ntf(const CiffCoefficients& c) {
    c.validate();
    const auto fm = feedback_map(c);
    const Idx n = fm.phi.rows();
    // augmented state [x; v[n-1]]
    MatrixXd A = MatrixXd::Zero(n + 1, n + 1);
    A.topLeftCorner(n, n) = fm.phi;
    A.topRightCorner(n, 1) = -fm.gamma1;
    VectorXd B(n + 1);
    B.head(n) = -fm.gamma0;
    B(n) = 1.0;
    Eigen::RowVectorXd C(n + 1);
    for (Idx i = 0; i < n; ++i) C(i) = c.feedforward[static_cast<std::size_t>(i)];
    C(n) = -c.dac2_gain;

    auto zeros = eigenvalues(A);
    auto poles = eigenvalues(A + B * C);
    // drop pole/zero pairs at the origin introduced by the delay state
    auto is_origin = [](cplx z) { return std::abs(z) < 1e-9; };
    while (true) {
        auto zi = std::find_if(zeros.begin(), zeros.end(), is_origin);
        auto pi_ = std::find_if(poles.begin(), poles.end(), is_origin);
        if (zi == zeros.end() || pi_ == poles.end()) break;
        zeros.erase(zi);
        poles.erase(pi_);
    }
    // the closed loop may keep fewer finite poles than zeros; pad with poles at 0
    while (poles.size() < zeros.size()) poles.emplace_back(0.0, 0.0);
    while (zeros.size() < poles.size()) zeros.emplace_back(0.0, 0.0);
    return TransferFunction{zeros, poles, 1.0};
}

cplx stf_response(const CiffCoefficients& c, double omega) {
    const auto fm = feedback_map(c);
    const cplx z = std::polar(1.0, omega);
    const cplx ntf = 1.0 / (1.0 + loop_gain(c, fm, z));
    return input_path(c, omega) * ntf;
}

StfReport compute_stf(const CiffCoefficients& c, std::size_t grid) {
    c.validate();
    if (grid < 2) throw ArgumentError("STF grid needs at least two points");
    StfReport r;
    r.omega.resize(grid);
    r.magnitude.resize(grid);
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid; ++i) {
        r.omega[i] = pi * static_cast<double>(i + 1) / static_cast<double>(grid);
        r.magnitude[i] = std::abs(stf_response(c, r.omega[i]));
        if (r.magnitude[i] > r.magnitude[best]) best = i;
    }
    double lo = best == 0 ? 1e-9 : r.omega[best - 1];
    double hi = r.omega[std::min(best + 1, grid - 1)];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    auto mag = [&](double w) { return std::abs(stf_response(c, w)); };
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = mag(x1), f2 = mag(x2);
    for (int it = 0; it < 50; ++it) {
        if (f1 > f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - g * (hi - lo); f1 = mag(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + g * (hi - lo); f2 = mag(x2);
        }
    }
    const double w = 0.5 * (lo + hi);
    r.peak_magnitude = std::max(mag(w), r.magnitude[best]);
    r.peak_omega = mag(w) >= r.magnitude[best] ? w : r.omega[best];
    r.dc_magnitude = mag(1e-7);
    return r;
}

} // namespace dsfl
