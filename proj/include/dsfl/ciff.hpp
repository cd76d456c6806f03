#pragma once

#include "dsfl/transfer_function.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dsfl {

enum class LoopKind { discrete_time, continuous_time };

/// Local feedback from integrator `first + 1` back into integrator `first`,
/// which places a complex NTF zero pair.
struct Resonator {
    std::size_t first = 0;
    double g = 0.0;
};

/// Cascade-of-integrators feedforward loop filter. The input and the main DAC
/// both enter the first integrator; a second DAC (`dac2_gain`) feeds the quantizer
/// summing node directly and compensates the excess loop delay.
/// Time is normalized to the design clock period.
struct CiffCoefficients {
    LoopKind kind = LoopKind::continuous_time;
    std::vector<double> integrator_gains; // k_i
    std::vector<double> feedforward;      // a_i
    std::vector<Resonator> resonators;
    double dac1_gain = 1.0;
    double dac2_gain = 0.0;
    double input_gain = 1.0;   // single input feed-in weight, set for unity STF at DC
    double excess_delay = 0.0; // CT: DAC pulse occupies [n + d, n + 1 + d), d in clock periods
    std::vector<double> state_scale; // typical |x_i| under nominal operation

    std::size_t order() const { return integrator_gains.size(); }
    /// Throws ArgumentError on size mismatches or non-finite values.
    void validate() const;
};

/// Excess loop delay (fraction of a clock period) assumed for continuous-time realizations.
inline constexpr double default_excess_delay = 0.43;

struct RealizeOptions {
    LoopKind kind = LoopKind::continuous_time;
    double excess_delay = default_excess_delay; // ignored for discrete time
    std::vector<double> integrator_gains;       // empty: all 1
};

/// Loop filter matrices. CT: dx/dt = A x + b (input_gain * u - dac1_gain * v_dac).
/// DT: x[n+1] = A x[n] + b (input_gain * u[n] - dac1_gain * v[n]); the second
/// integrator of every resonator pair is non-delaying so the pair's poles lie on
/// the unit circle. `tc_errors` (one per integrator, may be empty) scales the
/// gain k_i by (1 + tc_errors[i]).
struct LoopMatrices {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};
LoopMatrices loop_matrices(const CiffCoefficients& c, const std::vector<double>& tc_errors = {});

/// Coefficients whose linearized loop reproduces `ntf` (NTF = 1/(1+L)). Throws
/// ArgumentError for an unstable NTF or order > 8 and RealizationError when any
/// coefficient magnitude exceeds 1e3.
CiffCoefficients realize_ciff(const TransferFunction& ntf, const RealizeOptions& opt = {});

/// NTF of the realized loop with a unity-gain linearized quantizer.
TransferFunction extract_ntf(const CiffCoefficients& c);

/// Closed-loop signal transfer function at omega (rad per clock period).
cplx stf_response(const CiffCoefficients& c, double omega);

struct StfReport {
    double peak_magnitude = 0.0;
    double peak_omega = 0.0;
    double dc_magnitude = 0.0;
    std::vector<double> omega;
    std::vector<double> magnitude;
};

/// STF magnitude on a uniform grid over (0, pi] with the peak refined by golden section.
StfReport compute_stf(const CiffCoefficients& c, std::size_t grid = 4096);

/// Sets state_scale from a nominal simulation of the realized loop (defined with the simulators).
void calibrate_state_scale(CiffCoefficients& c);

} // namespace dsfl
