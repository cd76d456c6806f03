#pragma once

#include "dsfl/ciff.hpp"
#include "dsfl/jitter.hpp"
#include "dsfl/signal.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace dsfl {

struct ModulatorConfig {
    CiffCoefficients coeffs;          // coeffs.kind selects the simulator
    double f_s = 100e6;               // design clock
    double f_s_actual = 100e6;        // applied clock
    double osr = 50.0;                // used to place thermal noise in band
    double delta = 2.0;               // quantizer step; outputs are +/- delta/2
    double thermal_noise_variance = 0.0; // in-band, input-referred (full-scale units squared)
    double tc_error = 0.0;            // common fractional time-constant error
    std::vector<double> tc_errors;    // per-integrator errors; overrides tc_error when non-empty
    ClockModel jitter;
    std::uint64_t seed = 1;
    double state_bound = 10.0;        // normalized state magnitude treated as runaway
    std::size_t unstable_samples = 16; // consecutive samples above the bound
    bool stop_on_unstable = true;     // false: flag instability but run to the end of the input

    LoopKind kind() const { return coeffs.kind; }
    /// Throws ArgumentError for non-positive rates, |tc error| >= 0.5, negative variances.
    void validate() const;
    std::vector<double> effective_tc_errors() const;
};

struct BitstreamResult {
    std::vector<double> bits; // each +/- delta/2
    double f_s = 0.0;         // rate of `bits`
    bool stable = true;
    double max_state = 0.0;   // largest normalized integrator state seen
    std::size_t unstable_at = std::numeric_limits<std::size_t>::max();

    RealSignal signal() const { return RealSignal(bits, f_s); }
};

/// Sample-by-sample discrete-time loop. Input rate must equal f_s_actual.
/// An unstable run stops at detection and returns the bits produced so far
/// unless cfg.stop_on_unstable is false.
BitstreamResult simulate_dt(const ModulatorConfig& cfg, const RealSignal& input);

/// Continuous-time loop integrated exactly over each clock period. The input may
/// be sampled at f_s_actual or at 4 * f_s_actual and is treated as piecewise
/// linear between samples. One output bit per clock period.
BitstreamResult simulate_ct(const ModulatorConfig& cfg, const RealSignal& input);

/// Dispatches on cfg.kind().
BitstreamResult simulate(const ModulatorConfig& cfg, const RealSignal& input);

/// Synthesizes an NTF (h_inf, optimized zeros) and realizes it for the given loop kind.
ModulatorConfig design_modulator(int order, double osr, double f_s, LoopKind kind, double h_inf = 1.5,
                                 bool optimize_zeros = true);

/// `# f_s_hz=<rate>` header then one +/-1 integer per row.
void write_bitstream_csv(std::ostream& os, const BitstreamResult& r);
BitstreamResult read_bitstream_csv(std::istream& is, double delta = 2.0);

} // namespace dsfl
