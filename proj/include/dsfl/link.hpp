#pragma once

#include "dsfl/filters.hpp"
#include "dsfl/jitter.hpp"
#include "dsfl/metrics.hpp"
#include "dsfl/modulator.hpp"
#include "dsfl/signal.hpp"

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace dsfl {

enum class MixerMode { single, quadrature };

struct LowPassSpec {
    double cutoff = 0.0; // Hz; 0 means 1.2 x the baseband edge
    int order = 6;
};

struct CubicSpec {
    double a1 = 1.0;
    double a3 = 0.0;
};

struct OpticalConfig {
    double i_bias = 30e-3;          // A
    double i_threshold = 9e-3;      // A
    double v_ref = 2.5;             // V across the bias-setting resistor
    double r2 = 2.5 / 30e-3;        // ohm, bias resistor (I_bias = V_ref / R2 in hardware)
    double slope_efficiency = 0.3;  // W/A above threshold
    double responsivity = 0.85;     // A/W
    double attenuation_db = 0.5;    // fiber and connector loss
    double detector_noise_variance = 0.0; // V^2 at the TIA output, per analog sample
    double tia_bandwidth = 0.0;     // Hz, one pole; 0 means unlimited
    double tia_transimpedance = 1e3; // ohm
    std::uint64_t seed = 7;

    /// Throws ArgumentError for negative or non-finite values and ConfigError when
    /// i_bias <= i_threshold (the laser never turns on).
    void validate() const;
    /// TIA output voltage while the laser is on.
    double on_voltage() const;
};

struct LinkConfig {
    double f_lo = 120e6;
    double f_l = 119.8e6;
    double f_b = 200e3;             // signal bandwidth around f_l
    std::vector<PhaseNoisePoint> lo_phase_noise; // empty: ideal LO
    MixerMode mixer_mode = MixerMode::single;
    LowPassSpec lpf;
    CubicSpec nonlinearity;         // applied to the RF input
    OpticalConfig optical;
    bool auto_retime = true;        // retime delay tracks the nominal fiber delay
    double retime_delay = 0.0;      // s, used when auto_retime is false
    double fiber_length = 0.0;      // m
    double adc_full_scale = 1.0;    // V at the mixer output mapped to modulator full scale
    double dac_full_scale = 1.0;    // V at the output for a full-scale recovered signal
    double output_noise_dbm_hz = -std::numeric_limits<double>::infinity(); // receiver output noise density
    double impedance = 50.0;
    std::uint64_t seed = 11;

    double f_if() const;
    /// Highest baseband frequency the modulators must carry.
    double baseband_edge() const;
    double lpf_cutoff() const;
    /// Throws ArgumentError on non-positive frequencies and for single-mixer plans with
    /// f_if < f_b / 2, where the two sidebands would overlap.
    void validate() const;
};

/// Analog simulation rate: the smallest multiple of 4 f_s above 2.2 (f_l + f_b).
double rf_sample_rate(const LinkConfig& link, double f_s);

/// Nominal propagation delay per metre of fiber and its plausible range.
inline constexpr double fiber_delay_min = 5.0e-9;
inline constexpr double fiber_delay_max = 5.5e-9;
inline constexpr double fiber_delay_nominal = 5.25e-9;

struct FiberMismatch {
    double min_s = 0.0;
    double max_s = 0.0;
};
FiberMismatch fiber_mismatch(double fiber_length);

/// y = a1 x + a3 x^3. Throws ArgumentError unless a1 > 0.
RealSignal cubic_nonlinearity(const RealSignal& sig, double a1, double a3);
/// Sine amplitude at which the fundamental gain of the cubic drops by 1 dB.
double compression_amplitude(double a1, double a3);

/// Phase-noise sample path (rad) whose spectrum follows the single-sideband table.
std::vector<double> synthesize_phase_noise(const std::vector<PhaseNoisePoint>& table, std::size_t n, double rate,
                                           std::uint64_t seed);

/// Multiply by 2 cos(LO) (single) or 2 exp(-j LO) (quadrature), then low-pass. Single mode
/// returns a complex signal with zero imaginary part.
ComplexSignal mix_down(const RealSignal& rf, const LinkConfig& link);

/// Two-level optical link: laser on for positive bits, off otherwise. The NRZ waveform is
/// built at 4 samples per bit, delayed by `fiber_delay`, attenuated, detected, band-limited by
/// the TIA and corrupted by detector noise. The returned voltage is centred on the decision
/// threshold.
RealSignal ook_channel(const BitstreamResult& bits, const OpticalConfig& cfg, double fiber_delay = 0.0);

struct RetimeResult {
    BitstreamResult bits;       // +/-1
    double phase_error = 0.0;   // s, sampling instant minus eye centre at nominal fiber delay
    double margin = 0.0;        // s, worst case over the fiber mismatch range
    bool violation = false;     // sampling inside the transition window
    long bit_offset = 0;        // bits[n] corresponds to transmitted bit n + bit_offset
    FiberMismatch mismatch;
};

/// Sign decision sampled at clock edges. Bit n is sampled at
/// (n + 0.5) / clock_f + channel_delay + delay. The transition window is 1/16 of a bit.
RetimeResult comparator_retime(const RealSignal& analog, double clock_f, double delay, double fiber_length = 0.0,
                               double channel_delay = 0.0);

/// Low-pass reconstruction of one or two recovered bitstreams and image-free translation
/// back to f_l, band limited to [f_l - f_b, f_l + f_b]. `q` may be null in single mode.
RealSignal reconstruct_and_upconvert(const BitstreamResult& i, const BitstreamResult* q, const LinkConfig& link,
                                     double rf_rate, std::size_t rf_length);

struct TraceStage {
    std::string name;
    double sample_rate = 0.0;
    std::vector<double> re;
    std::vector<double> im; // empty for real stages
};

struct ChainTrace {
    std::vector<TraceStage> stages;
    const TraceStage& stage(const std::string& name) const;
    /// Writes <stage>.csv for every stage and manifest.csv (stage, sample rate, length, file).
    void export_csv(const std::filesystem::path& dir) const;
};

struct ChainResult {
    ChainTrace trace;
    RealSignal output;
    std::vector<BitstreamResult> transmitted; // one per channel
    std::vector<RetimeResult> received;
    std::size_t bit_errors = 0;
    bool modulator_stable = true;
};

/// Full transmit/receive chain. rf_in must be sampled at rf_sample_rate(link, mod.f_s_actual).
/// Quadrature mode runs matched I and Q modulators and channels with independent seeds.
ChainResult run_chain(const RealSignal& rf_in, const LinkConfig& link, const ModulatorConfig& mod,
                      bool keep_trace = true);

struct PowerBudget {
    double bias_network_mw = 0.0;
    double fixed_mw = 0.0;
    double total_mw = 0.0;
};
/// Bias-network dissipation i_bias * v_ref plus fixed block powers (mW).
PowerBudget power_budget(const OpticalConfig& cfg, const std::vector<double>& fixed_block_mw = {});

struct LinkToneMeasurement {
    double output_dbm = 0.0;
    double noise_density_dbm_hz = 0.0; // mean over the signal band, tone excluded
    double snr_db = 0.0;               // tone against in-band noise
};

/// Hann spectrum of the last power-of-two samples of the RF output. The tone occupies
/// `halfwidth` bins either side of f_tone (1 suits a coherent tone); noise is averaged over
/// [f_l - f_b/2, f_l + f_b/2] away from the tone and its expected share is removed from the
/// tone power.
LinkToneMeasurement measure_link_output(const RealSignal& out, const LinkConfig& link, double f_tone,
                                        std::size_t halfwidth = 3);

struct LinkSweepReport {
    SweepResult sweep;               // input dBm, output dBm
    P1dbResult p1db;
    double noise_floor_out_dbm = 0.0; // in `rbw`
    double noise_floor_in_dbm = 0.0;
    double dynamic_range_db = 0.0;   // NaN when undefined
    double rbw = 1.0;
};

/// Input-power sweep of a tone near f_l (snapped to a bin of the n_bits record) through the
/// full chain plus a zero-input run for the noise floor. The floor is quoted in resolution bandwidth `rbw` and referred to the input
/// through the fitted small-signal gain.
LinkSweepReport link_input_sweep(const LinkConfig& link, const ModulatorConfig& mod, const std::vector<double>& dbm_grid,
                                 std::size_t n_bits = 1 << 14, double rbw = 1.0);

} // namespace dsfl
