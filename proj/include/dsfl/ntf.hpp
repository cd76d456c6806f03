#pragma once

#include "dsfl/transfer_function.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dsfl {

struct NtfSpec {
    int order = 4;
    double osr = 50.0;
    double h_inf = 1.5;  // out-of-band gain bound
    bool optimize_zeros = true;

    /// Throws ArgumentError for order outside 1..8, osr <= 1, or h_inf <= 1.
    void validate() const;
};

/// f_s / (2 f_b). Throws ArgumentError unless f_s > 2 f_b > 0.
double compute_osr(double f_s, double f_b);

/// Low-pass NTF with unity leading coefficient. Poles follow a maximally flat
/// prototype scaled until max |NTF| equals h_inf; when the all-FIR response already
/// satisfies the bound, every pole sits at the origin. With optimize_zeros the zeros
/// are spread across the band to minimize the in-band noise integral, otherwise all
/// zeros are at z = 1.
TransferFunction synthesize_ntf(const NtfSpec& spec);

/// Positive zero angles (rad/sample, ascending; odd orders add an unlisted zero at DC) that minimize
/// the in-band integral of |prod(1 - e^{j(theta_i - w)})|^2 for the given order.
std::vector<double> optimized_zero_angles(int order, double osr);

/// (1/pi) * integral over [0, pi/osr] of |NTF(e^{jw})|^2 dw.
double inband_noise_integral(const TransferFunction& ntf, double osr);

/// In-band quantization noise power for a quantizer of step `delta` with the
/// white delta^2/12 error model.
double inband_quantization_noise(const TransferFunction& ntf, double osr, double delta = 2.0);

struct LoopRun {
    std::vector<double> v;   // +/-1
    bool stable = true;
    double max_state = 0.0;  // largest |quantizer input|
};

/// Error-feedback simulation of a 1-bit loop with the given NTF: the quantizer
/// input is u + (NTF - 1) e. Marks the run unstable and stops once the quantizer
/// input exceeds `bound`. Requires a stable NTF with unity leading coefficient.
LoopRun simulate_ntf_loop(const TransferFunction& ntf, std::span<const double> u, double bound = 1e3);

struct SqnrOptions {
    std::size_t fft_length = 1 << 16;
    std::size_t settle = 256;     // leading samples discarded
    double amp_step_db = 0.5;
    double amp_span_db = 30.0;    // grid reaches this far below the stability limit
    double bound = 1e3;
};

struct SqnrPrediction {
    double peak_sqnr_db = 0.0;      // best simulated in-band SQNR
    double amplitude_at_peak = 0.0; // full-scale units
    double a_max = 0.0;             // largest stable sine amplitude found by bisection
    double sigma2_q = 0.0;          // quadrature in-band noise power
    double linear_sqnr_db = 0.0;    // (a_max^2/2) / sigma2_q
};

/// Peak SQNR of a 1-bit loop with this NTF. The stability limit a_max comes from a
/// bisection on simulated loop boundedness; the peak is the maximum of the measured
/// SQNR on an amplitude grid at and below a_max. Throws ArgumentError for an unstable NTF.
SqnrPrediction predict_sqnr(const TransferFunction& ntf, double osr, double delta = 2.0,
                            const SqnrOptions& opt = {});

struct SweepCell {
    int order = 0;
    double osr = 0.0;
    bool ok = false;
    double peak_sqnr_db = 0.0;
    double linear_sqnr_db = 0.0;
    double a_max = 0.0;
    std::string error;
};

/// Peak SQNR for every (order, osr) pair, rows ordered by order then osr.
/// Synthesis failures are recorded per cell rather than thrown.
std::vector<SweepCell> sweep_peak_sqnr(const std::vector<int>& orders, const std::vector<double>& osr_grid,
                                       double h_inf = 1.5, bool optimize_zeros = true, const SqnrOptions& opt = {});

/// CSV `order,osr,peak_sqnr_db`; failed cells carry `nan`.
void write_sqnr_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);

} // namespace dsfl
