#pragma once

#include <complex>
#include <string>
#include <vector>

namespace dsfl {

using cplx = std::complex<double>;

/// Rational discrete-time transfer function in zero/pole/gain form:
///   H(z) = gain * prod(z - zeros) / prod(z - poles)
struct TransferFunction {
    std::vector<cplx> zeros;
    std::vector<cplx> poles;
    double gain = 1.0;

    cplx evaluate(cplx z) const;
    /// H(e^{j*omega}), omega in rad/sample.
    cplx response(double omega) const { return evaluate(std::polar(1.0, omega)); }
    double magnitude(double omega) const { return std::abs(response(omega)); }

    bool is_stable() const;
    std::size_t order() const { return std::max(zeros.size(), poles.size()); }

    /// Max |H(e^{jw})| over [0, pi]: dense grid followed by golden-section refinement.
    double peak_magnitude(double* at_omega = nullptr) const;

    /// Real polynomial coefficients, highest power of z first (gain applied to numerator).
    std::vector<double> numerator() const;
    std::vector<double> denominator() const;
};

/// Monic real polynomial with the given roots (conjugate pairs assumed), highest power first.
std::vector<double> poly_from_roots(const std::vector<cplx>& roots);

/// Roots of a real polynomial given highest power first (companion-matrix eigenvalues).
std::vector<cplx> poly_roots(const std::vector<double>& coeffs);

/// Evaluate a real polynomial (highest power first) at z.
cplx poly_eval(const std::vector<double>& coeffs, cplx z);

/// JSON text {"zeros":[[re,im],...],"poles":[...],"gain":g}. Doubles are written in
/// shortest round-trip form so parse(serialize(tf)) reproduces tf exactly.
std::string to_json(const TransferFunction& tf);
TransferFunction transfer_function_from_json(const std::string& text);

} // namespace dsfl
