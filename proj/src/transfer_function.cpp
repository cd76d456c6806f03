#include "dsfl/transfer_function.hpp"

#include "dsfl/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dsfl {

cplx TransferFunction::evaluate(cplx z) const {
    cplx num = gain;
    for (const auto& q : zeros) num *= (z - q);
    cplx den = 1.0;
    for (const auto& p : poles) den *= (z - p);
    return num / den;
}

bool TransferFunction::is_stable() const {
    return std::all_of(poles.begin(), poles.end(), [](cplx p) { return std::abs(p) < 1.0; });
}

double TransferFunction::peak_magnitude(double* at_omega) const {
    constexpr int grid = 8192;
    const double pi = std::numbers::pi;
    int best = 0;
    double best_mag = -1.0;
    for (int i = 0; i <= grid; ++i) {
        const double m = magnitude(pi * i / grid);
        if (m > best_mag) {
            best_mag = m;
            best = i;
        }
    }
    double lo = pi * std::max(0, best - 1) / grid;
    double hi = pi * std::min(grid, best + 1) / grid;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = magnitude(x1), f2 = magnitude(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 > f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - r * (hi - lo); f1 = magnitude(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + r * (hi - lo); f2 = magnitude(x2);
        }
    }
    double w = 0.5 * (lo + hi);
    double m = magnitude(w);
    if (best_mag > m) {
        m = best_mag;
        w = pi * best / grid;
    }
    if (at_omega) *at_omega = w;
    return m;
}

std::vector<double> TransferFunction::numerator() const {
    auto c = poly_from_roots(zeros);
    for (double& x : c) x *= gain;
    return c;
}

std::vector<double> TransferFunction::denominator() const { return poly_from_roots(poles); }

std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
    std::vector<cplx> c{1.0};
    for (const auto& r : roots) {
        std::vector<cplx> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

std::vector<cplx> poly_roots(const std::vector<double>& coeffs) {
    std::size_t lead = 0;
    while (lead < coeffs.size() && coeffs[lead] == 0.0) ++lead;
    if (lead == coeffs.size()) throw ArgumentError("zero polynomial has no defined roots");
    const std::size_t n = coeffs.size() - lead - 1;
    if (n == 0) return {};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) comp(0, static_cast<Eigen::Index>(j)) = -coeffs[lead + 1 + j] / coeffs[lead];
    for (std::size_t i = 1; i < n; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<cplx> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
    return r;
}

cplx poly_eval(const std::vector<double>& coeffs, cplx z) {
    cplx acc = 0.0;
    for (double c : coeffs) acc = acc * z + c;
    return acc;
}

std::string to_json(const TransferFunction& tf) {
    nlohmann::json j;
    auto arr = [](const std::vector<cplx>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& c : v) a.push_back({c.real(), c.imag()});
        return a;
    };
    j["zeros"] = arr(tf.zeros);
    j["poles"] = arr(tf.poles);
    j["gain"] = tf.gain;
    return j.dump();
}

TransferFunction transfer_function_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("transfer function: ") + e.what(), e.byte);
    }
    auto list = [&](const char* key) {
        std::vector<cplx> out;
        if (!j.contains(key) || !j[key].is_array()) throw ParseError(std::string("missing array '") + key + "'", 0);
        for (const auto& e : j[key]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ParseError(std::string("entries of '") + key + "' must be [re, im]", 0);
            out.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return out;
    };
    TransferFunction tf;
    tf.zeros = list("zeros");
    tf.poles = list("poles");
    if (!j.contains("gain") || !j["gain"].is_number()) throw ParseError("missing number 'gain'", 0);
    tf.gain = j["gain"].get<double>();
    return tf;
}

} // namespace dsfl
