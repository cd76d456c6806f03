#include "dsfl/kspace.hpp"

#include "dsfl/error.hpp"
#include "dsfl/fft.hpp"
#include "dsfl/numeric.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace dsfl {

namespace {

constexpr const char* magic = "DSFL-KSPACE 1";

void put_le(std::ostream& os, double v) {
    std::array<char, 8> b;
    std::memcpy(b.data(), &v, 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    os.write(b.data(), 8);
}

double get_le(const char* p) {
    std::array<char, 8> b;
    std::memcpy(b.data(), p, 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    double v;
    std::memcpy(&v, b.data(), 8);
    return v;
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<long>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(n / 2));
    return 0.5 * (lo + hi);
}

// out[i] = in[(i + shift) mod n] along both axes.
std::vector<cplx> roll(const std::vector<cplx>& in, std::size_t rows, std::size_t cols, std::size_t sr,
                       std::size_t sc) {
    std::vector<cplx> out(in.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[((r + sr) % rows) * cols + (c + sc) % cols];
    return out;
}

} // namespace

void KSpaceData::validate() const {
    if (rows < 8 || cols < 8) throw ArgumentError("k-space grid must be at least 8x8");
    if (data.size() != rows * cols) throw ArgumentError("k-space data size does not match rows x cols");
    if (center_row >= rows || center_col >= cols) throw ArgumentError("k-space centre outside the grid");
    if (!(dwell_time > 0.0) || !std::isfinite(dwell_time)) throw ArgumentError("dwell time must be positive");
}

void write_kspace(std::ostream& os, const KSpaceData& k) {
    k.validate();
    os << magic << '\n'
       << "rows " << k.rows << '\n'
       << "cols " << k.cols << '\n'
       << "center_row " << k.center_row << '\n'
       << "center_col " << k.center_col << '\n'
       << "dwell_time " << format_double(k.dwell_time) << '\n'
       << "end\n";
    for (const auto& v : k.data) {
        put_le(os, v.real());
        put_le(os, v.imag());
    }
}

void save_kspace(const KSpaceData& k, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_kspace(f, k);
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

KSpaceData read_kspace(std::istream& is) {
    std::string line;
    std::size_t lineno = 0, offset = 0;
    auto next = [&]() -> bool {
        if (!std::getline(is, line)) return false;
        ++lineno;
        offset += line.size() + 1;
        return true;
    };
    if (!next() || line != magic) throw ParseError("missing k-space header", 1);

    KSpaceData k;
    bool have[5] = {};
    for (;;) {
        if (!next()) throw ParseError("header ends without 'end'", lineno + 1);
        if (line == "end") break;
        std::istringstream ls(line);
        std::string key, extra;
        ls >> key;
        auto read_size = [&](std::size_t& dst) {
            long long v = -1;
            if (!(ls >> v) || v < 0 || (ls >> extra)) throw ParseError("bad value for " + key, lineno);
            dst = static_cast<std::size_t>(v);
        };
        if (key == "rows") read_size(k.rows), have[0] = true;
        else if (key == "cols") read_size(k.cols), have[1] = true;
        else if (key == "center_row") read_size(k.center_row), have[2] = true;
        else if (key == "center_col") read_size(k.center_col), have[3] = true;
        else if (key == "dwell_time") {
            if (!(ls >> k.dwell_time) || (ls >> extra)) throw ParseError("bad value for dwell_time", lineno);
            have[4] = true;
        } else
            throw ParseError("unknown header key '" + key + "'", lineno);
    }
    if (!std::all_of(std::begin(have), std::end(have), [](bool b) { return b; }))
        throw ParseError("header is missing a required key", lineno);
    try {
        if (k.rows < 8 || k.cols < 8 || k.center_row >= k.rows || k.center_col >= k.cols || !(k.dwell_time > 0.0))
            throw ArgumentError("");
    } catch (const ArgumentError&) {
        throw ParseError("header values out of range", lineno);
    }

    const std::size_t n = k.rows * k.cols;
    std::vector<char> buf(n * 16);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(is.gcount());
    if (got < buf.size()) throw ParseError("truncated k-space body", offset + got);
    if (is.peek() != std::char_traits<char>::eof()) throw ParseError("trailing data after k-space body", offset + got);
    k.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double re = get_le(buf.data() + 16 * i), im = get_le(buf.data() + 16 * i + 8);
        if (!std::isfinite(re) || !std::isfinite(im)) throw ParseError("non-finite k-space sample", offset + 16 * i);
        k.data[i] = {re, im};
    }
    return k;
}

KSpaceData load_kspace(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return read_kspace(f);
}

double kspace_dynamic_range(const KSpaceData& k) {
    k.validate();
    const std::size_t br = k.rows / 4, bc = k.cols / 4;
    std::vector<double> corner;
    for (std::size_t r = 0; r < k.rows; ++r) {
        if (r >= br && r < k.rows - br) continue;
        for (std::size_t c = 0; c < k.cols; ++c)
            if (c < bc || c >= k.cols - bc) corner.push_back(std::abs(k.at(r, c)));
    }
    double peak = 0.0;
    for (const auto& v : k.data) peak = std::max(peak, std::abs(v));
    const double floor = median(corner);
    if (!(floor > 0.0)) throw MeasurementError("k-space corner floor is zero; dynamic range undefined");
    return 20.0 * std::log10(peak / floor);
}

ComplexSignal extract_center_row(const KSpaceData& k) {
    k.validate();
    const auto first = k.data.begin() + static_cast<long>(k.center_row * k.cols);
    return ComplexSignal(std::vector<cplx>(first, first + static_cast<long>(k.cols)), 1.0 / k.dwell_time);
}

ImageData reconstruct_image(const KSpaceData& k) {
    k.validate();
    const auto shifted = roll(k.data, k.rows, k.cols, k.center_row, k.center_col);
    auto t = fft::transform_2d(shifted, k.rows, k.cols, false);
    const double s = 1.0 / std::sqrt(static_cast<double>(k.rows * k.cols));
    for (auto& v : t) v *= s;
    ImageData img{k.rows, k.cols, roll(t, k.rows, k.cols, k.rows - k.rows / 2, k.cols - k.cols / 2)};
    return img;
}

KSpaceData image_to_kspace(const ImageData& img, double dwell_time) {
    if (img.data.size() != img.rows * img.cols) throw ArgumentError("image data size does not match rows x cols");
    const auto shifted = roll(img.data, img.rows, img.cols, img.rows / 2, img.cols / 2);
    auto t = fft::transform_2d(shifted, img.rows, img.cols, true);
    const double s = 1.0 / std::sqrt(static_cast<double>(img.rows * img.cols));
    for (auto& v : t) v *= s;
    KSpaceData k;
    k.rows = img.rows;
    k.cols = img.cols;
    k.center_row = img.rows / 2;
    k.center_col = img.cols / 2;
    k.dwell_time = dwell_time;
    k.data = roll(t, img.rows, img.cols, img.rows - img.rows / 2, img.cols - img.cols / 2);
    k.validate();
    return k;
}

std::vector<Ellipse> default_phantom() {
    const double deg = std::numbers::pi / 180.0;
    return {
        {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
        {0.22, 0.0, 0.11, 0.31, -18.0 * deg, -0.2},
        {-0.22, 0.0, 0.16, 0.41, 18.0 * deg, -0.2},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
    };
}

KSpaceData generate_phantom(std::size_t nx, std::size_t ny, const std::vector<Ellipse>& ellipses,
                            const PhantomOptions& opt) {
    if (nx < 8 || ny < 8) throw ArgumentError("phantom needs at least 8x8 pixels");
    if (opt.supersample == 0) throw ArgumentError("supersample must be >= 1");
    if (opt.taper < 0.0) throw ArgumentError("taper must be >= 0");
    for (const auto& e : ellipses) {
        if (!(e.ax > 0.0) || !(e.ay > 0.0)) throw ArgumentError("ellipse semi-axes must be positive");
        const double c = std::cos(e.angle), s = std::sin(e.angle);
        const double ex = std::hypot(e.ax * c, e.ay * s), ey = std::hypot(e.ax * s, e.ay * c);
        if (std::abs(e.cx) + ex > 1.0 + 1e-12 || std::abs(e.cy) + ey > 1.0 + 1e-12)
            throw ArgumentError("ellipse extends outside the field of view");
    }

    ImageData img{ny, nx, std::vector<cplx>(nx * ny)};
    const std::size_t ss = opt.supersample;
    const double w = 1.0 / static_cast<double>(ss * ss);
    for (std::size_t i = 0; i < ny; ++i)
        for (std::size_t j = 0; j < nx; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < ss; ++a)
                for (std::size_t b = 0; b < ss; ++b) {
                    const double y = 2.0 * (static_cast<double>(i) + (a + 0.5) / ss) / static_cast<double>(ny) - 1.0;
                    const double x = 2.0 * (static_cast<double>(j) + (b + 0.5) / ss) / static_cast<double>(nx) - 1.0;
                    for (const auto& e : ellipses) {
                        const double c = std::cos(e.angle), s = std::sin(e.angle);
                        const double u = (x - e.cx) * c + (y - e.cy) * s;
                        const double v = -(x - e.cx) * s + (y - e.cy) * c;
                        if ((u * u) / (e.ax * e.ax) + (v * v) / (e.ay * e.ay) <= 1.0) acc += e.intensity;
                    }
                }
            img.data[i * nx + j] = acc * w;
        }

    KSpaceData k = image_to_kspace(img, opt.dwell_time);
    if (opt.taper > 0.0) {
        const double sx = opt.taper * static_cast<double>(nx), sy = opt.taper * static_cast<double>(ny);
        for (std::size_t r = 0; r < ny; ++r)
            for (std::size_t c = 0; c < nx; ++c) {
                const double kx = (static_cast<double>(c) - static_cast<double>(k.center_col)) / sx;
                const double ky = (static_cast<double>(r) - static_cast<double>(k.center_row)) / sy;
                k.at(r, c) *= std::exp(-(kx * kx + ky * ky));
            }
    }
    return k;
}

void add_kspace_noise(KSpaceData& k, double dbc, std::uint64_t seed) {
    k.validate();
    double peak = 0.0;
    for (const auto& v : k.data) peak = std::max(peak, std::abs(v));
    // Median of a Rayleigh magnitude is sigma sqrt(2 ln 2).
    const double sigma = peak * std::pow(10.0, -dbc / 20.0) / std::sqrt(2.0 * std::numbers::ln2);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : k.data) v += cplx(n(rng), n(rng));
}

void write_pgm(std::ostream& os, const ImageData& img) {
    double peak = 0.0;
    for (const auto& v : img.data) peak = std::max(peak, std::abs(v));
    os << "P5\n" << img.cols << ' ' << img.rows << "\n65535\n";
    for (const auto& v : img.data) {
        const double q = peak > 0.0 ? std::round(std::abs(v) / peak * 65535.0) : 0.0;
        const auto u = static_cast<unsigned>(std::clamp(q, 0.0, 65535.0));
        const char b[2] = {static_cast<char>(u >> 8), static_cast<char>(u & 0xff)};
        os.write(b, 2);
    }
}

void write_image_csv(std::ostream& os, const ImageData& img) {
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            if (c) os << ',';
            os << format_double(std::abs(img.data[r * img.cols + c]));
        }
        os << '\n';
    }
}

namespace {

bool near_integer(double x) { return std::abs(x - std::round(x)) < 1e-6; }

// Zero-padded periodic interpolation of `spec` (an unnormalized C-point DFT) to n samples per
// period, modulated onto the carrier and repeated `periods` times.
RealSignal row_waveform(const std::vector<cplx>& spec, std::size_t n_per, std::size_t periods, double rate,
                        double f_l) {
    const std::size_t c = spec.size();
    std::vector<cplx> pad(n_per);
    for (std::size_t k = 0; k < c; ++k) pad[k < c / 2 ? k : n_per - (c - k)] = spec[k] / static_cast<double>(c);
    const auto z = fft::transform(pad, false);
    std::vector<double> x(n_per * periods);
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double ph = 2.0 * std::numbers::pi * std::fmod(f_l * static_cast<double>(n) / rate, 1.0);
        x[n] = (z[n % n_per] * std::polar(1.0, ph)).real();
    }
    return RealSignal(std::move(x), rate);
}

// Complex envelope bins of the middle period of the chain output. The record ends are
// avoided: block FFT stages in the receiver wrap the start-up transient onto the tail.
std::vector<cplx> row_bins(const RealSignal& out, std::size_t c, std::size_t n_per, double f_l) {
    const std::size_t start = (out.size() / n_per / 2) * n_per;
    std::vector<cplx> d(n_per);
    for (std::size_t n = 0; n < n_per; ++n) {
        const double ph = 2.0 * std::numbers::pi * std::fmod(f_l * static_cast<double>(start + n) / out.sample_rate(), 1.0);
        d[n] = 2.0 * out[start + n] * std::polar(1.0, -ph);
    }
    const auto spec = fft::transform(d, true);
    std::vector<cplx> bins(c);
    for (std::size_t k = 0; k < c; ++k) bins[k] = spec[k < c / 2 ? k : n_per - (c - k)];
    return bins;
}

double peak_sample(const std::vector<cplx>& spec) {
    const auto t = fft::transform(spec, false);
    double m = 0.0;
    for (const auto& v : t) m = std::max(m, std::abs(v));
    return m / static_cast<double>(spec.size());
}

} // namespace

FidelityResult link_fidelity(const KSpaceData& k, const LinkConfig& link, const ModulatorConfig& mod,
                             const FidelityOptions& opt) {
    k.validate();
    link.validate();
    mod.validate();
    if (opt.periods < 3) throw ArgumentError("fidelity needs at least three row periods");
    const double row_band = 1.0 / k.dwell_time;
    if (row_band > 2.0 * link.baseband_edge() * (1.0 + 1e-9))
        throw ArgumentError("k-space row bandwidth exceeds the link bandwidth");

    const double rate = rf_sample_rate(link, mod.f_s_actual);
    const double period = static_cast<double>(k.cols) * k.dwell_time;
    if (!near_integer(period * mod.f_s_actual) || !near_integer(period * rate) || !near_integer(period * link.f_l))
        throw ArgumentError("row period must hold whole numbers of bits, RF samples and carrier cycles");
    const auto n_per = static_cast<std::size_t>(std::llround(period * rate));
    const std::size_t c = k.cols;

    double peak = 0.0;
    for (const auto& v : k.data) peak = std::max(peak, std::abs(v));
    if (!(peak > 0.0)) throw ArgumentError("k-space data is all zero");
    const double target = std::pow(10.0, opt.peak_dbfs / 20.0) * link.adc_full_scale;
    const double gain = target / peak;

    auto run_row = [&](const std::vector<cplx>& spec, std::size_t index) {
        LinkConfig l = link;
        l.seed = link.seed + 7919 * index;
        l.optical.seed = link.optical.seed + 7919 * index;
        ModulatorConfig m = mod;
        m.seed = mod.seed + 7919 * index;
        const auto rf = row_waveform(spec, n_per, opt.periods, rate, link.f_l);
        return run_chain(rf, l, m, false);
    };

    // Flat-magnitude pilot with random phases; its response equalizes every row.
    std::mt19937_64 rng(opt.pilot_seed);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    std::vector<cplx> pilot(c);
    for (auto& v : pilot) v = std::polar(1.0, ph(rng));
    const double ps = target / peak_sample(pilot);
    for (auto& v : pilot) v *= ps;
    const auto pres = run_row(pilot, 0);
    const auto py = row_bins(pres.output, c, n_per, link.f_l);
    std::vector<cplx> h(c);
    for (std::size_t i = 0; i < c; ++i) {
        h[i] = py[i] / pilot[i];
        if (!(std::abs(h[i]) > 0.0)) throw MeasurementError("link response is zero inside the row band");
    }

    KSpaceData rx = k;
    std::vector<std::size_t> errors(k.rows);
    std::vector<char> stable(k.rows, 1);
    parallel_for(k.rows, [&](std::size_t r) {
        std::vector<cplx> row(k.data.begin() + static_cast<long>(r * c), k.data.begin() + static_cast<long>((r + 1) * c));
        auto spec = fft::transform(row, true);
        for (auto& v : spec) v *= gain;
        const auto res = run_row(spec, r + 1);
        errors[r] = res.bit_errors;
        stable[r] = res.modulator_stable;
        auto y = row_bins(res.output, c, n_per, link.f_l);
        for (std::size_t i = 0; i < c; ++i) y[i] /= h[i] * gain;
        const auto x = fft::transform(y, false);
        for (std::size_t i = 0; i < c; ++i) rx.at(r, i) = x[i] / static_cast<double>(c);
    });

    FidelityResult out;
    out.reference = reconstruct_image(k);
    out.received = reconstruct_image(rx);
    for (auto e : errors) out.bit_errors += e;
    out.bit_errors += pres.bit_errors;
    out.modulator_stable = pres.modulator_stable && std::all_of(stable.begin(), stable.end(), [](char s) { return s; });
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < out.reference.data.size(); ++i) {
        num += std::norm(out.received.data[i] - out.reference.data[i]);
        den += std::norm(out.reference.data[i]);
    }
    out.nrmse = std::sqrt(num / den);
    return out;
}

} // namespace dsfl
