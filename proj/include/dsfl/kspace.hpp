#pragma once

#include "dsfl/link.hpp"
#include "dsfl/modulator.hpp"
#include "dsfl/signal.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace dsfl {

/// Row-major complex grid; rows are phase-encode lines, columns frequency-encode samples.
struct KSpaceData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> data;
    std::size_t center_row = 0;
    std::size_t center_col = 0;
    double dwell_time = 1e-6; // s per column sample

    cplx& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    cplx at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    /// Throws ArgumentError for grids smaller than 8x8, size mismatch, centre outside the
    /// grid or non-positive dwell time.
    void validate() const;
};

struct ImageData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> data;
};

/// Text header followed by little-endian float64 (re, im) pairs in row-major order.
void save_kspace(const KSpaceData& k, const std::filesystem::path& path);
void write_kspace(std::ostream& os, const KSpaceData& k);
/// Throws ParseError (line number for the header, byte offset for the body) on malformed input
/// and std::runtime_error when the file cannot be opened.
KSpaceData load_kspace(const std::filesystem::path& path);
KSpaceData read_kspace(std::istream& is);

/// 20 log10(max |k| / floor), floor = median |k| over the four corner blocks (each rows/4 x
/// cols/4). Throws MeasurementError when the floor is zero.
double kspace_dynamic_range(const KSpaceData& k);

/// Row k_y = center_row as a complex signal sampled at 1 / dwell_time.
ComplexSignal extract_center_row(const KSpaceData& k);

/// Unitary centred 2-D inverse DFT (DC at the centre index of both grids).
ImageData reconstruct_image(const KSpaceData& k);
/// Unitary centred 2-D forward DFT; inverse of reconstruct_image.
KSpaceData image_to_kspace(const ImageData& img, double dwell_time = 1e-6);

struct Ellipse {
    double cx = 0.0, cy = 0.0; // centre in [-1, 1] field-of-view coordinates
    double ax = 0.5, ay = 0.5; // semi-axes, same units
    double angle = 0.0;        // rad
    double intensity = 1.0;
};

struct PhantomOptions {
    std::size_t supersample = 4; // per-axis subpixel samples for edge coverage
    /// Gaussian k-space taper exp(-(|k|/(taper * n))^2) modelling finite acquisition
    /// resolution; 0 disables it. Without a taper, sharp edges leave signal in the corners.
    double taper = 0.125;
    double dwell_time = 5e-6;
};

/// Rasterized ellipse image transformed to k-space. Throws ArgumentError for dims < 8 or an
/// ellipse that leaves the field of view.
KSpaceData generate_phantom(std::size_t nx, std::size_t ny, const std::vector<Ellipse>& ellipses,
                            const PhantomOptions& opt = {});

/// Five-ellipse head phantom used by the tests and the CLI.
std::vector<Ellipse> default_phantom();

/// Adds complex Gaussian noise whose median magnitude sits `dbc` below the peak magnitude.
void add_kspace_noise(KSpaceData& k, double dbc, std::uint64_t seed);

/// 16-bit binary PGM of the magnitude, scaled so the maximum maps to 65535.
void write_pgm(std::ostream& os, const ImageData& img);
/// Magnitude as CSV, one image row per line.
void write_image_csv(std::ostream& os, const ImageData& img);

struct FidelityResult {
    double nrmse = 0.0;
    ImageData reference;
    ImageData received;
    std::size_t bit_errors = 0;
    bool modulator_stable = true;
};

struct FidelityOptions {
    double peak_dbfs = -6.0; // largest k-space magnitude maps to this modulator level
    std::size_t periods = 3; // each row is repeated; the middle period is measured
    std::uint64_t pilot_seed = 99;
};

/// Sends every k-space row through the link as a periodic band-limited waveform on the
/// carrier f_l, equalizes per frequency bin with a pilot row and compares reconstructed
/// images. The row band 1/dwell_time must fit in the link bandwidth and the row period must
/// hold a whole number of bits and carrier cycles.
FidelityResult link_fidelity(const KSpaceData& k, const LinkConfig& link, const ModulatorConfig& mod,
                             const FidelityOptions& opt = {});

} // namespace dsfl
