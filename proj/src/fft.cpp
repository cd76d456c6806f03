#include "dsfl/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace dsfl::fft {

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex planner_mutex;

struct PlanGuard {
    fftw_plan plan = nullptr;
    ~PlanGuard() {
        if (plan) {
            std::lock_guard lock(planner_mutex);
            fftw_destroy_plan(plan);
        }
    }
};

} // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<cplx> forward_real(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> in(x.begin(), x.end());
    std::vector<cplx> out(n / 2 + 1);
    PlanGuard g;
    {
        std::lock_guard lock(planner_mutex);
        g.plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                      reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(g.plan);
    return out;
}

std::vector<cplx> transform(std::span<const cplx> x, bool forward) {
    const std::size_t n = x.size();
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> out(n);
    PlanGuard g;
    {
        std::lock_guard lock(planner_mutex);
        g.plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                  reinterpret_cast<fftw_complex*>(out.data()),
                                  forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(g.plan);
    return out;
}

std::vector<cplx> transform_2d(std::span<const cplx> x, std::size_t rows, std::size_t cols, bool forward) {
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> out(rows * cols);
    PlanGuard g;
    {
        std::lock_guard lock(planner_mutex);
        g.plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                                  reinterpret_cast<fftw_complex*>(in.data()),
                                  reinterpret_cast<fftw_complex*>(out.data()),
                                  forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(g.plan);
    return out;
}

} // namespace dsfl::fft
