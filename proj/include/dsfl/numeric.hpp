#pragma once

#include <cstddef>
#include <functional>

namespace dsfl {

/// Adaptive Gauss-Kronrod (61 point) integral of f over [a, b].
/// Terminates when the error estimate is below max(abs_tol, rel_tol * |I|).
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-8, double rel_tol = 1e-10);

/// Worker count for parallel sweeps: DSFL_THREADS if set to a positive integer,
/// otherwise std::thread::hardware_concurrency() (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
/// processed exactly once; results must be written to per-index slots so the
/// outcome does not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace dsfl
