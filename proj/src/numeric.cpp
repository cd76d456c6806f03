#include "dsfl/numeric.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace dsfl {

namespace {

struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk61(const std::function<double(double)>& f, double a, double b) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double err = 0.0;
    // max_depth 0: a single 61-point rule, error from the embedded Gauss rule
    const double v = GK::integrate(f, a, b, 0, 0.0, &err);
    return {a, b, v, err};
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol) {
    if (a == b) return 0.0;
    std::priority_queue<Piece> heap;
    Piece first = gk61(f, a, b);
    double total = first.value;
    double total_err = first.error;
    heap.push(first);
    // QUADPACK-style global adaptivity: always bisect the worst interval
    for (int iter = 0; iter < 4000; ++iter) {
        if (total_err <= std::max(abs_tol, rel_tol * std::abs(total))) break;
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Piece l = gk61(f, worst.a, mid);
        Piece r = gk61(f, mid, worst.b);
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
    }
    // re-sum to shed accumulated rounding from the incremental updates
    double sum = 0.0;
    while (!heap.empty()) {
        sum += heap.top().value;
        heap.pop();
    }
    return sum;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("DSFL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace dsfl
