#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rqe {

#define RQE_VERSION "0.1.0"

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/** Throws std::invalid_argument when any entry of v is NaN or infinite. */
inline void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
}

inline void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
}

/** max(entries) − min(entries); the payoff span sp(R). */
inline double span_of(const Mat& m) {
    if (m.size() == 0) return 0.0;
    return m.maxCoeff() - m.minCoeff();
}

/**
 * Runs fn(i) for i in [0, n) on up to n_threads workers.
 *
 * Work is split into contiguous chunks, one per worker, so the result is
 * deterministic as long as fn(i) touches only index-i state. n_threads <= 1
 * runs inline.
 */
inline void parallel_for(int n, int n_threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (n_threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    int workers = std::min(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = w * chunk;
        int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rqe
