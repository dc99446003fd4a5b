// Shared conveniences for the test suites: Eigen <-> std::vector bridges and
// random interior points on (floored) simplices.
#pragma once

#include "rqe/common.hpp"
#include "rqe/rng.hpp"
#include "rqe/simplex.hpp"

#include <vector>

namespace testutil {

inline std::vector<double> to_std(const rqe::Vec& v) {
    return {v.data(), v.data() + v.size()};
}

inline rqe::Vec to_vec(const std::vector<double>& v) {
    rqe::Vec out(static_cast<long>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<long>(i)) = v[i];
    return out;
}

/** Random point on the floored simplex, strictly interior for floor > 0. */
inline rqe::Vec random_simplex(rqe::SplitMix64& rng, int n, double floor = 0.0) {
    return rqe::project_simplex(rng.dirichlet(n), floor);
}

}  // namespace testutil
