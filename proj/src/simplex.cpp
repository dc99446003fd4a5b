#include "rqe/simplex.hpp"

#include <algorithm>
#include <numeric>

namespace rqe {

Vec BlockLayout::expand_weights(const WeightVector& lambda) const {
    lambda.validate();
    Vec w(total());
    w.segment(0, n1).setConstant(lambda.lambda1);
    w.segment(n1, n2).setConstant(lambda.lambda2);
    w.segment(n1 + n2, n2).setConstant(lambda.lambda1);
    w.segment(n1 + 2 * n2, n1).setConstant(lambda.lambda2);
    return w;
}

namespace {

/**
 * Sort-based projection onto the standard simplex (Duchi et al. 2008):
 *   sort u descending, rho = max{j : u_j − (cumsum_j − 1)/j > 0},
 *   theta = (cumsum_rho − 1)/rho, w = max(v − theta, 0).
 */
Vec project_standard_simplex(const Vec& v) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());

    double cumsum = 0.0;
    double theta = 0.0;
    int rho = 0;
    double rho_sum = 0.0;
    for (int j = 0; j < n; ++j) {
        cumsum += u[j];
        if (u[j] - (cumsum - 1.0) / (j + 1) > 0.0) {
            rho = j + 1;
            rho_sum = cumsum;
        }
    }
    theta = (rho_sum - 1.0) / rho;

    Vec w(n);
    for (int i = 0; i < n; ++i) w[i] = std::max(v[i] - theta, 0.0);
    return w;
}

}  // namespace

Vec project_simplex(const Vec& x, double floor) {
    require_finite(x, "project_simplex");
    const int n = static_cast<int>(x.size());
    if (n == 0) throw std::invalid_argument("project_simplex: empty vector");
    if (floor < 0.0) throw std::invalid_argument("project_simplex: negative floor");
    const double mass = 1.0 - floor * n;
    if (!(mass > 0.0)) {
        throw std::invalid_argument(
            "project_simplex: floor " + std::to_string(floor) + " infeasible for n=" +
            std::to_string(n));
    }
    if (floor == 0.0) return project_standard_simplex(x);

    // Substitute v = floor + mass·w: projecting x onto the floored simplex
    // is projecting (x − floor)/mass onto the standard simplex.
    Vec shifted = (x.array() - floor) / mass;
    Vec w = project_standard_simplex(shifted);
    return (floor + mass * w.array()).matrix();
}

bool is_on_simplex(const Vec& v, double floor, double tol) {
    if (v.size() == 0 || !v.allFinite()) return false;
    if (std::abs(v.sum() - 1.0) > tol) return false;
    return (v.array() >= floor - tol).all();
}

Vec ensure_simplex(Vec v) {
    require_finite(v, "ensure_simplex");
    if (v.size() == 0) throw std::invalid_argument("ensure_simplex: empty vector");
    const double kExact = 1e-12;
    const double kRepairable = 1e-9;
    double mass_err = std::abs(v.sum() - 1.0);
    double worst_neg = std::max(0.0, -v.minCoeff());
    if (mass_err <= kExact && worst_neg == 0.0) return v;
    if (mass_err > kRepairable || worst_neg > kRepairable) {
        throw std::invalid_argument(
            "ensure_simplex: violation too large (mass error " + std::to_string(mass_err) +
            ", min entry " + std::to_string(v.minCoeff()) + ")");
    }
    v = v.cwiseMax(0.0);
    double s = v.sum();
    if (s <= 0.0) throw std::invalid_argument("ensure_simplex: zero mass");
    return v / s;
}

double weighted_inner(const Vec& u, const Vec& v, const WeightVector& lambda,
                      const BlockLayout& layout) {
    if (u.size() != v.size() || u.size() != layout.total()) {
        throw std::invalid_argument(
            "weighted_inner: length mismatch (u=" + std::to_string(u.size()) + ", v=" +
            std::to_string(v.size()) + ", layout=" + std::to_string(layout.total()) + ")");
    }
    Vec w = layout.expand_weights(lambda);
    return (w.array() * u.array() * v.array()).sum();
}

double weighted_norm(const Vec& u, const WeightVector& lambda, const BlockLayout& layout) {
    return std::sqrt(std::max(0.0, weighted_inner(u, u, lambda, layout)));
}

}  // namespace rqe
