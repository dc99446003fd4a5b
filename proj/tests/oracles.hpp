// Independent reference implementations used to cross-check the library.
//
// Everything here is deliberately written with different algorithms than the
// production code: projection by active-set enumeration instead of the
// sort-based method, eigenvalues by cyclic Jacobi instead of Eigen's solver,
// quantiles/regression/CSV parsing from first principles. Tests compare the
// two sides; agreement is evidence, shared code would not be.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

// ── Euclidean projection onto {v : Σv = 1, v ≥ floor} by active-set search ──
//
// KKT structure: the minimizer has v_i = x_i + theta on a "free" set and
// v_i = floor elsewhere. Enumerate every nonempty free set (fine for n ≤ 20),
// keep the feasible candidate with the smallest distance.
inline std::vector<double> project_simplex(const std::vector<double>& x, double floor = 0.0) {
    const std::size_t n = x.size();
    if (n == 0 || floor * static_cast<double>(n) >= 1.0) {
        throw std::invalid_argument("oracle projection: infeasible");
    }
    double best_dist = std::numeric_limits<double>::infinity();
    std::vector<double> best;
    for (std::uint64_t mask = 1; mask < (1ull << n); ++mask) {
        double sum_free = 0.0;
        int n_free = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i)) {
                sum_free += x[i];
                ++n_free;
            }
        }
        const double theta =
            (1.0 - floor * static_cast<double>(n - static_cast<std::size_t>(n_free)) - sum_free) /
            static_cast<double>(n_free);
        std::vector<double> v(n, floor);
        bool feasible = true;
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1ull << i)) {
                v[i] = x[i] + theta;
                if (v[i] < floor - 1e-12) feasible = false;
            }
            dist += (v[i] - x[i]) * (v[i] - x[i]);
        }
        if (feasible && dist < best_dist) {
            best_dist = dist;
            best = std::move(v);
        }
    }
    return best;
}

// ── Central finite differences ───────────────────────────────────────────────
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double fd_partial(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x, std::size_t i, double h = 1e-5) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    return (up - down) / (2.0 * h);
}

// Second partial d²f/(dx_i dx_j) by nested central differences.
inline double fd_second(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double> x, std::size_t i, std::size_t j, double h = 1e-4) {
    auto shift = [&x](std::size_t k, double d) {
        std::vector<double> y = x;
        y[k] += d;
        return y;
    };
    if (i == j) {
        return (f(shift(i, h)) - 2.0 * f(x) + f(shift(i, -h))) / (h * h);
    }
    std::vector<double> pp = shift(i, h), pm = shift(i, h), mp = shift(i, -h), mm = shift(i, -h);
    pp[j] += h;
    pm[j] -= h;
    mp[j] += h;
    mm[j] -= h;
    return (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
}

// ── Symmetric eigenvalues by cyclic Jacobi rotations ─────────────────────────
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        }
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    std::sort(eig.begin(), eig.end());
    return eig;
}

inline double jacobi_min_eigenvalue(const std::vector<std::vector<double>>& a) {
    return jacobi_eigenvalues(a).front();
}

// ── Quantile with linear interpolation (values need not be pre-sorted) ──────
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("oracle quantile: empty sample");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

// ── Ordinary least squares on (x, y): slope, intercept, R² ───────────────────
struct LinFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("oracle linear_fit: need two matched samples");
    }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

// ── Minimal CSV reader: header row + numeric cells, empty cell → NaN ─────────
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        throw std::runtime_error("oracle csv: missing column " + name);
    }
};

inline Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("oracle csv: cannot open " + path);
    Csv out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.eof()) break;
        std::vector<std::string> cells;
        std::string cell;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        if (first) {
            out.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) {
            row.push_back(c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// ── Misc small helpers ───────────────────────────────────────────────────────
inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oracle
