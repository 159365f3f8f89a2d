#ifndef GFLOWSS_TEST_ORACLES_HPP
#define GFLOWSS_TEST_ORACLES_HPP

// Reference computations written without the library's helpers.

#include <gflowss/fourier_mlp.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace gflowss::testing {

/// Laplace expansion along the first row.
inline double cofactor_det(const Eigen::MatrixXd& a) {
    const auto n = a.rows();
    if (n == 0) return 1.0;
    if (n == 1) return a(0, 0);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::MatrixXd minor(n - 1, n - 1);
        for (Eigen::Index r = 1; r < n; ++r) {
            Eigen::Index cc = 0;
            for (Eigen::Index c = 0; c < n; ++c) {
                if (c == j) continue;
                minor(r - 1, cc++) = a(r, c);
            }
        }
        sum += ((j % 2 == 0) ? 1.0 : -1.0) * a(0, j) * cofactor_det(minor);
    }
    return sum;
}

/// Every k-subset of {0..m-1} as ascending index lists, lexicographic.
inline std::vector<std::vector<std::size_t>> k_subsets(std::size_t m, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < m; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

inline std::string bits_of(std::size_t m, const std::vector<std::size_t>& idx) {
    std::string s(m, '0');
    for (auto i : idx) s[i] = '1';
    return s;
}

/// Straight-line loops over the layer list: sin, then ReLU, then affine.
inline std::vector<double> naive_forward(const NetworkParams& p, std::vector<double> x) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& w = p.layers[l].weight;
        const auto& b = p.layers[l].bias;
        std::vector<double> y(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            double acc = b(i);
            for (Eigen::Index j = 0; j < w.cols(); ++j) acc += w(i, j) * x[static_cast<std::size_t>(j)];
            if (l == 0) acc = std::sin(acc);
            else if (l + 1 < p.layers.size()) acc = std::max(acc, 0.0);
            y[static_cast<std::size_t>(i)] = acc;
        }
        x = std::move(y);
    }
    return x;
}

/// Central difference of f with respect to the scalar `param`.
inline double central_diff(double& param, const std::function<double()>& f, double h = 1e-5) {
    const double saved = param;
    param = saved + h;
    const double up = f();
    param = saved - h;
    const double down = f();
    param = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_error(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

inline std::vector<double> normalized(std::vector<double> v) {
    double z = 0.0;
    for (double x : v) z += x;
    for (double& x : v) x /= z;
    return v;
}

} // namespace gflowss::testing

#endif
