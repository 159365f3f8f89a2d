#include "gflowss/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gflowss/error.hpp"

namespace gflowss {

namespace {

double llt_logdet(const Eigen::MatrixXd& m) {
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularMatrix, "matrix is not positive definite");
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double total = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) total += std::log(l(i, i));
    return 2.0 * total;
}

Eigen::MatrixXd weighted_sum(const LinearInstance& inst, const Eigen::VectorXd& x, double eps) {
    const auto n = static_cast<Eigen::Index>(inst.n);
    Eigen::MatrixXd m = inst.vectors.transpose() * x.asDiagonal() * inst.vectors;
    m += eps * Eigen::MatrixXd::Identity(n, n);
    return m;
}

void check_length(const LinearInstance& inst, const Eigen::VectorXd& x) {
    if (x.size() != static_cast<Eigen::Index>(inst.m)) {
        throw Error(ErrorCode::DimensionMismatch, "relaxed point must have m entries");
    }
}

} // namespace

void GreedyConfig::validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
}

std::vector<std::size_t> greedy_sequence(const LinearInstance& inst, std::size_t k, const GreedyConfig& cfg) {
    cfg.validate();
    if (k >= inst.m) throw Error(ErrorCode::InvalidArgument, "greedy budget must be below m");
    const auto n = static_cast<Eigen::Index>(inst.n);
    Eigen::MatrixXd base = cfg.epsilon * Eigen::MatrixXd::Identity(n, n);
    std::vector<bool> taken(inst.m, false);
    std::vector<std::size_t> order;
    order.reserve(k);
    for (std::size_t round = 0; round < k; ++round) {
        std::size_t best = inst.m;
        double best_value = 0.0;
        for (std::size_t i = 0; i < inst.m; ++i) {
            if (taken[i]) continue;
            const Eigen::VectorXd a = inst.vectors.row(static_cast<Eigen::Index>(i)).transpose();
            const double value = llt_logdet(base + a * a.transpose());
            if (best == inst.m || value > best_value) {
                best = i;
                best_value = value;
            }
        }
        const Eigen::VectorXd a = inst.vectors.row(static_cast<Eigen::Index>(best)).transpose();
        base += a * a.transpose();
        taken[best] = true;
        order.push_back(best);
    }
    return order;
}

SubsetState greedy_select(const LinearInstance& inst, std::size_t k, const GreedyConfig& cfg) {
    return SubsetState::from_indices(inst.m, greedy_sequence(inst, k, cfg));
}

double normalized_shifted_logdet(const LinearInstance& inst, const SubsetState& x, double eps) {
    return shifted_logdet(inst, x, eps) - static_cast<double>(inst.n) * std::log(eps);
}

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double k) {
    const auto m = static_cast<double>(v.size());
    if (!(k >= 0.0) || k > m) throw Error(ErrorCode::InvalidArgument, "budget must lie in [0, m]");
    if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "projection input must be finite");
    if (k == m) return Eigen::VectorXd::Ones(v.size());
    if (k == 0.0) return Eigen::VectorXd::Zero(v.size());

    auto clipped = [&](double lambda) { return (v.array() - lambda).cwiseMax(0.0).cwiseMin(1.0).matrix().eval(); };
    // The clipped sum decreases in lambda: m at lo, 0 at hi.
    double lo = v.minCoeff() - 1.0;
    double hi = v.maxCoeff();
    Eigen::VectorXd x = clipped(0.5 * (lo + hi));
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        x = clipped(mid);
        const double s = x.sum();
        if (std::abs(s - k) <= 1e-12) break;
        if (s > k) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return x;
}

double relaxed_objective(const LinearInstance& inst, const Eigen::VectorXd& x, double eps) {
    check_length(inst, x);
    return llt_logdet(weighted_sum(inst, x, eps));
}

Eigen::VectorXd relaxed_gradient(const LinearInstance& inst, const Eigen::VectorXd& x, double eps) {
    check_length(inst, x);
    const Eigen::LLT<Eigen::MatrixXd> llt(weighted_sum(inst, x, eps));
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularMatrix, "relaxed matrix is not positive definite");
    // a_i^T M^-1 a_i = ||L^-1 a_i||^2
    const Eigen::MatrixXd w = llt.matrixL().solve(inst.vectors.transpose());
    return w.colwise().squaredNorm().transpose();
}

RelaxedResult relaxed_logdet_solve(const LinearInstance& inst, std::size_t k, std::size_t iters, double step,
                                   double eps) {
    if (k == 0 || k > inst.m) throw Error(ErrorCode::InvalidArgument, "budget must lie in [1, m]");
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be positive");
    Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(inst.m),
                                                  static_cast<double>(k) / static_cast<double>(inst.m));
    RelaxedResult result;
    result.x = x;
    result.start_objective = relaxed_objective(inst, x, eps);
    result.objective = result.start_objective;
    for (std::size_t it = 0; it < iters; ++it) {
        x = project_capped_simplex(x + step * relaxed_gradient(inst, x, eps), static_cast<double>(k));
        const double value = relaxed_objective(inst, x, eps);
        if (value > result.objective) {
            result.objective = value;
            result.x = x;
        }
    }
    return result;
}

SubsetState round_topk(const Eigen::VectorXd& x, std::size_t k) {
    const auto m = static_cast<std::size_t>(x.size());
    if (k > m) throw Error(ErrorCode::InvalidArgument, "k exceeds the vector length");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a)) > x(static_cast<Eigen::Index>(b));
    });
    order.resize(k);
    return SubsetState::from_indices(m, order);
}

} // namespace gflowss
