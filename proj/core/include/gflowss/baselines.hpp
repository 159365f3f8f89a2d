#ifndef GFLOWSS_BASELINES_HPP
#define GFLOWSS_BASELINES_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gflowss/reward_linear.hpp"
#include "gflowss/subset_mdp.hpp"

namespace gflowss {

struct GreedyConfig {
    double epsilon = 1e-12; ///< diagonal regularizer

    void validate() const;
};

/// Indices in the order greedy picked them. Each round adds the index that
/// maximizes logdet(sum of chosen a a^T + eps I); ties go to the lower index.
std::vector<std::size_t> greedy_sequence(const LinearInstance& inst, std::size_t k, const GreedyConfig& cfg = {});

SubsetState greedy_select(const LinearInstance& inst, std::size_t k, const GreedyConfig& cfg = {});

/// logdet(sum_S a a^T + eps I) - n ln(eps); zero on the empty set.
double normalized_shifted_logdet(const LinearInstance& inst, const SubsetState& x, double eps);

/// Euclidean projection onto {x : sum x = k, 0 <= x <= 1}.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double k);

/// g(x) = logdet(sum_i x_i a_i a_i^T + eps I). Throws SingularMatrix.
double relaxed_objective(const LinearInstance& inst, const Eigen::VectorXd& x, double eps);

/// Component i is a_i^T M^-1 a_i with M the regularized weighted sum.
Eigen::VectorXd relaxed_gradient(const LinearInstance& inst, const Eigen::VectorXd& x, double eps);

struct RelaxedResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    double start_objective = 0.0;
};

/// Projected gradient ascent from x = (k/m) 1 with a fixed step; returns the
/// best iterate seen.
RelaxedResult relaxed_logdet_solve(const LinearInstance& inst, std::size_t k, std::size_t iters, double step,
                                   double eps = 1e-12);

/// Ones at the k largest entries; ties by ascending index.
SubsetState round_topk(const Eigen::VectorXd& x, std::size_t k);

} // namespace gflowss

#endif // GFLOWSS_BASELINES_HPP
