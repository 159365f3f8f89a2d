#ifndef GFLOWSS_REWARD_LINEAR_HPP
#define GFLOWSS_REWARD_LINEAR_HPP

#include <cstdint>
#include <filesystem>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gflowss/subset_mdp.hpp"

namespace gflowss {

/// m measurement vectors in R^n, one per row of `vectors`.
struct LinearInstance {
    std::size_t m = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd vectors;
};

struct RewardConfig {
    double c = 1000.0;
    /// Multiplies the determinant before the sigmoid; 1 leaves it untouched.
    double prescale = 1.0;

    void validate() const;
};

/// i.i.d. standard normal entries, deterministic per seed.
LinearInstance gen_instance(std::size_t m, std::size_t n, std::uint64_t seed);

/// sum_{i in x} a_i a_i^T (n x n).
Eigen::MatrixXd outer_product_sum(const LinearInstance& inst, const SubsetState& x);

/// det of the selected outer-product sum via a pivoted LDL^T factorization.
/// Returns exactly 0 when the value is below 1e-12 * (largest diagonal)^n.
double subset_det(const LinearInstance& inst, const SubsetState& x);

/// c * sigmoid(prescale * d).
double sigmoid_reward(double d, const RewardConfig& cfg = {});

/// ln det of the selected sum; throws SingularSubset when subset_det is 0.
double logdet_objective(const LinearInstance& inst, const SubsetState& x);

/// ln det(sum_{i in x} a_i a_i^T + eps I); defined for every subset.
double shifted_logdet(const LinearInstance& inst, const SubsetState& x, double eps);

nlohmann::json to_json(const LinearInstance& inst);
LinearInstance linear_instance_from_json(const nlohmann::json& j);
void save_instance(const LinearInstance& inst, const std::filesystem::path& path);
LinearInstance load_linear_instance(const std::filesystem::path& path);

} // namespace gflowss

#endif // GFLOWSS_REWARD_LINEAR_HPP
