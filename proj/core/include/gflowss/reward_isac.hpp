#ifndef GFLOWSS_REWARD_ISAC_HPP
#define GFLOWSS_REWARD_ISAC_HPP

#include <complex>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gflowss/subset_mdp.hpp"
#include "gflowss/trajectory_balance.hpp"

namespace gflowss {

struct IsacDims {
    std::size_t nt = 80; ///< transmit antennas
    std::size_t nr = 80; ///< receive antennas
    std::size_t ns = 10; ///< RF chains / user antennas
    std::size_t L = 100; ///< symbol block length

    void validate() const;
};

struct IsacInstance {
    IsacDims dims;
    std::uint64_t seed = 0;
    Eigen::MatrixXcd H; ///< ns x nt channel
};

/// Row i has a single 1 at column rows[i]; rows ascend.
struct SelectionMatrix {
    std::size_t nt = 0;
    std::vector<std::size_t> rows;

    Eigen::MatrixXd dense() const;
    /// S^H S, an nt x nt 0/1 diagonal.
    Eigen::MatrixXd selector() const;
};

struct Beamformer {
    Eigen::MatrixXcd F; ///< nt x ns
};

struct IsacRewardConfig {
    double c_scale = 20000.0;
    std::size_t n_wir = 50;
    double inner_lr = 0.01;
    std::size_t max_restarts = 3;

    void validate() const;
};

/// Real and imaginary parts ~ Normal(0, 1/2) so E|H_ij|^2 = 1.
IsacInstance gen_channel(const IsacDims& dims, std::uint64_t seed);

/// Throws WrongCardinality unless x has exactly ns ones.
SelectionMatrix state_to_selection(const SubsetState& x, std::size_t ns);

/// S F F^H S^H, Hermitian-symmetrized (ns x ns).
Eigen::MatrixXcd crb_gram(const SelectionMatrix& S, const Beamformer& F);
/// I + (1/ns) H S^H S F F^H S^H S H^H, Hermitian-symmetrized (ns x ns).
Eigen::MatrixXcd rate_gram(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst);
/// Frobenius norm of M - M^H.
double hermitian_asymmetry(const Eigen::MatrixXcd& m);

/// (N_r / L) trace((S F F^H S^H)^-1). Throws SingularGram when the Gram is
/// not positive definite or its condition estimate exceeds 1e14.
double crb(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst);

/// log2 det(I + (1/ns) H S^H S F F^H S^H S H^H).
double comm_rate(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst);

/// beta_crb * c_scale / CRB + beta_rate * rate; either weight may be 0.
double weighted_objective(const SelectionMatrix& S, const Beamformer& F, double beta_crb, double beta_rate,
                          const IsacInstance& inst, double c_scale);

/// n * c_scale / CRB + (1 - n) * rate.
double dfrc_objective(const SelectionMatrix& S, const Beamformer& F, const Preference& pref, const IsacInstance& inst,
                      const IsacRewardConfig& cfg);

/// Derivative of the weighted objective with respect to conj(F). The real
/// gradient over (Re F, Im F) is twice its real and imaginary parts.
Eigen::MatrixXcd weighted_objective_wirtinger(const SelectionMatrix& S, const Beamformer& F, double beta_crb,
                                              double beta_rate, const IsacInstance& inst, double c_scale);

Eigen::MatrixXcd dfrc_wirtinger_gradient(const SelectionMatrix& S, const Beamformer& F, const Preference& pref,
                                         const IsacInstance& inst, const IsacRewardConfig& cfg);

/// Complex Gaussian nt x ns matrix scaled to unit Frobenius norm.
Beamformer random_beamformer(const IsacDims& dims, std::uint64_t seed);

struct AscentResult {
    Beamformer best;
    double best_objective = 0.0;
    /// Best-so-far objective after each iterate, initialization first.
    std::vector<double> trace;
    std::size_t restarts = 0;
};

/// Gradient ascent along the conjugate Wirtinger derivative, renormalizing F
/// to unit Frobenius norm after every step. A SingularGram restarts from a
/// fresh seeded initialization, up to cfg.max_restarts times.
AscentResult ascend_weighted(const SelectionMatrix& S, const IsacInstance& inst, double beta_crb, double beta_rate,
                             double c_scale, std::size_t steps, double lr, std::size_t max_restarts,
                             std::uint64_t seed);

AscentResult wirtinger_ascent(const SelectionMatrix& S, const IsacInstance& inst, const Preference& pref,
                              const IsacRewardConfig& cfg, std::uint64_t seed);

/// Seed of the inner ascent for subset x: mixes the instance seed and the mask.
std::uint64_t inner_seed(const IsacInstance& inst, const SubsetState& x);

struct IsacEvaluation {
    double crb = 0.0;
    double rate = 0.0;
    double reward = 0.0;
};

/// Optimizes F for (x, n) and reports CRB, rate and the reward at F*.
IsacEvaluation evaluate_isac(const SubsetState& x, const Preference& pref, const IsacInstance& inst,
                             const IsacRewardConfig& cfg);

/// R(x, n) = dfrc_objective at F*.
double isac_reward(const SubsetState& x, const Preference& pref, const IsacInstance& inst,
                   const IsacRewardConfig& cfg);

/// Balances the two objective terms: the mean over `count` random subsets of
/// CRB(S, F_crb*) * rate(S, F_rate*), each F* optimized for its term alone.
double calibrate_c_scale(const IsacInstance& inst, const IsacRewardConfig& cfg, std::size_t count,
                         std::uint64_t seed);

/// Memoizes evaluate_isac by (mask, n). Concurrent readers share the lock,
/// insertion takes it exclusively.
class IsacRewardCache {
public:
    IsacRewardCache(IsacInstance inst, IsacRewardConfig cfg);

    IsacEvaluation evaluate(const SubsetState& x, double n);
    double reward(const SubsetState& x, double n) { return evaluate(x, n).reward; }

    std::size_t size() const;
    std::size_t misses() const;
    const IsacInstance& instance() const noexcept { return inst_; }
    const IsacRewardConfig& config() const noexcept { return cfg_; }

    /// CSV rows (mask, n, crb, rate, reward), sorted by mask then n.
    void dump_csv(std::ostream& out) const;

private:
    struct Key {
        SubsetState mask;
        double n;
        friend bool operator==(const Key&, const Key&) = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            return SubsetStateHash{}(k.mask) ^ (std::hash<double>{}(k.n) << 1);
        }
    };

    IsacInstance inst_;
    IsacRewardConfig cfg_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<Key, IsacEvaluation, KeyHash> table_;
    std::size_t misses_ = 0;
};

nlohmann::json to_json(const IsacInstance& inst);
IsacInstance isac_instance_from_json(const nlohmann::json& j);
void save_instance(const IsacInstance& inst, const std::filesystem::path& path);
IsacInstance load_isac_instance(const std::filesystem::path& path);

} // namespace gflowss

#endif // GFLOWSS_REWARD_ISAC_HPP
