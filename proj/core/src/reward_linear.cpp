#include "gflowss/reward_linear.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "gflowss/error.hpp"

namespace gflowss {

void RewardConfig::validate() const {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "reward scale c must be positive");
    if (!(prescale > 0.0)) throw Error(ErrorCode::InvalidArgument, "determinant prescale must be positive");
}

LinearInstance gen_instance(std::size_t m, std::size_t n, std::uint64_t seed) {
    if (m < 2 || n < 1) throw Error(ErrorCode::InvalidArgument, "instance needs m >= 2 and n >= 1");
    LinearInstance inst{m, n, seed, Eigen::MatrixXd(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n))};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < inst.vectors.rows(); ++i)
        for (Eigen::Index j = 0; j < inst.vectors.cols(); ++j) inst.vectors(i, j) = normal(rng);
    return inst;
}

Eigen::MatrixXd outer_product_sum(const LinearInstance& inst, const SubsetState& x) {
    if (x.size() != inst.m) throw Error(ErrorCode::DimensionMismatch, "subset length differs from m");
    const auto n = static_cast<Eigen::Index>(inst.n);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i : x.indices()) {
        const Eigen::VectorXd a = inst.vectors.row(static_cast<Eigen::Index>(i)).transpose();
        sum.noalias() += a * a.transpose();
    }
    return sum;
}

double subset_det(const LinearInstance& inst, const SubsetState& x) {
    const Eigen::MatrixXd sum = outer_product_sum(inst, x);
    if (sum.rows() == 0) return 1.0;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sum);
    const double det = ldlt.vectorD().prod();
    const double scale = sum.diagonal().maxCoeff();
    const double floor = 1e-12 * std::pow(scale, static_cast<double>(inst.n));
    if (!(scale > 0.0) || !(det > floor)) return 0.0;
    return det;
}

double sigmoid_reward(double d, const RewardConfig& cfg) {
    const double z = cfg.prescale * d;
    // Branch so exp never overflows.
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return cfg.c * s;
}

double logdet_objective(const LinearInstance& inst, const SubsetState& x) {
    const double det = subset_det(inst, x);
    if (!(det > 0.0)) {
        throw Error(ErrorCode::SingularSubset, "selected vectors do not span R^n: " + x.to_string());
    }
    // Sum of logs of the pivots keeps precision for very large determinants.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(outer_product_sum(inst, x));
    return ldlt.vectorD().array().log().sum();
}

double shifted_logdet(const LinearInstance& inst, const SubsetState& x, double eps) {
    Eigen::MatrixXd sum = outer_product_sum(inst, x);
    sum.diagonal().array() += eps;
    const Eigen::LLT<Eigen::MatrixXd> llt(sum);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularMatrix, "regularized outer-product sum is not positive definite");
    }
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

nlohmann::json to_json(const LinearInstance& inst) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(inst.vectors.size()));
    for (Eigen::Index i = 0; i < inst.vectors.rows(); ++i)
        for (Eigen::Index j = 0; j < inst.vectors.cols(); ++j) data.push_back(inst.vectors(i, j));
    return nlohmann::json{{"kind", "linear"}, {"m", inst.m}, {"n", inst.n}, {"seed", inst.seed}, {"vectors", data}};
}

LinearInstance linear_instance_from_json(const nlohmann::json& j) {
    LinearInstance inst;
    inst.m = j.at("m").get<std::size_t>();
    inst.n = j.at("n").get<std::size_t>();
    inst.seed = j.value("seed", std::uint64_t{0});
    const auto data = j.at("vectors").get<std::vector<double>>();
    if (data.size() != inst.m * inst.n) {
        throw Error(ErrorCode::DimensionMismatch, "instance data has " + std::to_string(data.size()) +
                                                      " entries, expected m*n = " + std::to_string(inst.m * inst.n));
    }
    inst.vectors.resize(static_cast<Eigen::Index>(inst.m), static_cast<Eigen::Index>(inst.n));
    for (std::size_t i = 0; i < inst.m; ++i)
        for (std::size_t c = 0; c < inst.n; ++c)
            inst.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = data[i * inst.n + c];
    if (!inst.vectors.allFinite()) throw Error(ErrorCode::InvalidArgument, "instance has non-finite entries");
    return inst;
}

void save_instance(const LinearInstance& inst, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(inst).dump(2) << '\n';
}

LinearInstance load_linear_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return linear_instance_from_json(nlohmann::json::parse(in));
}

} // namespace gflowss
