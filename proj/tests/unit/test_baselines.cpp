#include <gflowss/baselines.hpp>
#include <gflowss/error.hpp>

#include "test_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace gflowss;
using gflowss::testing::central_diff;
using gflowss::testing::k_subsets;
using gflowss::testing::rel_error;

namespace {

LinearInstance from_matrix(const Eigen::MatrixXd& rows) {
    LinearInstance inst;
    inst.m = static_cast<std::size_t>(rows.rows());
    inst.n = static_cast<std::size_t>(rows.cols());
    inst.vectors = rows;
    return inst;
}

// Closest feasible point on a 3-d grid of spacing 1/steps.
Eigen::Vector3d grid_projection(const Eigen::Vector3d& v, double k, int steps = 400) {
    Eigen::Vector3d best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps; ++j) {
            const double a = static_cast<double>(i) / steps;
            const double b = static_cast<double>(j) / steps;
            const double c = k - a - b;
            if (c < -1e-12 || c > 1.0 + 1e-12) continue;
            const Eigen::Vector3d x(a, b, c);
            const double d = (x - v).squaredNorm();
            if (d < best_d) best_d = d, best = x;
        }
    }
    return best;
}

} // namespace

TEST(Greedy, TwoCandidates) {
    Eigen::MatrixXd a(2, 1);
    a << 1.0, 2.0;
    const auto seq = greedy_sequence(from_matrix(a), 1);
    EXPECT_EQ(seq, (std::vector<std::size_t>{1}));
}

TEST(Greedy, TieBreakAndRankGain) {
    Eigen::MatrixXd a(3, 2);
    a << 1, 0, 0, 1, 1, 0;
    const auto seq = greedy_sequence(from_matrix(a), 2);
    EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(greedy_select(from_matrix(a), 2).to_string(), "110");
}

TEST(Greedy, RejectsBadInput) {
    const auto inst = gen_instance(5, 2, 1);
    EXPECT_THROW(greedy_sequence(inst, 6), Error);
    GreedyConfig cfg;
    cfg.epsilon = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Greedy, ApproximationGuarantee) {
    const double eps = 1e-12;
    const double ratio = 1.0 - std::exp(-1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = gen_instance(12, 3, seed);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& idx : k_subsets(12, 4))
            best = std::max(best, normalized_shifted_logdet(inst, SubsetState::from_indices(12, idx), eps));
        const double g = normalized_shifted_logdet(inst, greedy_select(inst, 4), eps);
        EXPECT_GE(g, ratio * best);
    }
}

TEST(Greedy, NormalizedObjectiveIsZeroOnEmptySet) {
    const auto inst = gen_instance(6, 3, 2);
    EXPECT_NEAR(normalized_shifted_logdet(inst, SubsetState(6), 1e-6), 0.0, 1e-9);
}

// Property: the greedy sequence is a prefix chain, so picks for k are a
// prefix of the picks for k+1, and the objective grows along it.
TEST(GreedyProperty, Nested) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = gen_instance(15, 4, seed);
        const auto full = greedy_sequence(inst, 8);
        for (std::size_t k = 1; k < 8; ++k) {
            const auto part = greedy_sequence(inst, k);
            EXPECT_TRUE(std::equal(part.begin(), part.end(), full.begin()));
        }
        double prev = -std::numeric_limits<double>::infinity();
        std::vector<std::size_t> chosen;
        for (auto i : full) {
            chosen.push_back(i);
            const double v = normalized_shifted_logdet(inst, SubsetState::from_indices(15, chosen), 1e-12);
            EXPECT_GE(v, prev);
            prev = v;
        }
    }
}

TEST(CappedSimplex, FeasibleIsFixed) {
    const Eigen::Vector4d v(0.2, 0.9, 0.4, 0.5);
    EXPECT_TRUE(project_capped_simplex(v, 2.0).isApprox(v, 1e-10));
}

TEST(CappedSimplex, HandCases) {
    const Eigen::Vector3d a = project_capped_simplex(Eigen::Vector3d(10, 10, -10), 2.0);
    EXPECT_NEAR((a - Eigen::Vector3d(1, 1, 0)).norm(), 0.0, 1e-10);
    EXPECT_NEAR((a - grid_projection(Eigen::Vector3d(10, 10, -10), 2.0)).norm(), 0.0, 1e-10);
    const Eigen::Vector3d b = project_capped_simplex(Eigen::Vector3d(0.5, 0.5, 0.5), 3.0);
    EXPECT_NEAR((b - Eigen::Vector3d::Ones()).norm(), 0.0, 1e-10);
}

TEST(CappedSimplex, MatchesGridOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.5, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Vector3d v(nd(rng), nd(rng), nd(rng));
        const double k = 0.5 + static_cast<double>(trial % 4) * 0.5;
        const Eigen::Vector3d p = project_capped_simplex(v, k);
        const Eigen::Vector3d g = grid_projection(v, k);
        EXPECT_LE((p - v).squaredNorm(), (g - v).squaredNorm() + 1e-12);
        EXPECT_LT((p - g).norm(), 5e-3);
    }
}

// Property: the projection lands in the set and no sampled feasible point is
// closer to the input.
TEST(CappedSimplexProperty, Optimality) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 3 + trial % 8;
        const double k = 1.0 + static_cast<double>(trial % (m - 1));
        Eigen::VectorXd v(m);
        for (int i = 0; i < m; ++i) v(i) = nd(rng);
        const Eigen::VectorXd p = project_capped_simplex(v, k);
        EXPECT_NEAR(p.sum(), k, 1e-9);
        EXPECT_GE(p.minCoeff(), -1e-12);
        EXPECT_LE(p.maxCoeff(), 1.0 + 1e-12);
        for (int s = 0; s < 20; ++s) {
            Eigen::VectorXd q(m);
            for (int i = 0; i < m; ++i) q(i) = unit(rng);
            q = project_capped_simplex(q, k);
            EXPECT_GE((q - v).squaredNorm(), (p - v).squaredNorm() - 1e-9);
        }
    }
}

TEST(Relaxed, ImprovesOnStart) {
    const auto inst = gen_instance(12, 3, 5);
    const auto res = relaxed_logdet_solve(inst, 4, 300, 0.05);
    EXPECT_GE(res.objective, res.start_objective);
    EXPECT_NEAR(res.x.sum(), 4.0, 1e-9);
    EXPECT_NEAR(res.objective, relaxed_objective(inst, res.x, 1e-12), 1e-12);
}

TEST(Relaxed, UpperBoundsBruteForce) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = gen_instance(6, 2, seed);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& idx : k_subsets(6, 2)) {
            const auto x = SubsetState::from_indices(6, idx);
            if (subset_det(inst, x) > 0.0) best = std::max(best, logdet_objective(inst, x));
        }
        const auto res = relaxed_logdet_solve(inst, 2, 2000, 0.05);
        EXPECT_GE(res.objective, best - 1e-9);
    }
}

TEST(Relaxed, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.1, 0.9);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto inst = gen_instance(8, 3, seed);
        Eigen::VectorXd x(8);
        for (int i = 0; i < 8; ++i) x(i) = unit(rng);
        const Eigen::VectorXd g = relaxed_gradient(inst, x, 1e-12);
        for (int i = 0; i < 8; ++i) {
            auto f = [&] { return relaxed_objective(inst, x, 1e-12); };
            EXPECT_LE(rel_error(g(i), central_diff(x(i), f)), 1e-4);
        }
    }
}

TEST(Relaxed, SingularThrows) {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 2, 0;
    try {
        relaxed_objective(from_matrix(a), Eigen::Vector2d(1, 1), 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
    }
}

TEST(RoundTopK, Cases) {
    EXPECT_EQ(round_topk(Eigen::Vector4d(0.9, 0.1, 0.8, 0.2), 2).to_string(), "1010");
    EXPECT_EQ(round_topk(Eigen::Vector4d::Constant(0.5), 2).to_string(), "1100");
    EXPECT_EQ(round_topk(Eigen::Vector4d(0.1, 0.3, 0.2, 0.0), 4).to_string(), "1111");
}
