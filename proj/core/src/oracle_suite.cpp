#include "gflowss/oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <unordered_map>

#include "gflowss/baselines.hpp"
#include "gflowss/csv.hpp"
#include "gflowss/error.hpp"
#include "gflowss/fourier_mlp.hpp"
#include "gflowss/oracles.hpp"
#include "gflowss/reward_isac.hpp"
#include "gflowss/reward_linear.hpp"

namespace gflowss {

namespace {

constexpr double kFdStep = 1e-6;

OracleCheck make_check(std::string name, double measured, Comparison cmp, double threshold) {
    bool ok = false;
    switch (cmp) {
        case Comparison::Less: ok = measured < threshold; break;
        case Comparison::LessEqual: ok = measured <= threshold; break;
        case Comparison::GreaterEqual: ok = measured >= threshold; break;
    }
    return {std::move(name), measured, cmp, threshold, ok && std::isfinite(measured)};
}

std::string_view symbol(Comparison c) {
    switch (c) {
        case Comparison::Less: return "<";
        case Comparison::LessEqual: return "<=";
        case Comparison::GreaterEqual: return ">=";
    }
    return "<";
}

/// Seeded rewards in [0.5, 2) for every terminal of spec.
std::unordered_map<SubsetState, double, SubsetStateHash> random_rewards(const MdpSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::unordered_map<SubsetState, double, SubsetStateHash> table;
    for (const auto& x : enumerate_terminals(spec)) table.emplace(x, u(rng));
    return table;
}

RewardFn table_reward(const std::unordered_map<SubsetState, double, SubsetStateHash>& table) {
    return [&table](const SubsetState& x) { return table.at(x); };
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    const double scale = std::max(numeric.norm(), std::numeric_limits<double>::min());
    return (analytic - numeric).norm() / scale;
}

Eigen::VectorXd flatten(const NetworkParams& p) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(p.parameter_count()));
    Eigen::Index o = 0;
    for (const auto& layer : p.layers) {
        out.segment(o, layer.weight.size()) = layer.weight.reshaped();
        o += layer.weight.size();
        out.segment(o, layer.bias.size()) = layer.bias;
        o += layer.bias.size();
    }
    return out;
}

double* parameter_at(NetworkParams& p, Eigen::Index index) {
    for (auto& layer : p.layers) {
        if (index < layer.weight.size()) return layer.weight.data() + index;
        index -= layer.weight.size();
        if (index < layer.bias.size()) return layer.bias.data() + index;
        index -= layer.bias.size();
    }
    return nullptr;
}

double mlp_gradient_error(std::uint64_t seed) {
    NetworkConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_widths = {6, 4};
    cfg.output_dim = 3;
    cfg.fourier_std = 1.0;
    cfg.seed = seed;
    NetworkParams net = init_network(cfg);
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(5, 2);
    Eigen::MatrixXd w(3, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    // Random biases so the ReLU kinks are not all at zero.
    for (auto& layer : net.layers) {
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.3 * normal(rng);
    }
    auto loss = [&](const NetworkParams& p) { return (forward_batch(p, x).cwiseProduct(w)).sum(); };
    ForwardTape tape;
    forward_batch(net, x, &tape);
    const Eigen::VectorXd analytic = flatten(backward(net, tape, w));
    Eigen::VectorXd numeric(analytic.size());
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        double* p = parameter_at(net, i);
        const double orig = *p;
        *p = orig + kFdStep;
        const double up = loss(net);
        *p = orig - kFdStep;
        const double down = loss(net);
        *p = orig;
        numeric(i) = (up - down) / (2.0 * kFdStep);
    }
    return relative_error(analytic, numeric);
}

double relaxed_gradient_error(std::uint64_t seed) {
    const LinearInstance inst = gen_instance(6, 3, seed);
    std::mt19937_64 rng(seed + 7);
    std::uniform_real_distribution<double> u(0.2, 0.9);
    Eigen::VectorXd x(6);
    for (Eigen::Index i = 0; i < 6; ++i) x(i) = u(rng);
    const double eps = 1e-12;
    const Eigen::VectorXd analytic = relaxed_gradient(inst, x, eps);
    Eigen::VectorXd numeric(6);
    for (Eigen::Index i = 0; i < 6; ++i) {
        Eigen::VectorXd up = x;
        Eigen::VectorXd down = x;
        up(i) += kFdStep;
        down(i) -= kFdStep;
        numeric(i) = (relaxed_objective(inst, up, eps) - relaxed_objective(inst, down, eps)) / (2.0 * kFdStep);
    }
    return relative_error(analytic, numeric);
}

Beamformer random_complex(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Beamformer b{Eigen::MatrixXcd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))};
    for (Eigen::Index i = 0; i < b.F.size(); ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        b.F.data()[i] = {re, im};
    }
    return b;
}

SelectionMatrix random_selection(std::size_t nt, std::size_t ns, std::mt19937_64& rng) {
    std::vector<std::size_t> perm(nt);
    for (std::size_t i = 0; i < nt; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(ns);
    std::sort(perm.begin(), perm.end());
    return SelectionMatrix{nt, perm};
}

double wirtinger_gradient_error(std::uint64_t seed) {
    IsacDims dims{6, 5, 3, 7};
    const IsacInstance inst = gen_channel(dims, seed);
    std::mt19937_64 rng(seed + 11);
    const SelectionMatrix S = random_selection(dims.nt, dims.ns, rng);
    const Beamformer F = random_complex(dims.nt, dims.ns, rng);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const double beta = u(rng);
    const double c_scale = 10.0;
    const Eigen::MatrixXcd w = weighted_objective_wirtinger(S, F, beta, 1.0 - beta, inst, c_scale);
    const Eigen::Index count = F.F.size();
    Eigen::VectorXd analytic(2 * count);
    Eigen::VectorXd numeric(2 * count);
    auto f = [&](const Beamformer& b) { return weighted_objective(S, b, beta, 1.0 - beta, inst, c_scale); };
    for (Eigen::Index i = 0; i < count; ++i) {
        // Real gradient over (Re, Im) is twice the conjugate derivative.
        analytic(2 * i) = 2.0 * w.data()[i].real();
        analytic(2 * i + 1) = 2.0 * w.data()[i].imag();
        for (int part = 0; part < 2; ++part) {
            const std::complex<double> h = part == 0 ? std::complex<double>(kFdStep, 0) : std::complex<double>(0, kFdStep);
            Beamformer up = F;
            Beamformer down = F;
            up.F.data()[i] += h;
            down.F.data()[i] -= h;
            numeric(2 * i + part) = (f(up) - f(down)) / (2.0 * kFdStep);
        }
    }
    return relative_error(analytic, numeric);
}

double flow_checks(std::uint64_t seed, bool corrupt, double& root_error, double& fm_max) {
    double balance_max = 0.0;
    root_error = 0.0;
    fm_max = 0.0;
    bool corrupted = false;
    for (std::size_t m = 2; m <= 8; ++m) {
        for (std::size_t k = 1; k < m; ++k) {
            const MdpSpec spec(m, k);
            const auto rewards = random_rewards(spec, seed + 100 * m + k);
            const RewardFn reward = table_reward(rewards);
            ExactFlows flows = exact_flow_dp(spec, reward);

            double total = 0.0;
            for (const auto& [x, r] : rewards) total += r;
            root_error = std::max(root_error, std::abs(flows.root_flow - total) / total);

            const TabularFlows source(flows);
            for (const auto& s : enumerate_states(spec)) {
                if (s.ones() == 0) continue;
                const double r = is_terminal(s, spec) ? reward(s) : 0.0;
                fm_max = std::max(fm_max, fm_loss(source, s, r));
            }

            if (corrupt && !corrupted && m == 4 && k == 2) {
                const SubsetState s = SubsetState::from_string("1000");
                flows.edge_flow.at(s)(1) *= 1.5;
                corrupted = true;
            }
            for (const auto& s : enumerate_states(spec)) {
                const double r = is_terminal(s, spec) ? reward(s) : 0.0;
                balance_max = std::max(balance_max, flow_balance_residual(flows, s, r));
            }
        }
    }
    return balance_max;
}

} // namespace

std::vector<OracleCheck> run_oracle_suite(const OracleSuiteOptions& options) {
    std::vector<OracleCheck> report;
    const std::uint64_t seed = options.seed;

    double root_error = 0.0;
    double fm_max = 0.0;
    const double balance = flow_checks(seed, options.corrupt_flow, root_error, fm_max);
    report.push_back(make_check("exact_flow_balance", balance, Comparison::Less, 1e-12));
    report.push_back(make_check("exact_flow_root_sum", root_error, Comparison::Less, 1e-12));
    report.push_back(make_check("fm_loss_on_exact_flows", fm_max, Comparison::Less, 1e-18));

    {
        const MdpSpec spec(4, 2);
        const auto rewards = random_rewards(spec, seed + 4242);
        const RewardFn reward = table_reward(rewards);
        const ExactFlows flows = exact_flow_dp(spec, reward);
        const TabularFlows source(flows);
        const auto terminals = enumerate_terminals(spec);

        const auto law = terminal_distribution(source);
        double law_error = 0.0;
        for (std::size_t i = 0; i < terminals.size(); ++i) {
            law_error = std::max(law_error, std::abs(law[i] - rewards.at(terminals[i]) / flows.root_flow));
        }
        report.push_back(make_check("exact_policy_terminal_law", law_error, Comparison::Less, 1e-12));

        std::mt19937_64 rng(seed + 99);
        std::unordered_map<SubsetState, std::size_t, SubsetStateHash> counts;
        for (std::size_t i = 0; i < options.sampling_rollouts; ++i) ++counts[sample_terminal(source, rng)];
        double worst = 0.0;
        const auto n = static_cast<double>(options.sampling_rollouts);
        for (const auto& x : terminals) {
            const double p = rewards.at(x) / flows.root_flow;
            const double se = std::sqrt(p * (1.0 - p) / n);
            worst = std::max(worst, std::abs(static_cast<double>(counts[x]) / n - p) / se);
        }
        report.push_back(make_check("proportional_sampling_max_z", worst, Comparison::Less, 3.0));

        double tb_max = 0.0;
        for (std::size_t a = 0; a < 4; ++a) {
            for (std::size_t b = 0; b < 4; ++b) {
                if (a == b) continue;
                const Trajectory tau = make_trajectory(spec, {Action{a}, Action{b}});
                tb_max = std::max(tb_max, tb_loss(exact_tb_terms(flows, tau, reward(tau.terminal()))));
            }
        }
        report.push_back(make_check("tb_loss_on_exact_flows", tb_max, Comparison::Less, 1e-18));
    }

    {
        const double eps = 1e-12;
        double worst_ratio = std::numeric_limits<double>::infinity();
        double nested_violations = 0.0;
        for (std::uint64_t i = 0; i < 20; ++i) {
            const LinearInstance inst = gen_instance(12, 3, seed + 500 + i);
            const auto sequence = greedy_sequence(inst, 4);
            const double greedy = normalized_shifted_logdet(inst, SubsetState::from_indices(12, sequence), eps);
            const auto brute = brute_force_best(
                MdpSpec(12, 4), [&](const SubsetState& x) { return normalized_shifted_logdet(inst, x, eps); });
            worst_ratio = std::min(worst_ratio, greedy / brute.value);
            for (std::size_t k = 1; k < 4; ++k) {
                const auto shorter = greedy_sequence(inst, k);
                if (!std::equal(shorter.begin(), shorter.end(), sequence.begin())) nested_violations += 1.0;
            }
        }
        report.push_back(make_check("greedy_guarantee_min_ratio", worst_ratio, Comparison::GreaterEqual,
                                    1.0 - std::exp(-1.0)));
        report.push_back(make_check("greedy_nestedness_violations", nested_violations, Comparison::LessEqual, 0.0));
    }

    {
        std::mt19937_64 rng(seed + 31);
        std::normal_distribution<double> normal(0.0, 2.0);
        double feasibility = 0.0;
        double closer = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::Index m = 6;
            const std::size_t k = 1 + static_cast<std::size_t>(trial % 5);
            Eigen::VectorXd v(m);
            for (Eigen::Index i = 0; i < m; ++i) v(i) = normal(rng);
            const Eigen::VectorXd p = project_capped_simplex(v, static_cast<double>(k));
            feasibility = std::max({feasibility, std::abs(p.sum() - static_cast<double>(k)), -p.minCoeff(),
                                    p.maxCoeff() - 1.0});
            const double dist = (p - v).norm();
            // Random feasible points: convex mixtures of random k-hot vertices.
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<std::size_t> perm(static_cast<std::size_t>(m));
            for (int sample = 0; sample < 10000; ++sample) {
                Eigen::VectorXd q = Eigen::VectorXd::Zero(m);
                double weight_left = 1.0;
                for (int vertex = 0; vertex < 3; ++vertex) {
                    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
                    std::shuffle(perm.begin(), perm.end(), rng);
                    const double w = vertex == 2 ? weight_left : weight_left * u(rng);
                    weight_left -= w;
                    for (std::size_t i = 0; i < k; ++i) q(static_cast<Eigen::Index>(perm[i])) += w;
                }
                if ((q - v).norm() < dist - 1e-12) closer += 1.0;
            }
        }
        report.push_back(make_check("capped_simplex_feasibility", feasibility, Comparison::LessEqual, 1e-10));
        report.push_back(make_check("capped_simplex_closer_points", closer, Comparison::LessEqual, 0.0));
    }

    {
        double margin = std::numeric_limits<double>::infinity();
        double mismatches = 0.0;
        for (std::uint64_t i = 0; i < 5; ++i) {
            const LinearInstance inst = gen_instance(6, 2, seed + 700 + i);
            const auto brute = brute_force_best(MdpSpec(6, 2), [&](const SubsetState& x) {
                return subset_det(inst, x) > 0.0 ? logdet_objective(inst, x) : -std::numeric_limits<double>::infinity();
            });
            const RelaxedResult relaxed = relaxed_logdet_solve(inst, 2, 2000, 0.05);
            margin = std::min(margin, relaxed.objective - brute.value);

            const LinearInstance big = gen_instance(8, 3, seed + 800 + i);
            const auto by_det = brute_force_best(MdpSpec(8, 3), [&](const SubsetState& x) { return subset_det(big, x); });
            const auto by_reward = brute_force_best(
                MdpSpec(8, 3), [&](const SubsetState& x) { return sigmoid_reward(subset_det(big, x), {1.0, 0.1}); });
            if (!(by_det.best == by_reward.best)) mismatches += 1.0;
        }
        report.push_back(make_check("relaxation_upper_bound_margin", margin, Comparison::GreaterEqual, 0.0));
        report.push_back(make_check("det_reward_argmax_mismatches", mismatches, Comparison::LessEqual, 0.0));
    }

    {
        double mlp = 0.0;
        double relaxed = 0.0;
        double wirtinger = 0.0;
        for (std::uint64_t i = 0; i < 10; ++i) {
            mlp = std::max(mlp, mlp_gradient_error(seed + 900 + i));
            relaxed = std::max(relaxed, relaxed_gradient_error(seed + 950 + i));
            wirtinger = std::max(wirtinger, wirtinger_gradient_error(seed + 990 + i));
        }
        report.push_back(make_check("mlp_gradient_rel_error", mlp, Comparison::Less, 1e-4));
        report.push_back(make_check("relaxed_gradient_rel_error", relaxed, Comparison::Less, 1e-4));
        report.push_back(make_check("wirtinger_gradient_rel_error", wirtinger, Comparison::Less, 1e-4));
    }

    {
        const IsacDims dims{80, 80, 10, 100};
        const IsacInstance inst = gen_channel(dims, seed + 1234);
        std::vector<std::size_t> rows(10);
        for (std::size_t i = 0; i < 10; ++i) rows[i] = 3 * i;
        const SelectionMatrix S{80, rows};
        Beamformer F{Eigen::MatrixXcd::Zero(80, 10)};
        for (std::size_t i = 0; i < 10; ++i) F.F(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(i)) = 1.0;
        report.push_back(make_check("crb_identity_gram_error", std::abs(crb(S, F, inst) - 8.0), Comparison::LessEqual,
                                    1e-12));

        double worst = std::abs(comm_rate(S, Beamformer{Eigen::MatrixXcd::Zero(80, 10)}, inst));
        std::mt19937_64 rng(seed + 77);
        for (int trial = 0; trial < 5; ++trial) {
            const SelectionMatrix Sr = random_selection(80, 10, rng);
            const Beamformer G = random_complex(80, 10, rng);
            const double c0 = crb(Sr, G, inst);
            const double r0 = comm_rate(Sr, G, inst);

            Beamformer other = random_complex(80, 10, rng);
            for (std::size_t r : Sr.rows) other.F.row(static_cast<Eigen::Index>(r)) = G.F.row(static_cast<Eigen::Index>(r));
            worst = std::max({worst, std::abs(crb(Sr, other, inst) - c0) / c0,
                              std::abs(comm_rate(Sr, other, inst) - r0) / r0});

            const Beamformer Z = random_complex(10, 10, rng);
            const Eigen::MatrixXcd U = Eigen::HouseholderQR<Eigen::MatrixXcd>(Z.F).householderQ();
            const Beamformer rotated{G.F * U};
            worst = std::max({worst, std::abs(crb(Sr, rotated, inst) - c0) / c0,
                              std::abs(comm_rate(Sr, rotated, inst) - r0) / r0});
        }
        report.push_back(make_check("isac_invariance_error", worst, Comparison::LessEqual, 1e-10));
    }
    return report;
}

bool all_passed(const std::vector<OracleCheck>& report) {
    return std::all_of(report.begin(), report.end(), [](const OracleCheck& c) { return c.passed; });
}

void write_oracle_report(const std::vector<OracleCheck>& report, std::ostream& out) {
    out << "check,measured,comparison,threshold,status\n";
    for (const auto& c : report) {
        out << c.name << ',' << format_number(c.measured) << ',' << symbol(c.comparison) << ','
            << format_number(c.threshold) << ',' << (c.passed ? "pass" : "FAIL") << '\n';
    }
}

} // namespace gflowss
