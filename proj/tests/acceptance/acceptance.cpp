// Acceptance driver: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: gflowss_acceptance [--cli <gflowss>] [--work <dir>] [AC...]

#include <gflowss/baselines.hpp>
#include <gflowss/experiment.hpp>
#include <gflowss/flow_matching.hpp>
#include <gflowss/fourier_mlp.hpp>
#include <gflowss/oracles.hpp>
#include <gflowss/reward_isac.hpp>
#include <gflowss/reward_linear.hpp>
#include <gflowss/trajectory_balance.hpp>

#include "test_oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace gflowss;
namespace fs = std::filesystem;
namespace t = gflowss::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    double budget_s;
    std::function<Outcome()> run;
};

fs::path g_cli;
fs::path g_work;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Terminal index lookup by mask string.
std::map<std::string, std::size_t> terminal_index(const MdpSpec& spec) {
    std::map<std::string, std::size_t> idx;
    const auto all = t::k_subsets(spec.m, spec.k);
    for (std::size_t i = 0; i < all.size(); ++i) idx[t::bits_of(spec.m, all[i])] = i;
    return idx;
}

// Independent sampler over any log-flow table: softmax over legal slots.
std::size_t sample_index(const LogFlowSource& src, const std::map<std::string, std::size_t>& idx, std::mt19937_64& rng) {
    const auto& spec = src.spec();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto s = root(spec);
    while (s.ones() < spec.k) {
        const Eigen::VectorXd lf = src.log_edge_flows(s);
        double peak = -INFINITY;
        for (std::size_t a = 0; a < spec.m; ++a)
            if (!s.test(a)) peak = std::max(peak, lf(static_cast<Eigen::Index>(a)));
        std::vector<double> w(spec.m, 0.0);
        double z = 0.0;
        for (std::size_t a = 0; a < spec.m; ++a)
            if (!s.test(a)) z += (w[a] = std::exp(lf(static_cast<Eigen::Index>(a)) - peak));
        double u = unit(rng) * z;
        std::size_t pick = spec.m;
        for (std::size_t a = 0; a < spec.m; ++a) {
            if (w[a] == 0.0) continue;
            pick = a;
            if (u < w[a]) break;
            u -= w[a];
        }
        s = apply_action(s, {pick}, spec);
    }
    return idx.at(s.to_string());
}

std::vector<double> empirical_law(const LogFlowSource& src, std::size_t draws, std::uint64_t seed) {
    const auto idx = terminal_index(src.spec());
    std::vector<double> counts(idx.size(), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < draws; ++i) counts[sample_index(src, idx, rng)] += 1.0;
    for (double& c : counts) c /= static_cast<double>(draws);
    return counts;
}

// Reward table for a criterion-specific positive reward.
std::vector<double> seeded_rewards(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.1, 10.0);
    std::vector<double> r(count);
    for (double& v : r) v = unit(rng);
    return r;
}

RewardFn table_fn(const MdpSpec& spec, const std::vector<double>& r) {
    auto idx = std::make_shared<std::map<std::string, std::size_t>>(terminal_index(spec));
    return [idx, &r](const SubsetState& x) { return r[idx->at(x.to_string())]; };
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    double worst_balance = 0.0, worst_root = 0.0, worst_fm = 0.0;
    std::size_t mdps = 0, nodes = 0;
    for (std::size_t m = 2; m <= 8; ++m) {
        for (std::size_t k = 1; k < m; ++k) {
            const MdpSpec spec(m, k);
            const auto r = seeded_rewards(binomial(m, k), 100 * m + k);
            const auto reward = table_fn(spec, r);
            const auto flows = exact_flow_dp(spec, reward);
            double total = 0.0;
            for (double v : r) total += v;
            worst_root = std::max(worst_root, std::abs(flows.root_flow - total) / total);
            TabularFlows src(flows);
            // Balance from the tables: in-flow over parent edges, out-flow over legal child edges.
            for (std::size_t level = 0; level <= k; ++level) {
                for (const auto& idx : t::k_subsets(m, level)) {
                    const auto s = SubsetState::from_indices(m, idx);
                    double in = level == 0 ? flows.root_flow : 0.0;
                    for (auto i : idx) {
                        auto p = idx;
                        p.erase(std::find(p.begin(), p.end(), i));
                        in += flows.edge_flow.at(SubsetState::from_indices(m, p))(static_cast<Eigen::Index>(i));
                    }
                    double out = 0.0;
                    if (level < k) {
                        for (std::size_t a = 0; a < m; ++a)
                            if (!s.test(a)) out += flows.edge_flow.at(s)(static_cast<Eigen::Index>(a));
                    }
                    const double rew = level == k ? reward(s) : 0.0;
                    worst_balance = std::max(worst_balance, std::abs(in - rew - out) / std::max(in, rew + out));
                    if (level > 0) worst_fm = std::max(worst_fm, fm_loss(src, s, rew));
                    ++nodes;
                }
            }
            ++mdps;
        }
    }
    const bool pass = worst_balance < 1e-12 && worst_root < 1e-12 && worst_fm < 1e-18;
    return {pass, std::to_string(mdps) + " MDPs, " + std::to_string(nodes) + " nodes; max balance residual " +
                      fmt(worst_balance) + ", root vs sum R rel " + fmt(worst_root) + ", max fm_loss " + fmt(worst_fm)};
}

Outcome ac2() {
    const MdpSpec spec(4, 2);
    const auto r = seeded_rewards(6, 2024);
    const auto flows = exact_flow_dp(spec, table_fn(spec, r));
    const auto idx = terminal_index(spec);
    // pi(a|s) = edge_flow / state_flow straight from the DP tables.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t draws = 1'000'000;
    std::vector<double> counts(6, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
        auto s = root(spec);
        while (s.ones() < spec.k) {
            double u = unit(rng) * flows.state(s);
            std::size_t pick = 0;
            for (std::size_t a = 0; a < 4; ++a) {
                if (s.test(a)) continue;
                pick = a;
                const double e = flows.edge(s, {a});
                if (u < e) break;
                u -= e;
            }
            s = apply_action(s, {pick}, spec);
        }
        counts[idx.at(s.to_string())] += 1.0;
    }
    const auto p = t::normalized(r);
    double worst = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        const double se = std::sqrt(p[i] * (1.0 - p[i]) / static_cast<double>(draws));
        worst = std::max(worst, std::abs(counts[i] / static_cast<double>(draws) - p[i]) / se);
    }
    return {worst < 3.0, "max |freq - R/Z| = " + fmt(worst) + " standard errors over 6 terminals, 1e6 rollouts"};
}

FmTrainConfig ac3_config(std::uint64_t seed) {
    FmTrainConfig cfg;
    cfg.episodes = 20000;
    cfg.zeta = 1.0;
    cfg.eta = 1e-3;
    cfg.seed = seed;
    return cfg;
}

Outcome ac3() {
    const MdpSpec spec(8, 3);
    const auto inst = gen_instance(8, 3, 7);
    const double c = 1.0;
    // Brute-force R/Z with a cofactor determinant and a hand-written sigmoid.
    std::vector<double> target;
    for (const auto& idx : t::k_subsets(8, 3)) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
        for (auto i : idx) {
            const Eigen::VectorXd a = inst.vectors.row(static_cast<Eigen::Index>(i)).transpose();
            m += a * a.transpose();
        }
        target.push_back(c / (1.0 + std::exp(-t::cofactor_det(m))));
    }
    target = t::normalized(target);
    RewardConfig rc;
    rc.c = c;
    const auto trained = train_gflow_ss(
        spec, [&](const SubsetState& x) { return sigmoid_reward(subset_det(inst, x), rc); }, ac3_config(7));
    const double tv = t::total_variation(empirical_law(trained.model, 100000, 1), target);

    const MdpSpec uspec(6, 2);
    const auto uniform = train_gflow_ss(uspec, [](const SubsetState&) { return 1.0; }, ac3_config(6));
    const double tvu = t::total_variation(empirical_law(uniform.model, 100000, 2), std::vector<double>(15, 1.0 / 15.0));
    return {tv < 0.1 && tvu < 0.05,
            "TV to R/Z (m=8,k=3) " + fmt(tv) + " < 0.1; uniform control (m=6,k=2) TV " + fmt(tvu) + " < 0.05"};
}

Outcome ac4() {
    const auto cfg = preset(ExperimentId::Fig2, true);
    const auto out = run_fig2(cfg, worker_count());
    if (out.rows.size() != cfg.seeds.size() * cfg.k.size() * 3) return {false, "unexpected row count"};

    // Log-dets recomputed from the recorded selections with a cofactor determinant.
    std::map<std::pair<std::size_t, Method>, std::vector<double>> by_k;
    std::map<std::pair<std::uint64_t, std::size_t>, double> best_binary;
    double worst_recompute = 0.0;
    for (const auto& sel : out.selections) {
        const auto inst = gen_instance(cfg.m, cfg.n, sel.seed);
        const double ld = std::log(t::cofactor_det(outer_product_sum(inst, sel.subset)));
        const auto row = std::find_if(out.rows.begin(), out.rows.end(), [&](const ResultRow& r) {
            return r.seed == sel.seed && r.k == sel.k && r.method == sel.method;
        });
        worst_recompute = std::max(worst_recompute, std::abs(row->value - ld));
        by_k[{sel.k, sel.method}].push_back(ld);
        auto& b = best_binary.try_emplace({sel.seed, sel.k}, -INFINITY).first->second;
        b = std::max(b, ld);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    std::size_t wins = 0;
    std::string means;
    for (std::size_t k : cfg.k) {
        const double g = mean(by_k[{k, Method::GflowSs}]);
        const double gr = mean(by_k[{k, Method::GreedySs}]);
        wins += g >= gr;
        means += " k=" + std::to_string(k) + ": " + fmt(g) + " vs " + fmt(gr) + ";";
    }
    std::size_t bounded = 0;
    double min_margin = INFINITY;
    for (const auto& [key, best] : best_binary) {
        const auto inst = gen_instance(cfg.m, cfg.n, key.first);
        const auto relaxed =
            relaxed_logdet_solve(inst, key.second, cfg.relaxed.iters, cfg.relaxed.step, cfg.relaxed.epsilon);
        min_margin = std::min(min_margin, relaxed.objective - best);
        bounded += relaxed.objective >= best;
    }
    const bool pass = wins >= 2 && bounded == best_binary.size() && worst_recompute < 1e-9;
    return {pass, "GFLOW-SS mean >= GREEDY-SS mean in " + std::to_string(wins) + "/3 k (" + means +
                      ") relaxed bound holds on " + std::to_string(bounded) + "/" + std::to_string(best_binary.size()) +
                      " cells, min margin " + fmt(min_margin)};
}

Outcome ac5() {
    const double eps = 1e-12;
    const double ratio = 1.0 - std::exp(-1.0);
    // f(S) = ln det(sum_S a a^T + eps I) - n ln eps, by cofactor expansion.
    auto f = [&](const LinearInstance& inst, const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd m = eps * Eigen::MatrixXd::Identity(3, 3);
        for (auto i : idx) {
            const Eigen::VectorXd a = inst.vectors.row(static_cast<Eigen::Index>(i)).transpose();
            m += a * a.transpose();
        }
        return std::log(t::cofactor_det(m)) - 3.0 * std::log(eps);
    };
    double worst = INFINITY;
    std::size_t ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto inst = gen_instance(12, 3, seed);
        double best = -INFINITY;
        for (const auto& idx : t::k_subsets(12, 4)) best = std::max(best, f(inst, idx));
        const double g = f(inst, greedy_select(inst, 4).indices());
        worst = std::min(worst, g / best);
        ok += g >= ratio * best;
    }
    return {ok == 20, std::to_string(ok) + "/20 instances meet the bound; min greedy/optimum " + fmt(worst) +
                          " vs 1-1/e = " + fmt(ratio)};
}

double vec_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& fd) { return (a - fd).norm() / fd.norm(); }

Outcome ac6() {
    const double h = 1e-5;
    double mlp = 0.0, relaxed = 0.0, wir = 0.0;
    std::mt19937_64 rng(606);
    for (int c = 0; c < 10; ++c) {
        NetworkConfig nc;
        nc.input_dim = 3 + rng() % 5;
        nc.hidden_widths = {4 + rng() % 8, 4 + rng() % 8};
        nc.output_dim = 1 + rng() % 4;
        nc.fourier_std = 1.0;
        nc.seed = rng();
        auto p = init_network(nc);
        for (auto& l : p.layers) l.bias.setRandom();
        const Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(nc.input_dim));
        const Eigen::VectorXd w = Eigen::VectorXd::Random(static_cast<Eigen::Index>(nc.output_dim));
        const auto g = backward(p, x, w);
        const std::vector<double> xs(x.data(), x.data() + x.size());
        auto f = [&] {
            const auto y = t::naive_forward(p, xs);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += w(static_cast<Eigen::Index>(i)) * y[i];
            return s;
        };
        std::vector<double> an, fd;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& W = p.layers[l].weight;
            for (Eigen::Index i = 0; i < W.size(); ++i) {
                an.push_back(g.layers[l].weight.data()[i]);
                fd.push_back(t::central_diff(W.data()[i], f, h));
            }
            auto& b = p.layers[l].bias;
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                an.push_back(g.layers[l].bias(i));
                fd.push_back(t::central_diff(b(i), f, h));
            }
        }
        mlp = std::max(mlp, vec_rel(Eigen::Map<Eigen::VectorXd>(an.data(), static_cast<Eigen::Index>(an.size())),
                                    Eigen::Map<Eigen::VectorXd>(fd.data(), static_cast<Eigen::Index>(fd.size()))));

        const auto inst = gen_instance(10, 3, rng());
        Eigen::VectorXd xr = (Eigen::VectorXd::Random(10).array() * 0.4 + 0.5).matrix();
        const Eigen::VectorXd gr = relaxed_gradient(inst, xr, 1e-12);
        Eigen::VectorXd fr(10);
        for (int i = 0; i < 10; ++i) fr(i) = t::central_diff(xr(i), [&] { return relaxed_objective(inst, xr, 1e-12); }, h);
        relaxed = std::max(relaxed, vec_rel(gr, fr));

        IsacDims d;
        d.nt = 8;
        d.nr = 6;
        d.ns = 3;
        d.L = 12;
        const auto ch = gen_channel(d, rng());
        std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7};
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(3);
        std::sort(rows.begin(), rows.end());
        const SelectionMatrix S{8, rows};
        Beamformer F = random_beamformer(d, rng());
        const Preference pref(0.05 + 0.09 * c);
        IsacRewardConfig rc;
        rc.c_scale = 2.0;
        const Eigen::MatrixXcd gw = dfrc_wirtinger_gradient(S, F, pref, ch, rc);
        Eigen::VectorXd an_w(2 * F.F.size()), fd_w(2 * F.F.size());
        for (Eigen::Index i = 0; i < F.F.size(); ++i) {
            for (int part = 0; part < 2; ++part) {
                const std::complex<double> step = part == 0 ? std::complex<double>(h, 0) : std::complex<double>(0, h);
                const auto saved = F.F.data()[i];
                F.F.data()[i] = saved + step;
                const double up = dfrc_objective(S, F, pref, ch, rc);
                F.F.data()[i] = saved - step;
                const double down = dfrc_objective(S, F, pref, ch, rc);
                F.F.data()[i] = saved;
                fd_w(2 * i + part) = (up - down) / (2 * h);
                an_w(2 * i + part) = 2.0 * (part == 0 ? gw.data()[i].real() : gw.data()[i].imag());
            }
        }
        wir = std::max(wir, vec_rel(an_w, fd_w));
    }
    return {mlp < 1e-4 && relaxed < 1e-4 && wir < 1e-4, "max relative error over 10 cases: backprop " + fmt(mlp) +
                                                            ", relaxed " + fmt(relaxed) + ", Wirtinger " + fmt(wir)};
}

Outcome ac7() {
    IsacDims d;
    d.nt = 80;
    d.nr = 80;
    d.ns = 10;
    d.L = 100;
    const auto inst = gen_channel(d, 1);
    Beamformer F{Eigen::MatrixXcd::Zero(80, 10)};
    F.F.topRows(10) = Eigen::MatrixXcd::Identity(10, 10);
    SelectionMatrix S{80, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
    const double c = crb(S, F, inst);
    const double r0 = comm_rate(S, Beamformer{Eigen::MatrixXcd::Zero(80, 10)}, inst);

    double worst = 0.0;
    std::mt19937_64 rng(707);
    for (int trial = 0; trial < 20; ++trial) {
        IsacDims dd;
        dd.nt = 10;
        dd.nr = 8;
        dd.ns = 4;
        dd.L = 16;
        const auto ch = gen_channel(dd, rng());
        std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(4);
        std::sort(rows.begin(), rows.end());
        const SelectionMatrix Sr{10, rows};
        const auto Fr = random_beamformer(dd, rng());
        const double c0 = crb(Sr, Fr, ch);
        const double q0 = comm_rate(Sr, Fr, ch);
        Beamformer G = Fr;
        for (Eigen::Index i = 0; i < 10; ++i)
            if (std::find(rows.begin(), rows.end(), static_cast<std::size_t>(i)) == rows.end())
                G.F.row(i) = 3.0 * random_beamformer(dd, rng()).F.row(i);
        std::normal_distribution<double> nd;
        Eigen::MatrixXcd a(4, 4);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {nd(rng), nd(rng)};
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
        const Eigen::MatrixXcd U = qr.householderQ();
        const Beamformer FU{Fr.F * U};
        for (double v : {crb(Sr, G, ch) / c0, crb(Sr, FU, ch) / c0}) worst = std::max(worst, std::abs(v - 1.0));
        for (double v : {comm_rate(Sr, G, ch) / q0, comm_rate(Sr, FU, ch) / q0})
            worst = std::max(worst, std::abs(v - 1.0));
    }
    const bool pass = std::abs(c - 8.0) <= 1e-12 && r0 == 0.0 && worst < 1e-10;
    return {pass, "crb(identity Gram) = " + fmt(c) + " (|err| " + fmt(std::abs(c - 8.0)) + "), rate(F=0) = " + fmt(r0) +
                      ", max invariance deviation " + fmt(worst)};
}

TbTrainConfig ac8_config() {
    TbTrainConfig cfg;
    cfg.episodes = 4000;
    cfg.eta = 1e-3;
    cfg.zeta = 0.05;
    cfg.seed = 15;
    return cfg;
}

Outcome ac8() {
    const MdpSpec spec(4, 2);
    const auto r = seeded_rewards(6, 88);
    const auto reward = table_fn(spec, r);
    const auto flows = exact_flow_dp(spec, reward);
    double worst = 0.0;
    std::size_t trajectories = 0;
    // Every ordered pair of distinct actions is one trajectory of m=4,k=2.
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            if (a == b) continue;
            const auto tau = make_trajectory(spec, {{a}, {b}});
            double delta = std::log(flows.root_flow) - std::log(reward(tau.terminal()));
            for (std::size_t s = 0; s < 2; ++s) {
                const double e = flows.edge(tau.states[s], tau.actions[s]);
                delta += std::log(e / flows.state(tau.states[s]));
                delta -= std::log(e / flows.state(tau.states[s + 1]));
            }
            worst = std::max(worst, delta * delta);
            worst = std::max(worst, tb_loss(exact_tb_terms(flows, tau, reward(tau.terminal()))));
            ++trajectories;
        }
    }
    const auto trained = train_mogflow_ss(MdpSpec(6, 2), [](const SubsetState&, double) { return 1.0; }, ac8_config());
    double worst_z = 0.0;
    std::string zs;
    for (double n : ac8_config().beta_dictionary) {
        const double lz = trained.model.log_z(Preference(n));
        worst_z = std::max(worst_z, std::abs(lz - std::log(15.0)));
        zs += " " + fmt(lz);
    }
    return {worst < 1e-18 && worst_z <= 0.3, std::to_string(trajectories) + " trajectories, max tb_loss " + fmt(worst) +
                                                 "; trained log Z per n:" + zs + " vs ln 15 = " + fmt(std::log(15.0))};
}

Outcome ac9() {
    const auto cfg = preset(ExperimentId::Fig67, true);
    const auto out = run_isac(cfg, worker_count());
    std::map<std::pair<std::uint64_t, double>, std::map<Method, std::map<Metric, double>>> v;
    for (const auto& r : out.rows) v[{r.seed, *r.n}][r.method][r.metric] = r.value;
    std::size_t tradeoff = 0, heldout_ok = 0, heldout_total = 0, distinct = 0;
    std::string notes;
    for (auto seed : cfg.seeds) {
        const auto& lo = v[{seed, 0.1}][Method::MogflowSs];
        const auto& hi = v[{seed, 0.9}][Method::MogflowSs];
        const bool ok = hi.at(Metric::Crb) <= lo.at(Metric::Crb) && lo.at(Metric::Rate) >= hi.at(Metric::Rate);
        tradeoff += ok;
        for (double n : {0.3, 0.7}) {
            ++heldout_total;
            const auto sel = std::find_if(out.selections.begin(), out.selections.end(),
                                          [&](const SelectionRow& s) { return s.seed == seed && s.n && *s.n == n; });
            const bool valid = sel != out.selections.end() && sel->subset.ones() == cfg.isac.ns &&
                               sel->subset.size() == cfg.isac.nt;
            const double reward = v[{seed, n}][Method::MogflowSs].at(Metric::Reward);
            const double median = v[{seed, n}][Method::RandomMedian].at(Metric::Reward);
            heldout_ok += valid && reward >= median;
        }
        std::set<std::string> sets;
        for (const auto& s : out.selections)
            if (s.seed == seed) sets.insert(s.subset.to_string());
        distinct += sets.size() >= 2;
        notes += " seed " + std::to_string(seed) + ": CRB " + fmt(lo.at(Metric::Crb)) + "->" + fmt(hi.at(Metric::Crb)) +
                 ", rate " + fmt(lo.at(Metric::Rate)) + "->" + fmt(hi.at(Metric::Rate)) + ";";
    }
    const bool pass = tradeoff >= 3 && heldout_ok == heldout_total;
    return {pass, "trade-off holds in " + std::to_string(tradeoff) + "/5 seeds, held-out >= random median " +
                      std::to_string(heldout_ok) + "/" + std::to_string(heldout_total) + ", seeds with >= 2 distinct sets " +
                      std::to_string(distinct) + "/5;" + notes};
}

// --- AC10: every CLI command twice, compare every CSV byte for byte --------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome ac10() {
    if (g_cli.empty()) return {false, "no --cli path given"};
    const fs::path root_dir = g_work / "ac10";
    fs::remove_all(root_dir);
    const std::string cli = "\"" + g_cli.string() + "\"";

    const std::string fig_cfg = R"({"experiment":"fig3","seeds":[1,2],"m":9,"n":3,"k":[3,4],)"
                                R"("fm":{"episodes":60,"hidden_widths":[16,16]},"relaxed":{"iters":100}})";
    const std::string isac_cfg = R"({"experiment":"fig67","seeds":[3],"isac":{"nt":6,"nr":6,"ns":2,"L":10},)"
                                 R"("isac_reward":{"n_wir":5},"calibration_subsets":2,)"
                                 R"("tb":{"episodes":40,"hidden_widths":[16,16]},"random_subsets":9})";

    std::vector<std::string> failures;
    std::size_t files = 0;
    for (int run = 0; run < 2; ++run) {
        const fs::path d = root_dir / ("run" + std::to_string(run));
        fs::create_directories(d);
        std::ofstream(d / "fig.json") << fig_cfg;
        std::ofstream(d / "isac.json") << isac_cfg;
        const std::string D = "\"" + d.string() + "\"/";
        const std::vector<std::string> cmds{
            cli + " gen-instance --kind linear --m 9 --n 3 --seed 5 --out " + D + "lin.json",
            cli + " gen-instance --kind isac --nt 6 --nr 6 --ns 2 --L 10 --seed 5 --out " + D + "isac_inst.json",
            cli + " train-fm --instance " + D + "lin.json --k 3 --episodes 50 --seed 2 --out " + D +
                "fm.json --loss-trace " + D + "fm_loss.csv",
            cli + " train-tb --instance " + D + "isac_inst.json --episodes 30 --n-wir 5 --seed 2 --out " + D +
                "tb.json --loss-trace " + D + "tb_loss.csv --log-z-trace " + D + "tb_logz.csv",
            cli + " rollout --model " + D + "fm.json --rank 2 --instance " + D + "lin.json --out " + D + "roll_fm.csv",
            cli + " rollout --model " + D + "fm.json --samples 200 --seed 4 --out " + D + "samples_fm.csv",
            cli + " rollout --model " + D + "tb.json --n 0.3 --instance " + D + "isac_inst.json --out " + D + "roll_tb.csv",
            cli + " baseline greedy --instance " + D + "lin.json --k 3 --out " + D + "greedy.csv",
            cli + " baseline relaxed --instance " + D + "lin.json --k 3 --iters 200 --out " + D + "relaxed.csv",
            cli + " oracle brute --instance " + D + "lin.json --k 3 --threads 2 --out " + D + "brute.csv",
            cli + " oracle flows --instance " + D + "lin.json --k 3 --out " + D + "flows.csv",
            cli + " oracle suite --rollouts 20000 --out " + D + "suite.csv",
            cli + " experiment fig3 --config " + D + "fig.json --out " + D + "fig3.csv",
            cli + " experiment isac --config " + D + "isac.json --out " + D + "isac.csv",
            cli + " aggregate " + D + "fig3.csv --out " + D + "fig3_agg.csv",
        };
        for (const auto& c : cmds) {
            if (sh(c) != 0 && run == 0) failures.push_back("command failed: " + c);
        }
    }
    for (const auto& entry : fs::directory_iterator(root_dir / "run0")) {
        const auto name = entry.path().filename().string();
        const bool is_csv = entry.path().extension() == ".csv";
        if (name.find(".timing.") != std::string::npos) continue; // wall-clock sidecar
        if (!is_csv && entry.path().extension() != ".json") continue;
        ++files;
        if (slurp(entry.path()) != slurp(root_dir / "run1" / name)) failures.push_back(name + " differs");
    }
    std::string detail = std::to_string(files) + " CSV/JSON outputs from 15 commands compared";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty() && files >= 20, detail};
}

} // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    g_work = fs::temp_directory_path() / "gflowss_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) g_cli = argv[++i];
        else if (a == "--work" && i + 1 < argc) g_work = argv[++i];
        else only.insert(a);
    }
    fs::create_directories(g_work);

    const std::vector<Criterion> criteria{
        {"AC1", 10, ac1},   {"AC2", 30, ac2},  {"AC3", 300, ac3}, {"AC4", 900, ac4},  {"AC5", 60, ac5},
        {"AC6", 60, ac6},   {"AC7", 10, ac7},  {"AC8", 300, ac8}, {"AC9", 1800, ac9}, {"AC10", 600, ac10},
    };
    bool all = true;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs < c.budget_s;
        const bool pass = o.pass && in_budget;
        all &= pass;
        std::cout << c.id << ' ' << (pass ? "PASS" : "FAIL") << " (" << fmt(secs) << " s, budget " << fmt(c.budget_s)
                  << " s" << (in_budget ? "" : ", over budget") << ") " << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
