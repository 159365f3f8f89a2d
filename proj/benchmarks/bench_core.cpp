#include <gflowss/baselines.hpp>
#include <gflowss/flow_matching.hpp>
#include <gflowss/fourier_mlp.hpp>
#include <gflowss/oracles.hpp>
#include <gflowss/reward_isac.hpp>
#include <gflowss/reward_linear.hpp>
#include <gflowss/trajectory_balance.hpp>

#include <benchmark/benchmark.h>

using namespace gflowss;

namespace {

NetworkConfig net(std::size_t m) {
    NetworkConfig cfg;
    cfg.input_dim = m;
    cfg.output_dim = m;
    cfg.seed = 1;
    return cfg;
}

void BM_MlpForward(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto p = init_network(net(m));
    const Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(m));
    for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
}
BENCHMARK(BM_MlpForward)->Arg(30)->Arg(100);

void BM_MlpBackward(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto p = init_network(net(m));
    const Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(m));
    const Eigen::VectorXd g = Eigen::VectorXd::Random(static_cast<Eigen::Index>(m));
    for (auto _ : state) benchmark::DoNotOptimize(backward(p, x, g));
}
BENCHMARK(BM_MlpBackward)->Arg(30)->Arg(100);

void BM_AdamStep(benchmark::State& state) {
    auto p = init_network(net(30));
    const auto g = backward(p, Eigen::VectorXd::Random(30), Eigen::VectorXd::Random(30));
    auto st = AdamState::for_params(p, 1e-4);
    for (auto _ : state) adam_step(p, g, st);
}
BENCHMARK(BM_AdamStep);

void BM_FmLossAndGrad(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const MdpSpec spec(30, 10);
    FmTrainConfig cfg;
    const auto model = FlowModel::create(spec, cfg.network_config(spec));
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < k; ++i) idx.push_back(3 * i);
    const auto s = SubsetState::from_indices(30, idx);
    for (auto _ : state) benchmark::DoNotOptimize(fm_loss_and_grad(model, s, 500.0));
}
BENCHMARK(BM_FmLossAndGrad)->Arg(2)->Arg(6)->Arg(10);

void BM_FmEpisode(benchmark::State& state) {
    const MdpSpec spec(30, 6);
    const auto inst = gen_instance(30, 5, 1);
    FmTrainConfig cfg;
    cfg.episodes = 1;
    for (auto _ : state) {
        cfg.seed++;
        benchmark::DoNotOptimize(
            train_gflow_ss(spec, [&](const SubsetState& x) { return sigmoid_reward(subset_det(inst, x)); }, cfg));
    }
}
BENCHMARK(BM_FmEpisode)->Unit(benchmark::kMillisecond);

void BM_TbLossAndGrad(benchmark::State& state) {
    const MdpSpec spec(12, 4);
    TbTrainConfig cfg;
    const auto model = make_tb_model(spec, cfg);
    const auto tau = make_trajectory(spec, {{1}, {5}, {7}, {10}});
    for (auto _ : state) benchmark::DoNotOptimize(tb_loss_and_grad(model, tau, 1.0, Preference(0.5)));
}
BENCHMARK(BM_TbLossAndGrad);

void BM_SubsetDet(benchmark::State& state) {
    const auto inst = gen_instance(100, 5, 1);
    const auto x = SubsetState::from_indices(100, {1, 8, 20, 33, 41, 57, 60, 72, 85, 99});
    for (auto _ : state) benchmark::DoNotOptimize(subset_det(inst, x));
}
BENCHMARK(BM_SubsetDet);

void BM_WirtingerAscent(benchmark::State& state) {
    IsacDims d;
    d.nt = static_cast<std::size_t>(state.range(0));
    d.nr = d.nt;
    d.ns = static_cast<std::size_t>(state.range(1));
    d.L = 100;
    const auto inst = gen_channel(d, 1);
    SelectionMatrix S{d.nt, {}};
    for (std::size_t i = 0; i < d.ns; ++i) S.rows.push_back(2 * i);
    IsacRewardConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(wirtinger_ascent(S, inst, Preference(0.5), cfg, 3));
}
BENCHMARK(BM_WirtingerAscent)->Args({12, 4})->Args({80, 10})->Unit(benchmark::kMicrosecond);

void BM_GreedySelect(benchmark::State& state) {
    const auto inst = gen_instance(100, 5, 1);
    for (auto _ : state) benchmark::DoNotOptimize(greedy_select(inst, 10));
}
BENCHMARK(BM_GreedySelect);

void BM_RelaxedSolve(benchmark::State& state) {
    const auto inst = gen_instance(30, 5, 1);
    for (auto _ : state) benchmark::DoNotOptimize(relaxed_logdet_solve(inst, 8, 200, 0.05));
}
BENCHMARK(BM_RelaxedSolve)->Unit(benchmark::kMillisecond);

void BM_ExactFlowDp(benchmark::State& state) {
    const auto inst = gen_instance(14, 3, 1);
    const MdpSpec spec(14, 5);
    for (auto _ : state)
        benchmark::DoNotOptimize(exact_flow_dp(spec, [&](const SubsetState& x) { return sigmoid_reward(subset_det(inst, x)); }));
}
BENCHMARK(BM_ExactFlowDp)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
