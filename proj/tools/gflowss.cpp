#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>

#include "gflowss/baselines.hpp"
#include "gflowss/csv.hpp"
#include "gflowss/error.hpp"
#include "gflowss/experiment.hpp"
#include "gflowss/flow_matching.hpp"
#include "gflowss/oracle_suite.hpp"
#include "gflowss/oracles.hpp"
#include "gflowss/reward_isac.hpp"
#include "gflowss/reward_linear.hpp"
#include "gflowss/trajectory_balance.hpp"

namespace fs = std::filesystem;
using namespace gflowss;

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return nlohmann::json::parse(in);
}

std::string indices_text(const SubsetState& s) {
    std::string out;
    for (std::size_t i : s.indices()) {
        if (!out.empty()) out += ' ';
        out += std::to_string(i);
    }
    return out;
}

/// Writes to `path`, or stdout when the path is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
    } else {
        auto out = open_out(path);
        fn(out);
    }
}

void write_loss_trace(const std::vector<double>& trace, const std::string& path) {
    if (path.empty()) return;
    auto out = open_out(path);
    out << "step,value\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_number(trace[i]) << '\n';
}

struct LinearRewardOptions {
    double c = RewardConfig{}.c;
    double prescale = 1.0;

    RewardFn bind(const LinearInstance& inst) const {
        const RewardConfig cfg{c, prescale};
        cfg.validate();
        return [inst, cfg](const SubsetState& x) { return sigmoid_reward(subset_det(inst, x), cfg); };
    }
};

void add_reward_flags(CLI::App* cmd, LinearRewardOptions& r) {
    cmd->add_option("--c", r.c, "Reward scale c")->capture_default_str();
    cmd->add_option("--prescale", r.prescale, "Determinant multiplier inside the sigmoid")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GFlowNet sensor selection: training, baselines, oracles and experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "gflowss 0.1.0");

    // gen-instance
    auto* gen = app.add_subcommand("gen-instance", "Generate a seeded linear or ISAC instance");
    std::string kind = "linear";
    std::size_t gm = 30, gn = 5;
    IsacDims gdims;
    std::uint64_t gseed = 1;
    std::string gout;
    gen->add_option("--kind", kind, "linear or isac")->check(CLI::IsMember({"linear", "isac"}))->capture_default_str();
    gen->add_option("--m", gm, "Number of sensors (linear)")->capture_default_str();
    gen->add_option("--n", gn, "Estimand dimension (linear)")->capture_default_str();
    gen->add_option("--nt", gdims.nt, "Transmit antennas (isac)")->capture_default_str();
    gen->add_option("--nr", gdims.nr, "Receive antennas (isac)")->capture_default_str();
    gen->add_option("--ns", gdims.ns, "RF chains (isac)")->capture_default_str();
    gen->add_option("--L", gdims.L, "Block length (isac)")->capture_default_str();
    gen->add_option("--seed", gseed, "Instance seed")->capture_default_str();
    gen->add_option("--out", gout, "Output JSON path")->required();

    // train-fm
    auto* tfm = app.add_subcommand("train-fm", "Train GFLOW-SS (flow matching) on a linear instance");
    std::string fm_instance, fm_out, fm_trace, fm_config;
    std::size_t fm_k = 0;
    FmTrainConfig fm_cfg;
    LinearRewardOptions fm_reward;
    tfm->add_option("--instance", fm_instance, "Linear instance JSON")->required()->check(CLI::ExistingFile);
    tfm->add_option("--k", fm_k, "Subset size")->required();
    tfm->add_option("--config", fm_config, "Experiment config whose fm/reward sections seed the defaults")
        ->check(CLI::ExistingFile);
    tfm->add_option("--episodes", fm_cfg.episodes, "Training trajectories");
    tfm->add_option("--eta", fm_cfg.eta, "Adam learning rate");
    tfm->add_option("--zeta", fm_cfg.zeta, "Exploration probability");
    tfm->add_option("--seed", fm_cfg.seed, "Training seed");
    add_reward_flags(tfm, fm_reward);
    tfm->add_option("--out", fm_out, "Model checkpoint path")->required();
    tfm->add_option("--loss-trace", fm_trace, "Per-step loss CSV");

    // train-tb
    auto* ttb = app.add_subcommand("train-tb", "Train MOGFLOW-SS (trajectory balance) on an ISAC instance");
    std::string tb_instance, tb_out, tb_trace, tb_logz, tb_config;
    TbTrainConfig tb_cfg;
    IsacRewardConfig tb_reward;
    bool tb_calibrate = false;
    tb_cfg.episodes = 10000;
    tb_cfg.eta = 1e-3;
    ttb->add_option("--instance", tb_instance, "ISAC instance JSON")->required()->check(CLI::ExistingFile);
    ttb->add_option("--config", tb_config, "Experiment config whose tb/isac sections seed the defaults")
        ->check(CLI::ExistingFile);
    ttb->add_option("--episodes", tb_cfg.episodes, "Training episodes");
    ttb->add_option("--eta", tb_cfg.eta, "Adam learning rate");
    ttb->add_option("--zeta", tb_cfg.zeta, "Exploration probability");
    ttb->add_option("--seed", tb_cfg.seed, "Training seed");
    ttb->add_option("--c-scale", tb_reward.c_scale, "Radar term scale");
    ttb->add_flag("--calibrate", tb_calibrate, "Replace --c-scale with the calibrated value");
    ttb->add_option("--n-wir", tb_reward.n_wir, "Beamformer ascent steps per reward");
    ttb->add_option("--out", tb_out, "Model checkpoint path")->required();
    ttb->add_option("--loss-trace", tb_trace, "CSV of (step, value, n)");
    ttb->add_option("--log-z-trace", tb_logz, "CSV of (step, value, n)");

    // rollout
    auto* roll = app.add_subcommand("rollout", "Deterministic j-th-best rollout or proportional samples");
    std::string r_model, r_instance, r_out;
    std::size_t r_rank = 1, r_samples = 0;
    std::optional<double> r_n;
    std::uint64_t r_seed = 1;
    IsacRewardConfig r_isac;
    roll->add_option("--model", r_model, "Flow or trajectory-balance checkpoint")->required()->check(CLI::ExistingFile);
    roll->add_option("--rank", r_rank, "Follow the j-th largest flow (1-based)")->capture_default_str();
    roll->add_option("--n", r_n, "Preference for trajectory-balance models");
    roll->add_option("--samples", r_samples, "Draw this many proportional samples instead");
    roll->add_option("--seed", r_seed, "Sampling seed")->capture_default_str();
    roll->add_option("--instance", r_instance, "Instance used to score the result")->check(CLI::ExistingFile);
    roll->add_option("--c-scale", r_isac.c_scale, "Radar term scale when scoring ISAC subsets");
    roll->add_option("--out", r_out, "Output CSV (stdout if omitted)");

    // baseline
    auto* base = app.add_subcommand("baseline", "Greedy or relaxed log-det baselines");
    base->require_subcommand(1);
    std::string b_instance, b_out;
    std::size_t b_k = 0;
    GreedyConfig b_greedy;
    RelaxedConfig b_relaxed;
    auto* greedy = base->add_subcommand("greedy", "Greedy submodular selection");
    auto* relaxed = base->add_subcommand("relaxed", "Projected-gradient relaxation rounded to the top k");
    for (auto* cmd : {greedy, relaxed}) {
        cmd->add_option("--instance", b_instance, "Linear instance JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--k", b_k, "Subset size")->required();
        cmd->add_option("--out", b_out, "Output CSV (stdout if omitted)");
    }
    greedy->add_option("--epsilon", b_greedy.epsilon, "Diagonal regularizer")->capture_default_str();
    relaxed->add_option("--iters", b_relaxed.iters, "Projected-gradient iterations")->capture_default_str();
    relaxed->add_option("--step", b_relaxed.step, "Fixed step size")->capture_default_str();
    relaxed->add_option("--epsilon", b_relaxed.epsilon, "Diagonal regularizer")->capture_default_str();

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Exact desk-scale oracles");
    oracle->require_subcommand(1);
    std::string o_instance, o_out;
    std::size_t o_k = 0, o_threads = 1;
    LinearRewardOptions o_reward;
    OracleSuiteOptions o_suite;
    auto* brute = oracle->add_subcommand("brute", "Reward of every k-subset");
    auto* flows = oracle->add_subcommand("flows", "Exact DAG flows by dynamic programming");
    auto* suite = oracle->add_subcommand("suite", "Run every oracle comparison and property check");
    for (auto* cmd : {brute, flows}) {
        cmd->add_option("--instance", o_instance, "Linear instance JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--k", o_k, "Subset size")->required();
        add_reward_flags(cmd, o_reward);
        cmd->add_option("--out", o_out, "Output CSV (stdout if omitted)");
    }
    brute->add_option("--threads", o_threads, "Worker threads")->capture_default_str();
    suite->add_option("--seed", o_suite.seed, "Suite seed")->capture_default_str();
    suite->add_option("--rollouts", o_suite.sampling_rollouts, "Proportional-sampling rollouts")->capture_default_str();
    suite->add_flag("--corrupt-flow", o_suite.corrupt_flow, "Fault injection: perturb one exact edge flow");
    suite->add_option("--out", o_out, "Report CSV (stdout if omitted)");

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a figure/table experiment");
    std::string e_which, e_config, e_out;
    std::optional<std::uint64_t> e_seed;
    bool e_desk = false, e_print = false;
    exp->add_option("which", e_which, "fig2, fig3 or isac")->required()->check(CLI::IsMember({"fig2", "fig3", "isac"}));
    exp->add_option("--config", e_config, "Experiment config JSON")->check(CLI::ExistingFile);
    exp->add_flag("--desk-scale", e_desk, "Use the desk-scale preset instead of full scale");
    exp->add_option("--seed", e_seed, "Run a single seed");
    exp->add_option("--out", e_out, "Results CSV (sidecars are written next to it)");
    exp->add_flag("--print-config", e_print, "Print the resolved config JSON and exit");

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "Average raw result rows over seeds");
    std::string a_in, a_out;
    agg->add_option("input", a_in, "Results CSV")->required()->check(CLI::ExistingFile);
    agg->add_option("--out", a_out, "Output CSV (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            if (kind == "linear") {
                save_instance(gen_instance(gm, gn, gseed), gout);
            } else {
                save_instance(gen_channel(gdims, gseed), gout);
            }
            return 0;
        }

        if (*tfm) {
            const LinearInstance inst = load_linear_instance(fm_instance);
            if (!fm_config.empty()) {
                const ExperimentConfig ec = load_experiment_config(fm_config);
                const auto* ep = tfm->get_option("--episodes");
                const auto* et = tfm->get_option("--eta");
                const auto* ze = tfm->get_option("--zeta");
                const auto* sd = tfm->get_option("--seed");
                FmTrainConfig merged = ec.fm;
                if (ep->count()) merged.episodes = fm_cfg.episodes;
                if (et->count()) merged.eta = fm_cfg.eta;
                if (ze->count()) merged.zeta = fm_cfg.zeta;
                if (sd->count()) merged.seed = fm_cfg.seed;
                fm_cfg = merged;
                if (!tfm->get_option("--c")->count()) fm_reward.c = ec.reward.c;
                if (!tfm->get_option("--prescale")->count()) fm_reward.prescale = ec.reward.prescale;
            }
            const FmTrainResult res = train_gflow_ss(MdpSpec(inst.m, fm_k), fm_reward.bind(inst), fm_cfg);
            save_model(res.model, fm_out);
            write_loss_trace(res.loss_trace, fm_trace);
            return 0;
        }

        if (*ttb) {
            const IsacInstance inst = load_isac_instance(tb_instance);
            if (!tb_config.empty()) {
                const ExperimentConfig ec = load_experiment_config(tb_config);
                TbTrainConfig merged = ec.tb;
                if (ttb->get_option("--episodes")->count()) merged.episodes = tb_cfg.episodes;
                if (ttb->get_option("--eta")->count()) merged.eta = tb_cfg.eta;
                if (ttb->get_option("--zeta")->count()) merged.zeta = tb_cfg.zeta;
                if (ttb->get_option("--seed")->count()) merged.seed = tb_cfg.seed;
                tb_cfg = merged;
                IsacRewardConfig rc = ec.isac_reward;
                if (ttb->get_option("--c-scale")->count()) rc.c_scale = tb_reward.c_scale;
                if (ttb->get_option("--n-wir")->count()) rc.n_wir = tb_reward.n_wir;
                tb_reward = rc;
                tb_calibrate = tb_calibrate || ec.calibrate_c_scale;
            }
            if (tb_calibrate) tb_reward.c_scale = calibrate_c_scale(inst, tb_reward, 10, inst.seed);
            tb_cfg.n_wir = tb_reward.n_wir;
            IsacRewardCache cache(inst, tb_reward);
            const TbTrainResult res = train_mogflow_ss(
                MdpSpec(inst.dims.nt, inst.dims.ns), [&](const SubsetState& x, double n) { return cache.reward(x, n); },
                tb_cfg);
            save_model(res.model, tb_out);
            if (!tb_trace.empty()) {
                std::vector<TraceRow> rows;
                for (const auto& r : res.loss_trace) rows.push_back({tb_cfg.seed, r.episode, r.loss, r.n});
                auto out = open_out(tb_trace);
                write_trace_csv(rows, true, out);
            }
            if (!tb_logz.empty()) {
                std::vector<TraceRow> rows;
                for (const auto& r : res.log_z_trace) rows.push_back({tb_cfg.seed, r.episode, r.log_z, r.n});
                auto out = open_out(tb_logz);
                write_trace_csv(rows, true, out);
            }
            std::cerr << "c_scale " << format_number(tb_reward.c_scale) << '\n';
            return 0;
        }

        if (*roll) {
            const nlohmann::json ckpt = read_json(r_model);
            const std::string format = ckpt.value("format", std::string{});
            std::vector<SubsetState> results;
            if (format == "gflowss-flow-model") {
                const FlowModel model = flow_model_from_json(ckpt);
                if (r_samples > 0) {
                    std::mt19937_64 rng(r_seed);
                    for (std::size_t i = 0; i < r_samples; ++i) results.push_back(sample_terminal(model, rng));
                } else {
                    results.push_back(rollout_rank(model, r_rank).terminal());
                }
            } else if (format == "gflowss-tb-model") {
                if (!r_n) throw Error(ErrorCode::InvalidArgument, "--n is required for trajectory-balance models");
                const TbModel model = tb_model_from_json(ckpt);
                const Preference pref(*r_n);
                if (r_samples > 0) {
                    std::mt19937_64 rng(r_seed);
                    for (std::size_t i = 0; i < r_samples; ++i) results.push_back(sample_terminal(model, pref, rng));
                } else {
                    results.push_back(rollout_conditioned(model, pref, r_rank).terminal());
                }
            } else {
                throw Error(ErrorCode::InvalidArgument, r_model + " is not a model checkpoint");
            }

            std::optional<nlohmann::json> inst_json;
            if (!r_instance.empty()) inst_json = read_json(r_instance);
            const bool isac = inst_json && inst_json->value("kind", std::string{}) == "isac";
            emit(r_out, [&](std::ostream& out) {
                out << (isac ? "mask,indices,crb,rate,reward\n" : inst_json ? "mask,indices,logdet\n" : "mask,indices\n");
                std::optional<LinearInstance> lin;
                std::optional<IsacInstance> ii;
                if (inst_json && isac) ii = isac_instance_from_json(*inst_json);
                if (inst_json && !isac) lin = linear_instance_from_json(*inst_json);
                for (const auto& x : results) {
                    out << x.to_string() << ',' << indices_text(x);
                    if (lin) out << ',' << format_number(logdet_objective(*lin, x));
                    if (ii) {
                        const IsacEvaluation ev = evaluate_isac(x, Preference(r_n.value_or(0.5)), *ii, r_isac);
                        out << ',' << format_number(ev.crb) << ',' << format_number(ev.rate) << ','
                            << format_number(ev.reward);
                    }
                    out << '\n';
                }
            });
            return 0;
        }

        if (*base) {
            const LinearInstance inst = load_linear_instance(b_instance);
            if (*greedy) {
                const auto order = greedy_sequence(inst, b_k, b_greedy);
                const SubsetState x = SubsetState::from_indices(inst.m, order);
                emit(b_out, [&](std::ostream& out) {
                    out << "method,k,indices,pick_order,logdet\n";
                    std::string picks;
                    for (std::size_t i : order) picks += (picks.empty() ? "" : " ") + std::to_string(i);
                    out << "greedy_ss," << b_k << ',' << indices_text(x) << ',' << picks << ','
                        << format_number(logdet_objective(inst, x)) << '\n';
                });
            } else {
                const RelaxedResult res =
                    relaxed_logdet_solve(inst, b_k, b_relaxed.iters, b_relaxed.step, b_relaxed.epsilon);
                const SubsetState x = round_topk(res.x, b_k);
                emit(b_out, [&](std::ostream& out) {
                    out << "method,k,indices,logdet,relaxed_objective\n";
                    out << "cvx_opt_ss," << b_k << ',' << indices_text(x) << ','
                        << format_number(logdet_objective(inst, x)) << ',' << format_number(res.objective) << '\n';
                });
            }
            return 0;
        }

        if (*oracle) {
            if (*suite) {
                const auto report = run_oracle_suite(o_suite);
                emit(o_out, [&](std::ostream& out) { write_oracle_report(report, out); });
                return all_passed(report) ? 0 : 1;
            }
            const LinearInstance inst = load_linear_instance(o_instance);
            const MdpSpec spec(inst.m, o_k);
            const RewardFn reward = o_reward.bind(inst);
            if (*brute) {
                const BruteForceResult res = brute_force_best(spec, reward, o_threads);
                emit(o_out, [&](std::ostream& out) { write_reward_table_csv(res, out); });
                std::cerr << "best " << res.best.to_string() << " (" << indices_text(res.best) << ") reward "
                          << format_number(res.value) << '\n';
            } else {
                const ExactFlows ef = exact_flow_dp(spec, reward);
                emit(o_out, [&](std::ostream& out) { write_flows_csv(ef, out); });
                std::cerr << "root flow " << format_number(ef.root_flow) << '\n';
            }
            return 0;
        }

        if (*exp) {
            const ExperimentId id = parse_experiment_id(e_which);
            ExperimentConfig cfg = e_config.empty() ? preset(id, e_desk) : load_experiment_config(e_config);
            if (!e_config.empty() && is_isac(cfg.experiment) != is_isac(id)) {
                throw Error(ErrorCode::InvalidArgument, "config experiment does not match '" + e_which + "'");
            }
            if (!e_config.empty() && !is_isac(id)) cfg.experiment = id;
            if (e_seed) cfg.seeds = {*e_seed};
            if (!e_out.empty()) cfg.out = e_out;
            if (e_print) {
                std::cout << to_json(cfg).dump(2) << '\n';
                return 0;
            }
            const ExperimentOutput output = run_experiment(cfg, worker_count());
            write_experiment_output(output, cfg.out);
            std::cerr << "wrote " << output.rows.size() << " rows to " << cfg.out.string() << '\n';
            return 0;
        }

        if (*agg) {
            std::ifstream in(a_in);
            const auto rows = read_results_csv(in);
            emit(a_out, [&](std::ostream& out) { write_aggregate_csv(aggregate(rows), out); });
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: InvalidArgument: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
