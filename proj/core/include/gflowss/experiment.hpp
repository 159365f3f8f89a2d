#ifndef GFLOWSS_EXPERIMENT_HPP
#define GFLOWSS_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gflowss/baselines.hpp"
#include "gflowss/flow_matching.hpp"
#include "gflowss/reward_isac.hpp"
#include "gflowss/reward_linear.hpp"
#include "gflowss/trajectory_balance.hpp"

namespace gflowss {

enum class ExperimentId { Fig2, Fig3, Fig45, Fig67, Table1, Custom };

enum class Method {
    GflowSs,      ///< rank-1 rollout of the flow-matching model
    GflowSsRank2, ///< rank-2 rollout of the same model
    GreedySs,
    CvxOptSs,     ///< relaxed solve rounded to the top k
    MogflowSs,    ///< rank-1 conditioned rollout of the trajectory-balance model
    RandomMedian, ///< median over random subsets
};

enum class Metric { Logdet, Crb, Rate, Reward };

std::string_view to_string(ExperimentId id) noexcept;
std::string_view to_string(Method m) noexcept;
std::string_view to_string(Metric m) noexcept;
ExperimentId parse_experiment_id(std::string_view s);
Method parse_method(std::string_view s);
Metric parse_metric(std::string_view s);

/// fig45, fig67 and table1 are all produced by the ISAC run.
bool is_isac(ExperimentId id) noexcept;

struct RelaxedConfig {
    std::size_t iters = 2000;
    double step = 0.05;
    double epsilon = 1e-12;
};

struct ExperimentConfig {
    ExperimentId experiment = ExperimentId::Fig2;
    std::vector<std::uint64_t> seeds{1, 2, 3};

    // Linear sensor selection (fig2, fig3, custom).
    std::size_t m = 30;
    std::size_t n = 5;
    std::vector<std::size_t> k{6, 8, 10};
    RewardConfig reward;
    FmTrainConfig fm;
    GreedyConfig greedy;
    RelaxedConfig relaxed;

    // ISAC (fig45, fig67, table1).
    IsacDims isac;
    IsacRewardConfig isac_reward;
    /// Replaces isac_reward.c_scale with calibrate_c_scale per instance.
    bool calibrate_c_scale = false;
    std::size_t calibration_subsets = 10;
    TbTrainConfig tb;
    std::vector<double> eval_n{0.1, 0.3, 0.5, 0.7, 0.9};
    std::size_t random_subsets = 50;

    std::filesystem::path out = "results.csv";

    void validate() const;
};

/// Full-scale or desk-scale defaults for an experiment.
ExperimentConfig preset(ExperimentId id, bool desk_scale);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep the values of preset(experiment, desk_scale), where
/// desk_scale is read from the document (default true).
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
    ExperimentId experiment = ExperimentId::Custom;
    std::uint64_t seed = 0;
    Method method = Method::GflowSs;
    std::size_t k = 0;
    std::optional<double> n;
    Metric metric = Metric::Logdet;
    double value = 0.0;
    double wall_time = 0.0; ///< seconds spent producing the method's selection
};

struct TraceRow {
    std::uint64_t seed = 0;
    std::size_t step = 0;
    double value = 0.0;
    std::optional<double> n;
};

struct SelectionRow {
    ExperimentId experiment = ExperimentId::Custom;
    std::uint64_t seed = 0;
    Method method = Method::GflowSs;
    std::size_t k = 0;
    std::optional<double> n;
    SubsetState subset;
};

struct ExperimentOutput {
    std::vector<ResultRow> rows;
    std::vector<SelectionRow> selections;
    std::vector<TraceRow> loss_trace; ///< trajectory-balance loss per episode
    std::vector<TraceRow> log_z_trace; ///< log Z per recorded episode and n
};

/// Rows ordered by (seed, k, n, method, metric); no-n rows first.
void sort_rows(std::vector<ResultRow>& rows);

/// Worker count: GFLOWSS_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Linear instances with the sigmoid-det reward; GFLOW-SS, greedy and the
/// rounded relaxation per (seed, k), scored by logdet_objective.
ExperimentOutput run_fig2(const ExperimentConfig& cfg, std::size_t threads = 1);
/// run_fig2 plus the rank-2 rollout of every trained model.
ExperimentOutput run_fig3(const ExperimentConfig& cfg, std::size_t threads = 1);
/// MOGFLOW-SS per seed; conditioned rollouts at every eval_n with CRB, rate
/// and reward, plus the median reward of random subsets.
ExperimentOutput run_isac(const ExperimentConfig& cfg, std::size_t threads = 1);
/// Dispatches on cfg.experiment; custom runs fig3-style cells.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

/// experiment,seed,method,k,n,metric,value
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
/// Same keys as the results file with wall_time_s in place of value.
void write_timing_csv(const std::vector<ResultRow>& rows, std::ostream& out);
/// step,value[,n]
void write_trace_csv(const std::vector<TraceRow>& rows, bool with_n, std::ostream& out);
/// experiment,seed,method,k,n,indices (space-separated)
void write_selections_csv(const std::vector<SelectionRow>& rows, std::ostream& out);

std::vector<ResultRow> read_results_csv(std::istream& in);

/// Writes the results file at cfg.out and its sidecars next to it:
/// <stem>.timing.csv, <stem>.selections.csv and, for ISAC runs,
/// <stem>.tb_loss.csv and <stem>.log_z.csv.
void write_experiment_output(const ExperimentOutput& output, const std::filesystem::path& out);

struct AggregateRow {
    ExperimentId experiment = ExperimentId::Custom;
    Method method = Method::GflowSs;
    std::size_t k = 0;
    std::optional<double> n;
    Metric metric = Metric::Logdet;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0; ///< sample standard deviation; 0 for a single seed
};

/// Averages over seeds, grouped by (experiment, k, n, method, metric).
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out);

/// Sliding-window mean of the first and last `window` entries.
struct WindowedTrend {
    double head = 0.0;
    double tail = 0.0;
};
WindowedTrend windowed_trend(const std::vector<double>& values, std::size_t window);

} // namespace gflowss

#endif // GFLOWSS_EXPERIMENT_HPP
