#include "gflowss/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "gflowss/csv.hpp"
#include "gflowss/error.hpp"

namespace gflowss {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Runs every task on up to `threads` workers; rethrows the first failure by
/// task index.
void run_pool(std::vector<std::function<void()>>& tasks, std::size_t threads) {
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, tasks.size()));
    std::vector<std::exception_ptr> errors(tasks.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) {
                    try {
                        tasks[i]();
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string indices_text(const SubsetState& s) {
    std::string out;
    for (std::size_t i : s.indices()) {
        if (!out.empty()) out += ' ';
        out += std::to_string(i);
    }
    return out;
}

bool optional_less(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return !a.has_value();
    return a && *a < *b;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

struct LinearCell {
    std::vector<ResultRow> rows;
    std::vector<SelectionRow> selections;
};

LinearCell run_linear_cell(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t k, bool with_rank2) {
    const LinearInstance inst = gen_instance(cfg.m, cfg.n, seed);
    const MdpSpec spec(cfg.m, k);
    LinearCell cell;
    auto record = [&](Method method, const SubsetState& x, double wall) {
        cell.rows.push_back({cfg.experiment, seed, method, k, std::nullopt, Metric::Logdet, logdet_objective(inst, x),
                             wall});
        cell.selections.push_back({cfg.experiment, seed, method, k, std::nullopt, x});
    };

    auto t0 = Clock::now();
    FmTrainConfig fm = cfg.fm;
    fm.seed = derive_seed(seed, k);
    const RewardConfig reward = cfg.reward;
    const FmTrainResult trained = train_gflow_ss(
        spec, [&](const SubsetState& x) { return sigmoid_reward(subset_det(inst, x), reward); }, fm);
    const double train_time = seconds_since(t0);
    t0 = Clock::now();
    const SubsetState best = rollout_rank(trained.model, 1).terminal();
    record(Method::GflowSs, best, train_time + seconds_since(t0));
    if (with_rank2) {
        t0 = Clock::now();
        const SubsetState second = rollout_rank(trained.model, 2).terminal();
        record(Method::GflowSsRank2, second, train_time + seconds_since(t0));
    }

    t0 = Clock::now();
    const SubsetState greedy = greedy_select(inst, k, cfg.greedy);
    record(Method::GreedySs, greedy, seconds_since(t0));

    t0 = Clock::now();
    const RelaxedResult relaxed = relaxed_logdet_solve(inst, k, cfg.relaxed.iters, cfg.relaxed.step, cfg.relaxed.epsilon);
    const SubsetState rounded = round_topk(relaxed.x, k);
    record(Method::CvxOptSs, rounded, seconds_since(t0));
    return cell;
}

ExperimentOutput run_linear(const ExperimentConfig& cfg, std::size_t threads, bool with_rank2) {
    cfg.validate();
    std::vector<std::pair<std::uint64_t, std::size_t>> keys;
    for (std::uint64_t seed : cfg.seeds) {
        for (std::size_t k : cfg.k) keys.emplace_back(seed, k);
    }
    std::vector<LinearCell> cells(keys.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        tasks.emplace_back([&, i] { cells[i] = run_linear_cell(cfg, keys[i].first, keys[i].second, with_rank2); });
    }
    run_pool(tasks, threads);

    ExperimentOutput out;
    for (auto& c : cells) {
        out.rows.insert(out.rows.end(), c.rows.begin(), c.rows.end());
        out.selections.insert(out.selections.end(), c.selections.begin(), c.selections.end());
    }
    sort_rows(out.rows);
    std::stable_sort(out.selections.begin(), out.selections.end(), [](const SelectionRow& a, const SelectionRow& b) {
        return std::tie(a.seed, a.k, a.method) < std::tie(b.seed, b.k, b.method);
    });
    return out;
}

ExperimentOutput run_isac_cell(const ExperimentConfig& cfg, std::uint64_t seed) {
    const IsacInstance inst = gen_channel(cfg.isac, seed);
    IsacRewardConfig rcfg = cfg.isac_reward;
    if (cfg.calibrate_c_scale) {
        rcfg.c_scale = calibrate_c_scale(inst, rcfg, cfg.calibration_subsets, derive_seed(seed, 0xca1b));
    }
    IsacRewardCache cache(inst, rcfg);
    const MdpSpec spec(cfg.isac.nt, cfg.isac.ns);
    const std::size_t k = cfg.isac.ns;

    auto t0 = Clock::now();
    TbTrainConfig tb = cfg.tb;
    tb.seed = derive_seed(seed, 0x7b);
    tb.n_wir = rcfg.n_wir;
    const TbTrainResult trained =
        train_mogflow_ss(spec, [&](const SubsetState& x, double n) { return cache.reward(x, n); }, tb);
    const double train_time = seconds_since(t0);

    ExperimentOutput out;
    for (const auto& r : trained.loss_trace) out.loss_trace.push_back({seed, r.episode, r.loss, r.n});
    for (const auto& r : trained.log_z_trace) out.log_z_trace.push_back({seed, r.episode, r.log_z, r.n});

    std::mt19937_64 rng(derive_seed(seed, 0x5a));
    std::vector<SubsetState> random_subsets;
    std::vector<std::size_t> perm(cfg.isac.nt);
    for (std::size_t i = 0; i < cfg.random_subsets; ++i) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        random_subsets.push_back(
            SubsetState::from_indices(cfg.isac.nt, std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k))));
    }

    for (double n : cfg.eval_n) {
        t0 = Clock::now();
        const SubsetState x = rollout_conditioned(trained.model, Preference(n), 1).terminal();
        const IsacEvaluation ev = cache.evaluate(x, n);
        const double wall = train_time + seconds_since(t0);
        out.rows.push_back({cfg.experiment, seed, Method::MogflowSs, k, n, Metric::Crb, ev.crb, wall});
        out.rows.push_back({cfg.experiment, seed, Method::MogflowSs, k, n, Metric::Rate, ev.rate, wall});
        out.rows.push_back({cfg.experiment, seed, Method::MogflowSs, k, n, Metric::Reward, ev.reward, wall});
        out.selections.push_back({cfg.experiment, seed, Method::MogflowSs, k, n, x});

        if (!random_subsets.empty()) {
            t0 = Clock::now();
            std::vector<double> rewards;
            for (const auto& r : random_subsets) rewards.push_back(cache.reward(r, n));
            out.rows.push_back(
                {cfg.experiment, seed, Method::RandomMedian, k, n, Metric::Reward, median(rewards), seconds_since(t0)});
        }
    }
    return out;
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& values, const char* what) {
    for (Enum v : values) {
        if (to_string(v) == s) return v;
    }
    throw Error(ErrorCode::InvalidArgument, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array kExperimentIds{ExperimentId::Fig2, ExperimentId::Fig3,   ExperimentId::Fig45,
                                    ExperimentId::Fig67, ExperimentId::Table1, ExperimentId::Custom};
constexpr std::array kMethods{Method::GflowSs,   Method::GflowSsRank2, Method::GreedySs,
                              Method::CvxOptSs,  Method::MogflowSs,    Method::RandomMedian};
constexpr std::array kMetrics{Metric::Logdet, Metric::Crb, Metric::Rate, Metric::Reward};

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

std::filesystem::path sidecar(const std::filesystem::path& out, const std::string& suffix) {
    std::filesystem::path p = out;
    p.replace_filename(out.stem().string() + suffix);
    return p;
}

} // namespace

std::string_view to_string(ExperimentId id) noexcept {
    switch (id) {
        case ExperimentId::Fig2: return "fig2";
        case ExperimentId::Fig3: return "fig3";
        case ExperimentId::Fig45: return "fig45";
        case ExperimentId::Fig67: return "fig67";
        case ExperimentId::Table1: return "table1";
        case ExperimentId::Custom: return "custom";
    }
    return "custom";
}

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::GflowSs: return "gflow_ss";
        case Method::GflowSsRank2: return "gflow_ss_rank2";
        case Method::GreedySs: return "greedy_ss";
        case Method::CvxOptSs: return "cvx_opt_ss";
        case Method::MogflowSs: return "mogflow_ss";
        case Method::RandomMedian: return "random_median";
    }
    return "gflow_ss";
}

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::Logdet: return "logdet";
        case Metric::Crb: return "crb";
        case Metric::Rate: return "rate";
        case Metric::Reward: return "reward";
    }
    return "logdet";
}

ExperimentId parse_experiment_id(std::string_view s) {
    if (s == "isac") return ExperimentId::Fig67;
    return parse_enum(s, kExperimentIds, "experiment");
}
Method parse_method(std::string_view s) { return parse_enum(s, kMethods, "method"); }
Metric parse_metric(std::string_view s) { return parse_enum(s, kMetrics, "metric"); }

bool is_isac(ExperimentId id) noexcept {
    return id == ExperimentId::Fig45 || id == ExperimentId::Fig67 || id == ExperimentId::Table1;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "seeds must be non-empty");
    if (is_isac(experiment)) {
        isac.validate();
        isac_reward.validate();
        tb.validate();
        MdpSpec(isac.nt, isac.ns).validate();
        for (double v : eval_n) Preference{v};
        if (calibrate_c_scale && calibration_subsets == 0) {
            throw Error(ErrorCode::InvalidArgument, "calibration needs at least one subset");
        }
        return;
    }
    if (k.empty()) throw Error(ErrorCode::InvalidArgument, "k list must be non-empty");
    for (std::size_t kk : k) {
        if (kk < 1 || kk >= m) throw Error(ErrorCode::InvalidArgument, "every k must lie in [1, m)");
        if (kk < n) throw Error(ErrorCode::InvalidArgument, "every k must be at least n or all determinants vanish");
    }
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be positive");
    reward.validate();
    fm.validate();
    greedy.validate();
    if (relaxed.iters == 0 || !(relaxed.step > 0.0) || !(relaxed.epsilon > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "relaxed solver needs iters > 0, step > 0, epsilon > 0");
    }
}

ExperimentConfig preset(ExperimentId id, bool desk_scale) {
    ExperimentConfig cfg;
    cfg.experiment = id;
    cfg.out = std::string(to_string(id)) + (desk_scale ? "_desk.csv" : ".csv");
    if (is_isac(id)) {
        cfg.k.clear();
        if (desk_scale) {
            cfg.seeds = {1, 2, 3, 4, 5};
            cfg.isac = IsacDims{12, 12, 4, 20};
            cfg.tb.episodes = 10000;
            cfg.tb.eta = 1e-3;
            cfg.calibrate_c_scale = true;
        } else {
            cfg.seeds = {1};
            cfg.isac = IsacDims{80, 80, 10, 100};
            cfg.tb.episodes = 60000;
        }
        return cfg;
    }
    switch (id) {
        case ExperimentId::Fig3:
            cfg.m = desk_scale ? 20 : 50;
            cfg.k = desk_scale ? std::vector<std::size_t>{6, 8} : std::vector<std::size_t>{10, 11, 12, 13, 14, 15};
            break;
        default:
            cfg.m = desk_scale ? 30 : 100;
            cfg.k = desk_scale ? std::vector<std::size_t>{6, 8, 10}
                               : std::vector<std::size_t>{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
            break;
    }
    cfg.n = 5;
    if (desk_scale) {
        cfg.seeds = {1, 2, 3};
        cfg.fm.episodes = 8000;
        cfg.fm.eta = 1e-3;
        cfg.fm.zeta = 1.0;
        cfg.reward.prescale = 1e-3;
    } else {
        cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8};
        cfg.fm.episodes = 40000;
    }
    return cfg;
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = std::string(to_string(cfg.experiment));
    j["seeds"] = cfg.seeds;
    j["out"] = cfg.out.string();
    if (is_isac(cfg.experiment)) {
        j["isac"] = {{"nt", cfg.isac.nt},
                     {"nr", cfg.isac.nr},
                     {"ns", cfg.isac.ns},
                     {"L", cfg.isac.L},
                     {"c_scale", cfg.isac_reward.c_scale},
                     {"n_wir", cfg.isac_reward.n_wir},
                     {"inner_lr", cfg.isac_reward.inner_lr},
                     {"max_restarts", cfg.isac_reward.max_restarts},
                     {"calibrate_c_scale", cfg.calibrate_c_scale},
                     {"calibration_subsets", cfg.calibration_subsets}};
        j["tb"] = {{"episodes", cfg.tb.episodes},
                   {"zeta", cfg.tb.zeta},
                   {"eta", cfg.tb.eta},
                   {"beta_dictionary", cfg.tb.beta_dictionary},
                   {"hidden_widths", cfg.tb.hidden_widths},
                   {"forward_fourier_std", cfg.tb.forward_fourier_std},
                   {"logz_fourier_std", cfg.tb.logz_fourier_std},
                   {"log_z_every", cfg.tb.log_z_every}};
        j["eval_n"] = cfg.eval_n;
        j["random_subsets"] = cfg.random_subsets;
        return j;
    }
    j["m"] = cfg.m;
    j["n"] = cfg.n;
    j["k"] = cfg.k;
    j["reward"] = {{"c", cfg.reward.c}, {"prescale", cfg.reward.prescale}};
    j["fm"] = {{"episodes", cfg.fm.episodes},
               {"zeta", cfg.fm.zeta},
               {"eta", cfg.fm.eta},
               {"hidden_widths", cfg.fm.hidden_widths},
               {"fourier_std", cfg.fm.fourier_std}};
    j["greedy"] = {{"epsilon", cfg.greedy.epsilon}};
    j["relaxed"] = {{"iters", cfg.relaxed.iters}, {"step", cfg.relaxed.step}, {"epsilon", cfg.relaxed.epsilon}};
    return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    const ExperimentId id = parse_experiment_id(j.at("experiment").get<std::string>());
    ExperimentConfig cfg = preset(id, j.value("desk_scale", true));
    read_if(j, "seeds", cfg.seeds);
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    read_if(j, "m", cfg.m);
    read_if(j, "n", cfg.n);
    read_if(j, "k", cfg.k);
    if (j.contains("reward")) {
        const auto& r = j.at("reward");
        read_if(r, "c", cfg.reward.c);
        read_if(r, "prescale", cfg.reward.prescale);
    }
    if (j.contains("fm")) {
        const auto& f = j.at("fm");
        read_if(f, "episodes", cfg.fm.episodes);
        read_if(f, "zeta", cfg.fm.zeta);
        read_if(f, "eta", cfg.fm.eta);
        read_if(f, "hidden_widths", cfg.fm.hidden_widths);
        read_if(f, "fourier_std", cfg.fm.fourier_std);
    }
    if (j.contains("greedy")) read_if(j.at("greedy"), "epsilon", cfg.greedy.epsilon);
    if (j.contains("relaxed")) {
        const auto& r = j.at("relaxed");
        read_if(r, "iters", cfg.relaxed.iters);
        read_if(r, "step", cfg.relaxed.step);
        read_if(r, "epsilon", cfg.relaxed.epsilon);
    }
    if (j.contains("isac")) {
        const auto& i = j.at("isac");
        read_if(i, "nt", cfg.isac.nt);
        read_if(i, "nr", cfg.isac.nr);
        read_if(i, "ns", cfg.isac.ns);
        read_if(i, "L", cfg.isac.L);
        read_if(i, "c_scale", cfg.isac_reward.c_scale);
        read_if(i, "n_wir", cfg.isac_reward.n_wir);
        read_if(i, "inner_lr", cfg.isac_reward.inner_lr);
        read_if(i, "max_restarts", cfg.isac_reward.max_restarts);
        read_if(i, "calibrate_c_scale", cfg.calibrate_c_scale);
        read_if(i, "calibration_subsets", cfg.calibration_subsets);
    }
    if (j.contains("tb")) {
        const auto& t = j.at("tb");
        read_if(t, "episodes", cfg.tb.episodes);
        read_if(t, "zeta", cfg.tb.zeta);
        read_if(t, "eta", cfg.tb.eta);
        read_if(t, "beta_dictionary", cfg.tb.beta_dictionary);
        read_if(t, "hidden_widths", cfg.tb.hidden_widths);
        read_if(t, "forward_fourier_std", cfg.tb.forward_fourier_std);
        read_if(t, "logz_fourier_std", cfg.tb.logz_fourier_std);
        read_if(t, "log_z_every", cfg.tb.log_z_every);
    }
    read_if(j, "eval_n", cfg.eval_n);
    read_if(j, "random_subsets", cfg.random_subsets);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    try {
        return experiment_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

void sort_rows(std::vector<ResultRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.seed != b.seed) return a.seed < b.seed;
        if (a.k != b.k) return a.k < b.k;
        if (optional_less(a.n, b.n)) return true;
        if (optional_less(b.n, a.n)) return false;
        if (a.method != b.method) return a.method < b.method;
        return a.metric < b.metric;
    });
}

std::size_t worker_count() {
    if (const char* env = std::getenv("GFLOWSS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentOutput run_fig2(const ExperimentConfig& cfg, std::size_t threads) { return run_linear(cfg, threads, false); }

ExperimentOutput run_fig3(const ExperimentConfig& cfg, std::size_t threads) { return run_linear(cfg, threads, true); }

ExperimentOutput run_isac(const ExperimentConfig& cfg, std::size_t threads) {
    cfg.validate();
    if (!is_isac(cfg.experiment)) throw Error(ErrorCode::InvalidArgument, "configuration is not an ISAC experiment");
    std::vector<ExperimentOutput> cells(cfg.seeds.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        tasks.emplace_back([&, i] { cells[i] = run_isac_cell(cfg, cfg.seeds[i]); });
    }
    run_pool(tasks, threads);

    ExperimentOutput out;
    for (auto& c : cells) {
        out.rows.insert(out.rows.end(), c.rows.begin(), c.rows.end());
        out.selections.insert(out.selections.end(), c.selections.begin(), c.selections.end());
        out.loss_trace.insert(out.loss_trace.end(), c.loss_trace.begin(), c.loss_trace.end());
        out.log_z_trace.insert(out.log_z_trace.end(), c.log_z_trace.begin(), c.log_z_trace.end());
    }
    sort_rows(out.rows);
    auto by_seed = [](const auto& a, const auto& b) { return a.seed < b.seed; };
    std::stable_sort(out.selections.begin(), out.selections.end(), by_seed);
    std::stable_sort(out.loss_trace.begin(), out.loss_trace.end(), by_seed);
    std::stable_sort(out.log_z_trace.begin(), out.log_z_trace.end(), by_seed);
    return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
    if (is_isac(cfg.experiment)) return run_isac(cfg, threads);
    if (cfg.experiment == ExperimentId::Fig2) return run_fig2(cfg, threads);
    return run_fig3(cfg, threads);
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "experiment,seed,method,k,n,metric,value\n";
    for (const auto& r : rows) {
        if (!std::isfinite(r.value)) {
            throw Error(ErrorCode::InvalidArgument, "non-finite metric value for " + std::string(to_string(r.method)));
        }
        out << to_string(r.experiment) << ',' << r.seed << ',' << to_string(r.method) << ',' << r.k << ','
            << format_optional(r.n) << ',' << to_string(r.metric) << ',' << format_number(r.value) << '\n';
    }
}

void write_timing_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "experiment,seed,method,k,n,metric,wall_time_s\n";
    for (const auto& r : rows) {
        out << to_string(r.experiment) << ',' << r.seed << ',' << to_string(r.method) << ',' << r.k << ','
            << format_optional(r.n) << ',' << to_string(r.metric) << ',' << format_number(std::max(0.0, r.wall_time))
            << '\n';
    }
}

void write_trace_csv(const std::vector<TraceRow>& rows, bool with_n, std::ostream& out) {
    out << (with_n ? "seed,step,value,n\n" : "seed,step,value\n");
    for (const auto& r : rows) {
        out << r.seed << ',' << r.step << ',' << format_number(r.value);
        if (with_n) out << ',' << format_optional(r.n);
        out << '\n';
    }
}

void write_selections_csv(const std::vector<SelectionRow>& rows, std::ostream& out) {
    out << "experiment,seed,method,k,n,indices\n";
    for (const auto& r : rows) {
        out << to_string(r.experiment) << ',' << r.seed << ',' << to_string(r.method) << ',' << r.k << ','
            << format_optional(r.n) << ',' << indices_text(r.subset) << '\n';
    }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "results file is empty");
    const auto header = parse_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"experiment", "seed", "method", "k", "n", "metric", "value"}) {
        if (!col.count(name)) throw Error(ErrorCode::InvalidArgument, std::string("results file lacks column ") + name);
    }
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = parse_csv_line(line);
        if (f.size() != header.size()) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + " has the wrong field count");
        }
        try {
            ResultRow r;
            r.experiment = parse_experiment_id(f[col["experiment"]]);
            r.seed = std::stoull(f[col["seed"]]);
            r.method = parse_method(f[col["method"]]);
            r.k = std::stoull(f[col["k"]]);
            if (!f[col["n"]].empty()) r.n = std::stod(f[col["n"]]);
            r.metric = parse_metric(f[col["metric"]]);
            r.value = std::stod(f[col["value"]]);
            rows.push_back(r);
        } catch (const std::logic_error& e) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

void write_experiment_output(const ExperimentOutput& output, const std::filesystem::path& out) {
    {
        auto f = open_out(out);
        write_results_csv(output.rows, f);
    }
    {
        auto f = open_out(sidecar(out, ".timing.csv"));
        write_timing_csv(output.rows, f);
    }
    {
        auto f = open_out(sidecar(out, ".selections.csv"));
        write_selections_csv(output.selections, f);
    }
    if (!output.loss_trace.empty()) {
        auto f = open_out(sidecar(out, ".tb_loss.csv"));
        write_trace_csv(output.loss_trace, true, f);
    }
    if (!output.log_z_trace.empty()) {
        auto f = open_out(sidecar(out, ".log_z.csv"));
        write_trace_csv(output.log_z_trace, true, f);
    }
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
    std::vector<ResultRow> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.experiment != b.experiment) return a.experiment < b.experiment;
        if (a.k != b.k) return a.k < b.k;
        if (optional_less(a.n, b.n)) return true;
        if (optional_less(b.n, a.n)) return false;
        if (a.method != b.method) return a.method < b.method;
        return a.metric < b.metric;
    });
    std::vector<AggregateRow> out;
    std::vector<double> values;
    auto flush = [&] {
        if (values.empty()) return;
        AggregateRow& g = out.back();
        g.count = values.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        g.mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - g.mean) * (v - g.mean);
        g.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
        values.clear();
    };
    for (const auto& r : sorted) {
        const bool same = !out.empty() && out.back().experiment == r.experiment && out.back().k == r.k &&
                          out.back().n == r.n && out.back().method == r.method && out.back().metric == r.metric;
        if (!same) {
            flush();
            out.push_back({r.experiment, r.method, r.k, r.n, r.metric, 0, 0.0, 0.0});
        }
        values.push_back(r.value);
    }
    flush();
    return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, std::ostream& out) {
    out << "experiment,method,k,n,metric,count,mean,stddev\n";
    for (const auto& r : rows) {
        out << to_string(r.experiment) << ',' << to_string(r.method) << ',' << r.k << ',' << format_optional(r.n)
            << ',' << to_string(r.metric) << ',' << r.count << ',' << format_number(r.mean) << ','
            << format_number(r.stddev) << '\n';
    }
}

WindowedTrend windowed_trend(const std::vector<double>& values, std::size_t window) {
    if (values.empty() || window == 0) throw Error(ErrorCode::InvalidArgument, "trend needs values and a window");
    const std::size_t w = std::min(window, values.size());
    WindowedTrend t;
    for (std::size_t i = 0; i < w; ++i) {
        t.head += values[i];
        t.tail += values[values.size() - w + i];
    }
    t.head /= static_cast<double>(w);
    t.tail /= static_cast<double>(w);
    return t;
}

} // namespace gflowss
