#include "gflowss/reward_isac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "gflowss/csv.hpp"
#include "gflowss/error.hpp"

namespace gflowss {

namespace {

constexpr double kMaxCondition = 1e14;
constexpr double kAsymmetryTolerance = 1e-10;

Eigen::MatrixXcd selected_rows(const SelectionMatrix& S, const Eigen::MatrixXcd& F) {
    Eigen::MatrixXcd G(static_cast<Eigen::Index>(S.rows.size()), F.cols());
    for (std::size_t i = 0; i < S.rows.size(); ++i) {
        G.row(static_cast<Eigen::Index>(i)) = F.row(static_cast<Eigen::Index>(S.rows[i]));
    }
    return G;
}

Eigen::MatrixXcd selected_cols(const SelectionMatrix& S, const Eigen::MatrixXcd& H) {
    Eigen::MatrixXcd Hs(H.rows(), static_cast<Eigen::Index>(S.rows.size()));
    for (std::size_t i = 0; i < S.rows.size(); ++i) {
        Hs.col(static_cast<Eigen::Index>(i)) = H.col(static_cast<Eigen::Index>(S.rows[i]));
    }
    return Hs;
}

void check_shapes(const SelectionMatrix& S, const Beamformer& F) {
    if (F.F.rows() != static_cast<Eigen::Index>(S.nt) || F.F.cols() != static_cast<Eigen::Index>(S.rows.size())) {
        throw Error(ErrorCode::DimensionMismatch, "beamformer must be nt x ns");
    }
}

Eigen::MatrixXcd symmetrized(const Eigen::MatrixXcd& m) {
    if (hermitian_asymmetry(m) > kAsymmetryTolerance * std::max(1.0, m.norm())) {
        throw Error(ErrorCode::InvalidArgument, "Gram matrix is not Hermitian");
    }
    return 0.5 * (m + m.adjoint());
}

/// Cholesky of a Hermitian Gram with a condition estimate from the
/// factor's diagonal.
Eigen::LLT<Eigen::MatrixXcd> checked_cholesky(const Eigen::MatrixXcd& gram) {
    Eigen::LLT<Eigen::MatrixXcd> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularGram, "Gram matrix is not positive definite");
    }
    const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal().real();
    const double lo = d.minCoeff();
    const double hi = d.maxCoeff();
    if (!(lo > 0.0) || (hi / lo) * (hi / lo) > kMaxCondition) {
        throw Error(ErrorCode::SingularGram, "Gram matrix condition estimate exceeds 1e14");
    }
    return llt;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    h ^= h >> 31;
    h *= 0x7fb5d329728ea185ULL;
    h ^= h >> 27;
    h *= 0x81dadef4bc2dd44dULL;
    h ^= h >> 33;
    return h;
}

} // namespace

void IsacDims::validate() const {
    if (nt < 2 || ns < 1 || nr < 1 || L < 1) throw Error(ErrorCode::InvalidArgument, "ISAC dimensions must be positive");
    if (ns > nt) throw Error(ErrorCode::InvalidArgument, "ns must not exceed nt");
    if (nt > kMaxSensors) throw Error(ErrorCode::InvalidArgument, "nt exceeds kMaxSensors");
}

void IsacRewardConfig::validate() const {
    if (!(c_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "c_scale must be positive");
    if (!(inner_lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "inner_lr must be positive");
}

Eigen::MatrixXd SelectionMatrix::dense() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nt));
    for (std::size_t i = 0; i < rows.size(); ++i) s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(rows[i])) = 1.0;
    return s;
}

Eigen::MatrixXd SelectionMatrix::selector() const {
    const Eigen::MatrixXd s = dense();
    return s.transpose() * s;
}

IsacInstance gen_channel(const IsacDims& dims, std::uint64_t seed) {
    dims.validate();
    IsacInstance inst{dims, seed, Eigen::MatrixXcd(static_cast<Eigen::Index>(dims.ns), static_cast<Eigen::Index>(dims.nt))};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    for (Eigen::Index i = 0; i < inst.H.rows(); ++i) {
        for (Eigen::Index j = 0; j < inst.H.cols(); ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            inst.H(i, j) = {re, im};
        }
    }
    return inst;
}

SelectionMatrix state_to_selection(const SubsetState& x, std::size_t ns) {
    if (x.ones() != ns) {
        throw Error(ErrorCode::WrongCardinality,
                    "subset has " + std::to_string(x.ones()) + " active antennas, expected " + std::to_string(ns));
    }
    return SelectionMatrix{x.size(), x.indices()};
}

double hermitian_asymmetry(const Eigen::MatrixXcd& m) { return (m - m.adjoint()).norm(); }

Eigen::MatrixXcd crb_gram(const SelectionMatrix& S, const Beamformer& F) {
    check_shapes(S, F);
    const Eigen::MatrixXcd G = selected_rows(S, F.F);
    return symmetrized(G * G.adjoint());
}

Eigen::MatrixXcd rate_gram(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst) {
    check_shapes(S, F);
    const Eigen::MatrixXcd A = selected_cols(S, inst.H) * selected_rows(S, F.F);
    const auto ns = static_cast<double>(S.rows.size());
    Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(A.rows(), A.rows()) + (A * A.adjoint()) / ns;
    return symmetrized(q);
}

double crb(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst) {
    const auto llt = checked_cholesky(crb_gram(S, F));
    const auto ns = static_cast<Eigen::Index>(S.rows.size());
    const Eigen::MatrixXcd linv = llt.matrixL().solve(Eigen::MatrixXcd::Identity(ns, ns));
    // trace(P^-1) = ||L^-1||_F^2, real by construction.
    return static_cast<double>(inst.dims.nr) / static_cast<double>(inst.dims.L) * linv.squaredNorm();
}

double comm_rate(const SelectionMatrix& S, const Beamformer& F, const IsacInstance& inst) {
    const Eigen::LLT<Eigen::MatrixXcd> llt(rate_gram(S, F, inst));
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularMatrix, "rate argument lost positive definiteness");
    }
    const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal().real();
    return 2.0 * d.array().log().sum() / std::log(2.0);
}

double weighted_objective(const SelectionMatrix& S, const Beamformer& F, double beta_crb, double beta_rate,
                          const IsacInstance& inst, double c_scale) {
    double value = 0.0;
    if (beta_crb != 0.0) value += beta_crb * c_scale / crb(S, F, inst);
    if (beta_rate != 0.0) value += beta_rate * comm_rate(S, F, inst);
    return value;
}

double dfrc_objective(const SelectionMatrix& S, const Beamformer& F, const Preference& pref, const IsacInstance& inst,
                      const IsacRewardConfig& cfg) {
    return weighted_objective(S, F, pref.beta_crb(), pref.beta_rate(), inst, cfg.c_scale);
}

Eigen::MatrixXcd weighted_objective_wirtinger(const SelectionMatrix& S, const Beamformer& F, double beta_crb,
                                              double beta_rate, const IsacInstance& inst, double c_scale) {
    check_shapes(S, F);
    const Eigen::MatrixXcd G = selected_rows(S, F.F);
    const auto ns = static_cast<Eigen::Index>(S.rows.size());
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(ns, ns);
    Eigen::MatrixXcd dG = Eigen::MatrixXcd::Zero(ns, ns);

    if (beta_crb != 0.0) {
        // d/dG* of trace((G G^H)^-1) is -(G G^H)^-2 G.
        const auto llt = checked_cholesky(crb_gram(S, F));
        const Eigen::MatrixXcd pinv = llt.solve(eye);
        const double ratio = static_cast<double>(inst.dims.nr) / static_cast<double>(inst.dims.L);
        const double c = ratio * pinv.trace().real();
        dG += (beta_crb * c_scale * ratio / (c * c)) * (pinv * (pinv * G));
    }
    if (beta_rate != 0.0) {
        // d/dG* of ln det(I + A A^H / ns) with A = Hs G is Hs^H Q^-1 Hs G / ns.
        const Eigen::MatrixXcd Hs = selected_cols(S, inst.H);
        const Eigen::LLT<Eigen::MatrixXcd> llt(rate_gram(S, F, inst));
        const Eigen::MatrixXcd qinv = llt.solve(Eigen::MatrixXcd::Identity(Hs.rows(), Hs.rows()));
        dG += (beta_rate / (static_cast<double>(ns) * std::log(2.0))) * (Hs.adjoint() * qinv * Hs * G);
    }

    Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(F.F.rows(), F.F.cols());
    for (std::size_t i = 0; i < S.rows.size(); ++i) {
        grad.row(static_cast<Eigen::Index>(S.rows[i])) = dG.row(static_cast<Eigen::Index>(i));
    }
    return grad;
}

Eigen::MatrixXcd dfrc_wirtinger_gradient(const SelectionMatrix& S, const Beamformer& F, const Preference& pref,
                                         const IsacInstance& inst, const IsacRewardConfig& cfg) {
    return weighted_objective_wirtinger(S, F, pref.beta_crb(), pref.beta_rate(), inst, cfg.c_scale);
}

Beamformer random_beamformer(const IsacDims& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    Beamformer b{Eigen::MatrixXcd(static_cast<Eigen::Index>(dims.nt), static_cast<Eigen::Index>(dims.ns))};
    for (Eigen::Index i = 0; i < b.F.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.F.cols(); ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            b.F(i, j) = {re, im};
        }
    }
    b.F /= b.F.norm();
    return b;
}

AscentResult ascend_weighted(const SelectionMatrix& S, const IsacInstance& inst, double beta_crb, double beta_rate,
                             double c_scale, std::size_t steps, double lr, std::size_t max_restarts,
                             std::uint64_t seed) {
    for (std::size_t attempt = 0; attempt <= max_restarts; ++attempt) {
        try {
            AscentResult result;
            result.restarts = attempt;
            Beamformer F = random_beamformer(inst.dims, mix(seed, attempt));
            result.best = F;
            result.best_objective = weighted_objective(S, F, beta_crb, beta_rate, inst, c_scale);
            result.trace.push_back(result.best_objective);
            for (std::size_t step = 0; step < steps; ++step) {
                F.F += lr * weighted_objective_wirtinger(S, F, beta_crb, beta_rate, inst, c_scale);
                F.F /= F.F.norm();
                const double value = weighted_objective(S, F, beta_crb, beta_rate, inst, c_scale);
                if (value > result.best_objective) {
                    result.best_objective = value;
                    result.best = F;
                }
                result.trace.push_back(result.best_objective);
            }
            return result;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularGram || attempt == max_restarts) throw;
        }
    }
    throw Error(ErrorCode::SingularGram, "beamformer ascent failed after restarts");
}

AscentResult wirtinger_ascent(const SelectionMatrix& S, const IsacInstance& inst, const Preference& pref,
                              const IsacRewardConfig& cfg, std::uint64_t seed) {
    return ascend_weighted(S, inst, pref.beta_crb(), pref.beta_rate(), cfg.c_scale, cfg.n_wir, cfg.inner_lr,
                           cfg.max_restarts, seed);
}

std::uint64_t inner_seed(const IsacInstance& inst, const SubsetState& x) { return mix(inst.seed, stable_hash(x)); }

IsacEvaluation evaluate_isac(const SubsetState& x, const Preference& pref, const IsacInstance& inst,
                             const IsacRewardConfig& cfg) {
    const SelectionMatrix S = state_to_selection(x, inst.dims.ns);
    const AscentResult ascent = wirtinger_ascent(S, inst, pref, cfg, inner_seed(inst, x));
    IsacEvaluation ev;
    ev.crb = crb(S, ascent.best, inst);
    ev.rate = comm_rate(S, ascent.best, inst);
    ev.reward = pref.n() * cfg.c_scale / ev.crb + (1.0 - pref.n()) * ev.rate;
    return ev;
}

double isac_reward(const SubsetState& x, const Preference& pref, const IsacInstance& inst,
                   const IsacRewardConfig& cfg) {
    return evaluate_isac(x, pref, inst, cfg).reward;
}

double calibrate_c_scale(const IsacInstance& inst, const IsacRewardConfig& cfg, std::size_t count,
                         std::uint64_t seed) {
    if (count == 0) throw Error(ErrorCode::InvalidArgument, "calibration needs at least one subset");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(inst.dims.nt);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const std::vector<std::size_t> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(inst.dims.ns));
        const SubsetState x = SubsetState::from_indices(inst.dims.nt, chosen);
        const SelectionMatrix S = state_to_selection(x, inst.dims.ns);
        const std::uint64_t s = inner_seed(inst, x);
        const AscentResult for_crb = ascend_weighted(S, inst, 1.0, 0.0, 1.0, cfg.n_wir, cfg.inner_lr, cfg.max_restarts, s);
        const AscentResult for_rate = ascend_weighted(S, inst, 0.0, 1.0, 1.0, cfg.n_wir, cfg.inner_lr, cfg.max_restarts, s);
        total += crb(S, for_crb.best, inst) * comm_rate(S, for_rate.best, inst);
    }
    return total / static_cast<double>(count);
}

IsacRewardCache::IsacRewardCache(IsacInstance inst, IsacRewardConfig cfg) : inst_(std::move(inst)), cfg_(cfg) {
    inst_.dims.validate();
    cfg_.validate();
}

IsacEvaluation IsacRewardCache::evaluate(const SubsetState& x, double n) {
    const Key key{x, n};
    {
        std::shared_lock lock(mutex_);
        if (auto it = table_.find(key); it != table_.end()) return it->second;
    }
    const IsacEvaluation ev = evaluate_isac(x, Preference(n), inst_, cfg_);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = table_.emplace(key, ev);
    if (inserted) ++misses_;
    return it->second;
}

std::size_t IsacRewardCache::size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
}

std::size_t IsacRewardCache::misses() const {
    std::shared_lock lock(mutex_);
    return misses_;
}

void IsacRewardCache::dump_csv(std::ostream& out) const {
    std::vector<std::pair<Key, IsacEvaluation>> rows;
    {
        std::shared_lock lock(mutex_);
        rows.assign(table_.begin(), table_.end());
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (!(a.first.mask == b.first.mask)) return a.first.mask < b.first.mask;
        return a.first.n < b.first.n;
    });
    out << "mask,n,crb,rate,reward\n";
    for (const auto& [key, ev] : rows) {
        out << key.mask.to_string() << ',' << format_number(key.n) << ',' << format_number(ev.crb) << ','
            << format_number(ev.rate) << ',' << format_number(ev.reward) << '\n';
    }
}

nlohmann::json to_json(const IsacInstance& inst) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(inst.H.size()) * 2);
    for (Eigen::Index i = 0; i < inst.H.rows(); ++i) {
        for (Eigen::Index j = 0; j < inst.H.cols(); ++j) {
            data.push_back(inst.H(i, j).real());
            data.push_back(inst.H(i, j).imag());
        }
    }
    return nlohmann::json{{"kind", "isac"},
                          {"nt", inst.dims.nt},
                          {"nr", inst.dims.nr},
                          {"ns", inst.dims.ns},
                          {"L", inst.dims.L},
                          {"seed", inst.seed},
                          {"H", data}};
}

IsacInstance isac_instance_from_json(const nlohmann::json& j) {
    IsacInstance inst;
    inst.dims.nt = j.at("nt").get<std::size_t>();
    inst.dims.nr = j.at("nr").get<std::size_t>();
    inst.dims.ns = j.at("ns").get<std::size_t>();
    inst.dims.L = j.at("L").get<std::size_t>();
    inst.dims.validate();
    inst.seed = j.value("seed", std::uint64_t{0});
    const auto data = j.at("H").get<std::vector<double>>();
    if (data.size() != 2 * inst.dims.ns * inst.dims.nt) {
        throw Error(ErrorCode::DimensionMismatch, "channel data must hold 2*ns*nt interleaved reals");
    }
    inst.H.resize(static_cast<Eigen::Index>(inst.dims.ns), static_cast<Eigen::Index>(inst.dims.nt));
    std::size_t p = 0;
    for (Eigen::Index i = 0; i < inst.H.rows(); ++i) {
        for (Eigen::Index c = 0; c < inst.H.cols(); ++c, p += 2) inst.H(i, c) = {data[p], data[p + 1]};
    }
    if (!inst.H.allFinite()) throw Error(ErrorCode::InvalidArgument, "channel has non-finite entries");
    return inst;
}

void save_instance(const IsacInstance& inst, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json(inst).dump(2) << '\n';
}

IsacInstance load_isac_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return isac_instance_from_json(nlohmann::json::parse(in));
}

} // namespace gflowss
