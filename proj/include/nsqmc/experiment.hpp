#pragma once

#include "nsqmc/initial_data.hpp"
#include "nsqmc/kl.hpp"
#include "nsqmc/lattice.hpp"
#include "nsqmc/solver.hpp"
#include "nsqmc/weights.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nsqmc {

struct ExperimentConfig {
    int mesh_m = 8;
    double dt = 0.1;
    double T = 0.2;
    int s = 64;
    std::vector<int> N_list;
    int R = 32;
    std::vector<FunctionalSpec> functionals; // empty = paper defaults G1, G2
    MaternParams covariance;
    double p_hat = 0.0;                      // 0 = fit from the b sequence
    int regress_lo = 0, regress_hi = 0;      // 0 = upper half of s_max
    double delta = 1.0 - 1.0 / 1.1;          // branch-1 lambda* = 0.55
    std::uint64_t base_seed = 0;
    double eta = 1e-7;
    int max_picard = 50;
    double assumed_k = 0.0;                  // reporting only
    std::string method = "qmc";              // qmc | mc | both
    int repeats = 1;
    int s_max = 0;                           // 0 = s
    int kl_rule_degree = 2;
    int node_cap = 5000;
    int threads = 0;
    bool diagnostics = false;                // per-sample ||exp Z_s||_H1 CSV
    std::string kl_cache;
    std::string z_cache_dir;
    std::string out_prefix = "nsqmc";

    int effective_s_max() const { return s_max > 0 ? s_max : s; }
    std::vector<FunctionalSpec> effective_functionals() const;
    void validate() const;
    /// Canonical key=value serialization of every semantic field.
    std::string canonical() const;
    std::uint64_t hash() const;
};

struct FunctionalResult {
    std::string functional;
    int N = 0;
    std::vector<double> Q_r;
    double Q_bar = 0.0;
    double std_error = 0.0;
};

struct ErrorReport {
    std::string method;
    std::vector<FunctionalResult> rows;
    std::map<std::string, double> rates;     // NaN when under 3 N values
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::map<int, std::uint64_t> z_hash;     // per N, QMC runs only
    bool partial = false;
    std::vector<std::array<double, 3>> h1_diagnostics; // (N, sample id, value)
};

/// Per-sample evaluator: parameter vector y -> one value per functional.
using SampleEvaluator =
    std::function<std::vector<double>(const Eigen::VectorXd& y)>;
/// Factory invoked once per worker thread; the returned evaluator owns the
/// worker's mutable state (factorizations etc.).
using EvaluatorFactory = std::function<SampleEvaluator()>;

/// Shared immutable pipeline: space, operators, KL basis, b sequence, POD
/// weights. Built once per run and shared read-only across workers.
class PdePipeline {
public:
    explicit PdePipeline(const ExperimentConfig& cfg);

    const TaylorHoodSpace& space() const { return *space_; }
    const FemOperators& ops() const { return *ops_; }
    const KLBasis& kl() const { return *kl_; }
    const BSequence& b() const { return b_; }
    const PODWeights& weights() const { return weights_; }
    double p_hat() const { return b_.p_hat; }
    double lambda_star() const { return weights_.lambda_star; }

    /// Evaluator returning one value per configured functional for the given
    /// truncation dimension; appends ||exp Z_s||_H1 when diagnostics are on.
    EvaluatorFactory evaluator_factory(int s_trunc) const;

    /// Generating vector for the given N (cache-aware), prefix-consistent
    /// across truncation dimensions by CBC construction.
    LatticeRule lattice_for(int N) const;

private:
    ExperimentConfig cfg_;
    std::shared_ptr<TaylorHoodSpace> space_;
    std::shared_ptr<FemOperators> ops_;
    std::shared_ptr<KLBasis> kl_;
    BSequence b_;
    PODWeights weights_;
};

/// Invoked with the completed rows when a run aborts mid-way, so partial
/// results can be flushed before the error propagates.
using PartialFlush = std::function<void(const ErrorReport&)>;

/// Quadrature engines with injectable evaluators (tests stub these).
ErrorReport run_qmc_with_evaluator(const ExperimentConfig& cfg,
                                   const EvaluatorFactory& factory,
                                   int n_functionals,
                                   const std::vector<std::string>& names,
                                   const PdePipeline* pipeline = nullptr,
                                   const PartialFlush& flush_partial = {});
ErrorReport run_mc_with_evaluator(const ExperimentConfig& cfg,
                                  const EvaluatorFactory& factory,
                                  int n_functionals,
                                  const std::vector<std::string>& names,
                                  const PartialFlush& flush_partial = {});

ErrorReport run_qmc(const ExperimentConfig& cfg);
ErrorReport run_mc(const ExperimentConfig& cfg);
/// Dispatch on cfg.method; returns one report per method.
std::vector<ErrorReport> run_experiment(const ExperimentConfig& cfg,
                                        const PartialFlush& flush_partial = {});

/// Least-squares slope of -log(e) against log(N).
double estimate_rate(const std::vector<std::pair<double, double>>& stderr_by_N);

/// Seed for (stream, N, r): mix of the base seed with the run coordinates;
/// stream 0 = QMC shifts, 1 = MC batches.
std::uint64_t derive_seed(std::uint64_t base_seed, int stream, int N, int r);

} // namespace nsqmc
