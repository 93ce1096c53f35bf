#include "nsqmc/experiment.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/normal.hpp"
#include "nsqmc/parallel.hpp"
#include "nsqmc/report.hpp"
#include "nsqmc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace nsqmc {

std::vector<FunctionalSpec> ExperimentConfig::effective_functionals() const {
    if (!functionals.empty()) return functionals;
    return {{0, {0.5, 0.5}, 0.1, "G1"}, {1, {0.5, 0.5}, 0.2, "G2"}};
}

void ExperimentConfig::validate() const {
    if (mesh_m < 1) throw ConfigError("config: mesh must be >= 1");
    SolverConfig scfg{dt, T, eta, max_picard};
    scfg.validate();
    if (s < 1) throw ConfigError("config: s must be >= 1");
    if (effective_s_max() < s) throw ConfigError("config: s_max below s");
    if (N_list.empty()) throw ConfigError("config: N list is empty");
    for (size_t i = 0; i < N_list.size(); ++i) {
        if (N_list[i] < 2) throw ConfigError("config: every N must be >= 2");
        if (i > 0 && N_list[i] <= N_list[i - 1])
            throw ConfigError("config: N list must be strictly increasing");
    }
    if (R < 2) throw ConfigError("config: R must be >= 2");
    if (repeats < 1) throw ConfigError("config: repeats must be >= 1");
    covariance.validate();
    if (p_hat != 0.0 && !(p_hat > 0.0 && p_hat <= 1.0))
        throw ConfigError("config: p_hat must lie in (0,1]");
    if (!(delta > 0.0 && delta <= 0.5))
        throw ConfigError("config: delta must lie in (0,1/2]");
    if (method != "qmc" && method != "mc" && method != "both")
        throw ConfigError("config: method must be qmc, mc or both");
    for (const auto& g : effective_functionals()) {
        if (g.component < 0 || g.component > 1)
            throw ConfigError("config: functional component must be 1 or 2");
        const double steps = g.time / dt;
        if (std::abs(steps - std::lround(steps)) > 1e-9)
            throw ConfigError("config: functional time " + std::to_string(g.time) +
                              " does not land on the time grid");
        if (g.time > T + 1e-12)
            throw ConfigError("config: functional time beyond T");
        if (g.point[0] < 0 || g.point[0] > 1 || g.point[1] < 0 || g.point[1] > 1)
            throw ConfigError("config: functional point outside the domain");
    }
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream out;
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "mesh=" << mesh_m << "\n";
    out << "dt=" << num(dt) << "\nT=" << num(T) << "\n";
    out << "s=" << s << "\ns_max=" << effective_s_max() << "\n";
    out << "N=";
    for (size_t i = 0; i < N_list.size(); ++i)
        out << (i ? "," : "") << N_list[i];
    out << "\nR=" << R << "\nrepeats=" << repeats << "\n";
    for (const auto& g : effective_functionals())
        out << "functional=" << g.name << ":" << (g.component + 1) << ","
            << num(g.point[0]) << "," << num(g.point[1]) << "," << num(g.time)
            << "\n";
    out << "nu=" << num(covariance.nu) << "\nsigma2=" << num(covariance.sigma2)
        << "\nlambda_c=" << num(covariance.lambda_c) << "\n";
    out << "p_hat=" << num(p_hat) << "\nregress_lo=" << regress_lo
        << "\nregress_hi=" << regress_hi << "\ndelta=" << num(delta) << "\n";
    out << "seed=" << base_seed << "\n";
    out << "eta=" << num(eta) << "\nmax_picard=" << max_picard << "\n";
    out << "assumed_k=" << num(assumed_k) << "\nmethod=" << method << "\n";
    out << "kl_rule_degree=" << kl_rule_degree << "\nnode_cap=" << node_cap
        << "\n";
    out << "diagnostics=" << (diagnostics ? 1 : 0) << "\n";
    return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
    // FNV-1a over the canonical serialization.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t base_seed, int stream, int N, int r) {
    return base_seed ^ mix_seed(0x6e73716d63ull + stream,
                                static_cast<std::uint64_t>(N),
                                static_cast<std::uint64_t>(r));
}

double estimate_rate(const std::vector<std::pair<double, double>>& stderr_by_N) {
    if (stderr_by_N.size() < 3)
        throw ConfigError("estimate_rate: need at least 3 (N, stderr) pairs");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, e] : stderr_by_N) {
        if (!(e > 0.0))
            throw ConfigError("estimate_rate: standard errors must be positive");
        const double x = std::log(n);
        const double y = -std::log(e);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double count = static_cast<double>(stderr_by_N.size());
    return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

PdePipeline::PdePipeline(const ExperimentConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    space_ = std::make_shared<TaylorHoodSpace>(build_space(build_mesh(cfg.mesh_m)));
    ops_ = std::make_shared<FemOperators>(assemble_operators(*space_));

    const int s_max = cfg_.effective_s_max();
    bool loaded = false;
    if (!cfg_.kl_cache.empty() && std::filesystem::exists(cfg_.kl_cache)) {
        KLBasis cached = load_kl(cfg_.kl_cache);
        if (cached.fine_mesh.m == 4 * cfg_.mesh_m && cached.s_max >= s_max &&
            cached.params.nu == cfg_.covariance.nu &&
            cached.params.sigma2 == cfg_.covariance.sigma2 &&
            cached.params.lambda_c == cfg_.covariance.lambda_c) {
            kl_ = std::make_shared<KLBasis>(std::move(cached));
            loaded = true;
        }
    }
    if (!loaded) {
        kl_ = std::make_shared<KLBasis>(compute_kl(cfg_.mesh_m, cfg_.covariance,
                                                   s_max, cfg_.kl_rule_degree,
                                                   cfg_.node_cap));
        if (!cfg_.kl_cache.empty()) save_kl(*kl_, cfg_.kl_cache);
    }

    b_ = b_sequence(*kl_);
    if (cfg_.p_hat > 0.0) {
        b_.p_hat = cfg_.p_hat;
        b_.j_lo = b_.j_hi = 0;
    } else {
        int lo = cfg_.regress_lo, hi = cfg_.regress_hi;
        if (lo == 0 || hi == 0) {
            hi = kl_->s_max;
            lo = std::max(1, hi / 2);
            if (hi - lo < 8)
                throw ConfigError(
                    "automatic p_hat estimation needs s_max >= 9; pass p_hat "
                    "explicitly for smaller bases");
        }
        b_.p_hat = estimate_p(b_, lo, hi);
        b_.j_lo = lo;
        b_.j_hi = hi;
    }
    weights_ = PODWeights::from_b(b_.b.head(cfg_.effective_s_max()), b_.p_hat,
                                  cfg_.delta);
}

LatticeRule PdePipeline::lattice_for(int N) const {
    const int s_max = cfg_.effective_s_max();
    std::string cache_path;
    if (!cfg_.z_cache_dir.empty()) {
        std::uint64_t wh = 0xcbf29ce484222325ull;
        auto mix = [&wh](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g,", v);
            for (const char* c = buf; *c; ++c) {
                wh ^= static_cast<unsigned char>(*c);
                wh *= 0x100000001b3ull;
            }
        };
        mix(weights_.lambda_star);
        for (double g : weights_.gamma_j) mix(g);
        for (double a : weights_.a) mix(a);
        char name[128];
        std::snprintf(name, sizeof name, "z_N%d_s%d_w%016llx.txt", N, s_max,
                      static_cast<unsigned long long>(wh));
        cache_path = (std::filesystem::path(cfg_.z_cache_dir) / name).string();
        if (std::filesystem::exists(cache_path)) {
            LatticeRule rule = load_lattice(cache_path);
            if (rule.N == N && static_cast<int>(rule.z.size()) == s_max)
                return rule;
        }
    }
    const std::vector<double> table = theta_table(N, weights_.a[0]);
    LatticeRule rule = cbc_construct(N, s_max, weights_, table, 30, cfg_.threads);
    if (!cache_path.empty()) {
        std::filesystem::create_directories(cfg_.z_cache_dir);
        save_lattice(rule, cache_path);
    }
    return rule;
}

EvaluatorFactory PdePipeline::evaluator_factory(int s_trunc) const {
    if (s_trunc > kl_->s_max)
        throw ConfigError("evaluator_factory: truncation above s_max");
    auto space = space_;
    auto ops = ops_;
    auto kl = kl_;
    const SolverConfig scfg{cfg_.dt, cfg_.T, cfg_.eta, cfg_.max_picard};
    const auto functionals = cfg_.effective_functionals();
    const double dt = cfg_.dt;
    const bool diagnostics = cfg_.diagnostics;

    return [space, ops, kl, scfg, functionals, dt, s_trunc, diagnostics]() {
        auto projector = std::make_shared<InitialProjector>(*space, *ops);
        auto integrator =
            std::make_shared<NavierStokesIntegrator>(*space, *ops, scfg);
        return [space, ops, kl, projector, integrator, functionals, dt, s_trunc,
                diagnostics](const Eigen::VectorXd& y) {
            InitialFieldSpec spec;
            spec.kl = kl.get();
            spec.s = s_trunc;
            spec.y = y.head(s_trunc);
            const VelocityState u0 = projector->project(spec);
            const Trajectory traj = integrator->integrate(u0);
            std::vector<double> values;
            values.reserve(functionals.size() + (diagnostics ? 1 : 0));
            for (const auto& g : functionals)
                values.push_back(evaluate_G(traj, *space, g, dt));
            if (diagnostics)
                values.push_back(projector->exp_field_h1_norm(spec));
            return values;
        };
    };
}

// ---------------------------------------------------------------------------
// Estimation engines
// ---------------------------------------------------------------------------

namespace {

/// Evaluate all samples of one (N, repeat) block in parallel. Y holds one
/// matrix of parameter rows per shift/batch. Results are written into
/// index-addressed slots so the outcome is identical for any worker count.
std::vector<double> evaluate_block(const std::vector<Eigen::MatrixXd>& Y,
                                   const EvaluatorFactory& factory,
                                   int n_values, int n_workers) {
    const int R = static_cast<int>(Y.size());
    const long N = Y.empty() ? 0 : Y[0].rows();
    std::vector<double> out(static_cast<size_t>(R) * N * n_values);

    const long total = R * N;
    const int workers = std::min<long>(resolve_workers(n_workers), total);
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto body = [&] {
        SampleEvaluator evaluator;
        try {
            evaluator = factory();
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error)
                error = std::make_exception_ptr(
                    NumericalError(std::string("worker setup failed: ") + e.what()));
            return;
        }
        for (;;) {
            const long idx = next.fetch_add(1, std::memory_order_relaxed);
            if (idx >= total) return;
            const long r = idx / N;
            const long i = idx % N;
            try {
                const std::vector<double> values =
                    evaluator(Y[r].row(i).transpose());
                if (static_cast<int>(values.size()) != n_values)
                    throw NumericalError("evaluator returned wrong value count");
                for (int k = 0; k < n_values; ++k)
                    out[(static_cast<size_t>(r) * N + i) * n_values + k] =
                        values[k];
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::make_exception_ptr(NumericalError(
                        "sample (shift " + std::to_string(r) + ", point " +
                        std::to_string(i + 1) + ") failed: " + e.what()));
                return;
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

struct BlockStats {
    std::vector<double> Q_r; // per shift
    double Q_bar = 0.0;
    double std_error = 0.0;
};

/// Shift means and the standard error sqrt(1/(R(R-1)) sum (Q_r - Qbar)^2).
BlockStats block_statistics(const std::vector<double>& values, int R, long N,
                            int n_values, int k) {
    BlockStats stats;
    stats.Q_r.resize(R);
    std::vector<double> row(N);
    for (int r = 0; r < R; ++r) {
        for (long i = 0; i < N; ++i)
            row[i] = values[(static_cast<size_t>(r) * N + i) * n_values + k];
        stats.Q_r[r] = pairwise_sum(row) / static_cast<double>(N);
    }
    stats.Q_bar = pairwise_sum(stats.Q_r) / R;
    double ss = 0.0;
    for (double q : stats.Q_r) ss += (q - stats.Q_bar) * (q - stats.Q_bar);
    stats.std_error = std::sqrt(ss / (static_cast<double>(R) * (R - 1)));
    return stats;
}

ErrorReport run_with_evaluator(const ExperimentConfig& cfg,
                               const EvaluatorFactory& factory,
                               int n_functionals,
                               const std::vector<std::string>& names, bool qmc,
                               const PdePipeline* pipeline,
                               const PartialFlush& flush_partial) {
    cfg.validate();
    if (qmc && !pipeline)
        throw ConfigError("run_qmc_with_evaluator: pipeline required for lattices");

    ErrorReport report;
    report.method = qmc ? "qmc" : "mc";
    report.seed = cfg.base_seed;
    report.config_hash = cfg.hash();

    const int n_values = n_functionals + (cfg.diagnostics ? 1 : 0);
    const int stream = qmc ? 0 : 1;

    for (int N : cfg.N_list) {
        std::optional<LatticeRule> rule;
        if (qmc) {
            rule = pipeline->lattice_for(N);
            std::uint64_t zh = 0xcbf29ce484222325ull;
            for (int zj : rule->z) {
                zh ^= static_cast<std::uint64_t>(zj);
                zh *= 0x100000001b3ull;
            }
            report.z_hash[N] = zh;
        }

        // repeats > 1 averages the standard error over disjoint shift sets.
        std::vector<std::vector<double>> rep_stderr(n_functionals);
        std::vector<std::vector<double>> rep_qbar(n_functionals);
        std::vector<std::vector<double>> all_Q(n_functionals);

        for (int rep = 0; rep < cfg.repeats; ++rep) {
            std::vector<Eigen::MatrixXd> Y(cfg.R);
            for (int r = 0; r < cfg.R; ++r) {
                const std::uint64_t seed =
                    derive_seed(cfg.base_seed, stream, N, rep * cfg.R + r);
                if (qmc) {
                    const Eigen::VectorXd shift = make_shift(cfg.s, seed);
                    Y[r] = map_to_gaussian(generate_points(*rule, shift, cfg.s));
                } else {
                    Xoshiro256 rng(seed);
                    Y[r].resize(N, cfg.s);
                    for (long i = 0; i < N; ++i)
                        for (int j = 0; j < cfg.s; ++j) {
                            double v = rng.uniform01();
                            if (v == 0.0) v = 0x1.0p-53;
                            Y[r](i, j) = inv_norm_cdf(v);
                        }
                }
            }

            std::vector<double> values;
            try {
                values = evaluate_block(Y, factory, n_values, cfg.threads);
            } catch (const NumericalError& e) {
                report.partial = true;
                if (flush_partial) flush_partial(report);
                throw NumericalError("N=" + std::to_string(N) + ": " + e.what());
            }

            for (int k = 0; k < n_functionals; ++k) {
                const BlockStats stats =
                    block_statistics(values, cfg.R, N, n_values, k);
                rep_stderr[k].push_back(stats.std_error);
                rep_qbar[k].push_back(stats.Q_bar);
                all_Q[k].insert(all_Q[k].end(), stats.Q_r.begin(),
                                stats.Q_r.end());
            }
            if (cfg.diagnostics)
                for (int r = 0; r < cfg.R; ++r)
                    for (long i = 0; i < N; ++i)
                        report.h1_diagnostics.push_back(
                            {static_cast<double>(N),
                             static_cast<double>(rep) * cfg.R * N + r * N + i,
                             values[(static_cast<size_t>(r) * N + i) * n_values +
                                    n_functionals]});
        }

        for (int k = 0; k < n_functionals; ++k) {
            FunctionalResult row;
            row.functional = names[k];
            row.N = N;
            row.Q_r = all_Q[k];
            row.Q_bar = pairwise_sum(rep_qbar[k]) / cfg.repeats;
            row.std_error = pairwise_sum(rep_stderr[k]) / cfg.repeats;
            report.rows.push_back(std::move(row));
        }
    }

    for (int k = 0; k < n_functionals; ++k) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : report.rows)
            if (row.functional == names[k] && row.std_error > 0.0)
                pts.emplace_back(row.N, row.std_error);
        report.rates[names[k]] =
            pts.size() >= 3 && pts.size() == cfg.N_list.size()
                ? estimate_rate(pts)
                : std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

} // namespace

ErrorReport run_qmc_with_evaluator(const ExperimentConfig& cfg,
                                   const EvaluatorFactory& factory,
                                   int n_functionals,
                                   const std::vector<std::string>& names,
                                   const PdePipeline* pipeline,
                                   const PartialFlush& flush_partial) {
    return run_with_evaluator(cfg, factory, n_functionals, names, true, pipeline,
                              flush_partial);
}

ErrorReport run_mc_with_evaluator(const ExperimentConfig& cfg,
                                  const EvaluatorFactory& factory,
                                  int n_functionals,
                                  const std::vector<std::string>& names,
                                  const PartialFlush& flush_partial) {
    return run_with_evaluator(cfg, factory, n_functionals, names, false, nullptr,
                              flush_partial);
}

namespace {

std::vector<std::string> functional_names(const ExperimentConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& g : cfg.effective_functionals()) names.push_back(g.name);
    return names;
}

} // namespace

ErrorReport run_qmc(const ExperimentConfig& cfg) {
    const PdePipeline pipeline(cfg);
    return run_qmc_with_evaluator(
        cfg, pipeline.evaluator_factory(cfg.s),
        static_cast<int>(cfg.effective_functionals().size()),
        functional_names(cfg), &pipeline, {});
}

ErrorReport run_mc(const ExperimentConfig& cfg) {
    const PdePipeline pipeline(cfg);
    return run_mc_with_evaluator(
        cfg, pipeline.evaluator_factory(cfg.s),
        static_cast<int>(cfg.effective_functionals().size()),
        functional_names(cfg));
}

std::vector<ErrorReport> run_experiment(const ExperimentConfig& cfg,
                                        const PartialFlush& flush_partial) {
    cfg.validate();
    const PdePipeline pipeline(cfg);
    const int n_funcs = static_cast<int>(cfg.effective_functionals().size());
    const auto names = functional_names(cfg);
    std::vector<ErrorReport> reports;
    if (cfg.method == "qmc" || cfg.method == "both")
        reports.push_back(run_qmc_with_evaluator(cfg,
                                                 pipeline.evaluator_factory(cfg.s),
                                                 n_funcs, names, &pipeline,
                                                 flush_partial));
    if (cfg.method == "mc" || cfg.method == "both")
        reports.push_back(run_mc_with_evaluator(cfg,
                                                pipeline.evaluator_factory(cfg.s),
                                                n_funcs, names, flush_partial));
    return reports;
}

} // namespace nsqmc
