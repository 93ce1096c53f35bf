#include "nsqmc/cli.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/experiment.hpp"
#include "nsqmc/report.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace nsqmc {

namespace {

struct CliOptions {
    ExperimentConfig cfg;
    std::string n_csv;
    std::vector<std::string> functional_specs;
    std::string kl_out;
    std::string cbc_kl;
    std::string cbc_out;
    int cbc_N = 0;
    int cbc_s = 0;
    double theta_tol = 1e-12;
    std::string rates_summary;
};

std::vector<int> parse_n_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("invalid N list entry: " + item);
        }
    }
    return out;
}

FunctionalSpec parse_functional(const std::string& spec, int index) {
    // component,x,y,t with a 1-based component, e.g. "1,0.5,0.5,0.1"
    std::stringstream ss(spec);
    std::string item;
    std::vector<double> vals;
    while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    if (vals.size() != 4)
        throw ConfigError("functional must be component,x,y,t: " + spec);
    FunctionalSpec g;
    g.component = static_cast<int>(vals[0]) - 1;
    g.point = {vals[1], vals[2]};
    g.time = vals[3];
    g.name = "G" + std::to_string(index + 1);
    return g;
}

void add_covariance_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--nu", cfg.covariance.nu, "Matern smoothness (> 1/2)");
    cmd->add_option("--sigma2", cfg.covariance.sigma2, "Matern variance");
    cmd->add_option("--lambdaC", cfg.covariance.lambda_c, "Matern length scale");
}

int do_kl(const CliOptions& opt) {
    const int s_max = opt.cfg.effective_s_max();
    KLBasis kl = compute_kl(opt.cfg.mesh_m, opt.cfg.covariance, s_max,
                            opt.cfg.kl_rule_degree, opt.cfg.node_cap);
    save_kl(kl, opt.kl_out);
    BSequence b = b_sequence(kl);
    std::cout << "wrote " << opt.kl_out << " (fine mesh m=" << kl.fine_mesh.m
              << ", " << kl.s_max << " modes, mu_1=" << kl.mu[0]
              << ", b_1=" << b.b[0] << ")\n";
    return 0;
}

int do_cbc(const CliOptions& opt) {
    KLBasis kl = load_kl(opt.cbc_kl);
    if (opt.cbc_s > kl.s_max)
        throw ConfigError("cbc: s exceeds the cached basis (s_max=" +
                          std::to_string(kl.s_max) + ")");
    BSequence b = b_sequence(kl);
    double p_hat = opt.cfg.p_hat;
    if (p_hat == 0.0) {
        int lo = opt.cfg.regress_lo, hi = opt.cfg.regress_hi;
        if (lo == 0 || hi == 0) {
            hi = kl.s_max;
            lo = std::max(1, hi / 2);
            if (hi - lo < 8) lo = std::max(1, hi - 8);
        }
        p_hat = estimate_p(b, lo, hi);
    }
    const PODWeights weights =
        PODWeights::from_b(b.b.head(opt.cbc_s), p_hat, opt.cfg.delta);
    const std::vector<double> table =
        theta_table(opt.cbc_N, weights.a[0], opt.theta_tol);
    const LatticeRule rule = cbc_construct(opt.cbc_N, opt.cbc_s, weights, table,
                                           30, opt.cfg.threads);
    save_lattice(rule, opt.cbc_out);
    std::cout << "wrote " << opt.cbc_out << " (N=" << rule.N << ", s=" << opt.cbc_s
              << ", p_hat=" << p_hat << ", lambda*=" << weights.lambda_star
              << ")\n";
    return 0;
}

int do_run(CliOptions& opt) {
    opt.cfg.N_list = parse_n_list(opt.n_csv);
    for (size_t i = 0; i < opt.functional_specs.size(); ++i)
        opt.cfg.functionals.push_back(
            parse_functional(opt.functional_specs[i], static_cast<int>(i)));
    opt.cfg.validate();

    const auto flush = [&opt](const ErrorReport& partial) {
        export_report(partial, opt.cfg, opt.cfg.out_prefix + "_partial");
        std::cerr << "partial results flushed to prefix " << opt.cfg.out_prefix
                  << "_partial\n";
    };
    const std::vector<ErrorReport> reports = run_experiment(opt.cfg, flush);
    for (const auto& report : reports) {
        export_report(report, opt.cfg, opt.cfg.out_prefix);
        std::cout << report.method << ":";
        for (const auto& [name, rate] : report.rates)
            std::cout << ' ' << name << " rate=" << rate;
        std::cout << '\n';
    }
    return 0;
}

int do_rates(const CliOptions& opt) {
    const auto rows = import_summary(opt.rates_summary);
    for (const auto& [name, rate] : rates_from_summary(rows))
        std::cout << name << ',' << rate << '\n';
    return 0;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"Lattice-rule and Monte Carlo uncertainty quantification for "
                 "2D incompressible flow with log-normal random initial data"};
    app.require_subcommand(1);

    CliOptions opt;

    CLI::App* kl = app.add_subcommand("kl", "compute and cache KL eigenpairs");
    kl->add_option("--mesh", opt.cfg.mesh_m, "solver mesh subdivisions (fine mesh = 4x)")
        ->required();
    add_covariance_flags(kl, opt.cfg);
    kl->add_option("--s-max", opt.cfg.s_max, "modes to keep")->required();
    kl->add_option("--rule-degree", opt.cfg.kl_rule_degree,
                   "covariance quadrature degree (2 or 4)");
    kl->add_option("--node-cap", opt.cfg.node_cap, "fine-mesh node cap");
    kl->add_option("--out", opt.kl_out, "output cache file")->required();

    CLI::App* cbc = app.add_subcommand("cbc", "construct a generating vector");
    cbc->add_option("--N", opt.cbc_N, "lattice size")->required();
    cbc->add_option("--s", opt.cbc_s, "dimensions")->required();
    cbc->add_option("--kl", opt.cbc_kl, "KL cache file for the b sequence")
        ->required();
    cbc->add_option("--p-hat", opt.cfg.p_hat, "summability exponent override");
    cbc->add_option("--regress-lo", opt.cfg.regress_lo, "b regression start");
    cbc->add_option("--regress-hi", opt.cfg.regress_hi, "b regression end");
    cbc->add_option("--delta", opt.cfg.delta, "rate offset in (0,1/2]");
    cbc->add_option("--theta-tol", opt.theta_tol, "theta quadrature tolerance");
    cbc->add_option("--threads", opt.cfg.threads, "worker threads (0 = auto)");
    cbc->add_option("--out", opt.cbc_out, "generating vector file")->required();

    CLI::App* run = app.add_subcommand("run", "run the convergence study");
    run->set_config("--config", "", "read options from an INI file");
    run->add_option("--mesh", opt.cfg.mesh_m, "mesh subdivisions");
    run->add_option("--dt", opt.cfg.dt, "time step");
    run->add_option("--T", opt.cfg.T, "final time");
    run->add_option("--s", opt.cfg.s, "truncation dimension");
    run->add_option("--s-max", opt.cfg.s_max, "KL modes to compute (0 = s)");
    run->add_option("--N", opt.n_csv, "comma-separated lattice sizes")->required();
    run->add_option("--R", opt.cfg.R, "random shifts / batches");
    run->add_option("--repeats", opt.cfg.repeats, "independent repeats per N");
    run->add_option("--seed", opt.cfg.base_seed, "base seed")->required();
    run->add_option("--method", opt.cfg.method, "qmc | mc | both");
    add_covariance_flags(run, opt.cfg);
    run->add_option("--p-hat", opt.cfg.p_hat, "summability exponent override");
    run->add_option("--regress-lo", opt.cfg.regress_lo, "b regression start");
    run->add_option("--regress-hi", opt.cfg.regress_hi, "b regression end");
    run->add_option("--delta", opt.cfg.delta, "rate offset in (0,1/2]");
    run->add_option("--eta", opt.cfg.eta, "Picard tolerance");
    run->add_option("--max-picard", opt.cfg.max_picard, "Picard iteration cap");
    run->add_option("--assumed-k", opt.cfg.assumed_k,
                    "regularity k, recorded in the config snapshot only");
    run->add_option("--functional", opt.functional_specs,
                    "component,x,y,t (1-based component; repeatable)");
    run->add_option("--kl-cache", opt.cfg.kl_cache, "KL cache file");
    run->add_option("--z-cache", opt.cfg.z_cache_dir, "generating vector cache dir");
    run->add_option("--threads", opt.cfg.threads, "worker threads (0 = auto)");
    run->add_flag("--diagnostics", opt.cfg.diagnostics,
                  "write per-sample ||exp Z_s||_H1");
    run->add_option("--out", opt.cfg.out_prefix, "output file prefix");

    CLI::App* rates = app.add_subcommand("rates", "rate regression on a summary CSV");
    rates->add_option("--summary", opt.rates_summary, "summary CSV")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (kl->parsed()) return do_kl(opt);
        if (cbc->parsed()) return do_cbc(opt);
        if (run->parsed()) return do_run(opt);
        if (rates->parsed()) return do_rates(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}

int cli_main(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args);
}

} // namespace nsqmc
