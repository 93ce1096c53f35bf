#include "nsqmc/errors.hpp"
#include "nsqmc/experiment.hpp"
#include "nsqmc/lattice.hpp"
#include "nsqmc/normal.hpp"
#include "nsqmc/report.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace nsqmc;

namespace {

ExperimentConfig config_from_kwargs(const py::dict& kw) {
    ExperimentConfig cfg;
    for (auto item : kw) {
        const std::string key = py::str(item.first);
        if (key == "mesh") cfg.mesh_m = item.second.cast<int>();
        else if (key == "dt") cfg.dt = item.second.cast<double>();
        else if (key == "T") cfg.T = item.second.cast<double>();
        else if (key == "s") cfg.s = item.second.cast<int>();
        else if (key == "s_max") cfg.s_max = item.second.cast<int>();
        else if (key == "N") cfg.N_list = item.second.cast<std::vector<int>>();
        else if (key == "R") cfg.R = item.second.cast<int>();
        else if (key == "seed") cfg.base_seed = item.second.cast<std::uint64_t>();
        else if (key == "method") cfg.method = item.second.cast<std::string>();
        else if (key == "nu") cfg.covariance.nu = item.second.cast<double>();
        else if (key == "sigma2") cfg.covariance.sigma2 = item.second.cast<double>();
        else if (key == "lambda_c") cfg.covariance.lambda_c = item.second.cast<double>();
        else if (key == "p_hat") cfg.p_hat = item.second.cast<double>();
        else if (key == "delta") cfg.delta = item.second.cast<double>();
        else if (key == "eta") cfg.eta = item.second.cast<double>();
        else if (key == "repeats") cfg.repeats = item.second.cast<int>();
        else if (key == "threads") cfg.threads = item.second.cast<int>();
        else if (key == "out") cfg.out_prefix = item.second.cast<std::string>();
        else throw ConfigError("unknown config key: " + key);
    }
    return cfg;
}

py::dict report_to_dict(const ErrorReport& report) {
    py::dict out;
    out["method"] = report.method;
    py::list rows;
    for (const auto& row : report.rows) {
        py::dict r;
        r["functional"] = row.functional;
        r["N"] = row.N;
        r["Q_r"] = row.Q_r;
        r["Q_bar"] = row.Q_bar;
        r["std_error"] = row.std_error;
        rows.append(r);
    }
    out["rows"] = rows;
    out["rates"] = report.rates;
    out["seed"] = report.seed;
    return out;
}

} // namespace

PYBIND11_MODULE(_nsqmc, m) {
    m.doc() = "Lattice-rule / Monte Carlo UQ pipeline for 2D incompressible "
              "flow with log-normal random initial data";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<NumericalError>(m, "NumericalError");

    m.def("inv_norm_cdf", &inv_norm_cdf, py::arg("v"));
    m.def("norm_cdf", &norm_cdf, py::arg("x"));
    m.def("euler_totient", &euler_totient, py::arg("n"));
    m.def("riemann_zeta", &riemann_zeta, py::arg("x"));
    m.def("rho_factor", &rho_factor, py::arg("lambda_"), py::arg("a"));
    m.def("choose_lambda", &choose_lambda, py::arg("p_hat"), py::arg("delta"));
    m.def("choose_a", &choose_a, py::arg("lambda_star"));
    m.def("theta_kernel", &theta_kernel, py::arg("f"), py::arg("a"),
          py::arg("tol") = 1e-12);

    m.def(
        "matern_cov",
        [](double r, double nu, double sigma2, double lambda_c) {
            return matern_cov(r, {nu, sigma2, lambda_c});
        },
        py::arg("r"), py::arg("nu") = 2.5, py::arg("sigma2") = 1.0,
        py::arg("lambda_c") = 1.0);

    m.def(
        "mesh_counts",
        [](int mesh_m) {
            const TriMesh mesh = build_mesh(mesh_m);
            return py::make_tuple(mesh.n_vertices(), mesh.n_triangles(),
                                  mesh.n_edges());
        },
        py::arg("m"), "(vertices, triangles, edges) of the structured mesh");

    m.def(
        "space_dims",
        [](int mesh_m) {
            const TaylorHoodSpace space = build_space(build_mesh(mesh_m));
            return py::make_tuple(space.n_velocity_dofs, space.n_pressure_dofs);
        },
        py::arg("m"), "(velocity dofs, pressure dofs) of the Taylor-Hood pair");

    m.def(
        "kl_eigenvalues",
        [](int mesh_m, double nu, double sigma2, double lambda_c, int s) {
            const KLBasis kl = compute_kl(mesh_m, {nu, sigma2, lambda_c}, s);
            return kl.mu;
        },
        py::arg("mesh"), py::arg("nu"), py::arg("sigma2"), py::arg("lambda_c"),
        py::arg("s"));

    m.def(
        "cbc",
        [](int N, int s, const Eigen::VectorXd& b, double p_hat, double delta) {
            const PODWeights weights = PODWeights::from_b(b.head(s), p_hat, delta);
            const std::vector<double> table = theta_table(N, weights.a[0]);
            return cbc_construct(N, s, weights, table).z;
        },
        py::arg("N"), py::arg("s"), py::arg("b"), py::arg("p_hat"),
        py::arg("delta") = 1.0 - 1.0 / 1.1,
        "generating vector from a b sequence");

    m.def(
        "lattice_points",
        [](int N, const std::vector<int>& z, const Eigen::VectorXd& shift) {
            LatticeRule rule{N, z};
            return generate_points(rule, shift, static_cast<int>(shift.size()));
        },
        py::arg("N"), py::arg("z"), py::arg("shift"));

    m.def(
        "run",
        [](const py::kwargs& kw) {
            const ExperimentConfig cfg = config_from_kwargs(kw);
            py::list out;
            for (const auto& report : run_experiment(cfg))
                out.append(report_to_dict(report));
            return out;
        },
        "run the experiment; keyword arguments mirror the CLI flags");
}
