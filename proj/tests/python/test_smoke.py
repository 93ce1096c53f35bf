"""Smoke tests for the python module (built by CMake as _nsqmc)."""

import math
import os
import sys

MODULE_DIR = os.environ.get("NSQMC_MODULE_DIR")
if MODULE_DIR:
    sys.path.insert(0, MODULE_DIR)

import pytest

nsqmc = pytest.importorskip("_nsqmc")


def test_mesh_and_space_counts():
    assert nsqmc.mesh_counts(1) == (4, 2, 5)
    assert nsqmc.mesh_counts(16) == (289, 512, 800)
    assert nsqmc.space_dims(1) == (18, 4)
    assert nsqmc.space_dims(16) == (2178, 289)


def test_scalar_kernels():
    assert nsqmc.inv_norm_cdf(0.5) == 0.0
    assert abs(nsqmc.inv_norm_cdf(0.975) - 1.959963985) < 1e-9
    assert nsqmc.euler_totient(1009) == 1008
    assert abs(nsqmc.riemann_zeta(2.0) - math.pi**2 / 6) < 1e-12
    assert abs(nsqmc.matern_cov(0.0, nu=2.5, sigma2=0.25) - 0.25) < 1e-14
    # nu = 1/2 closed form
    assert abs(nsqmc.matern_cov(1.0, nu=0.5) - math.exp(-math.sqrt(2))) < 1e-10
    with pytest.raises(Exception):
        nsqmc.inv_norm_cdf(1.5)


def test_lambda_and_a():
    assert abs(nsqmc.choose_lambda(0.7198, 0.05) - 0.7198 / 1.2802) < 1e-15
    assert abs(nsqmc.choose_a(1.0) - math.sqrt(0.125)) < 1e-15
    assert abs(nsqmc.theta_kernel(0.5, math.sqrt(0.125)) + 0.317523702932) < 1e-9


def test_kl_and_cbc():
    mu = nsqmc.kl_eigenvalues(mesh=2, nu=2.5, sigma2=1.0, lambda_c=1.0, s=8)
    assert len(mu) == 8
    assert all(mu[i] >= mu[i + 1] >= 0 for i in range(7))
    assert sum(mu) <= 1.0 + 1e-6

    z = nsqmc.cbc(N=7, s=3, b=[0.9, 0.5, 0.3], p_hat=0.75)
    assert len(z) == 3
    assert all(1 <= zj <= 6 for zj in z)

    pts = nsqmc.lattice_points(4, [1, 3], [0.5, 0.25])
    assert pts.shape == (4, 2)
    assert abs(pts[0, 0] - 0.75) < 1e-15
    assert abs(pts[0, 1] - 0.0) < 1e-15


def test_tiny_run():
    reports = nsqmc.run(mesh=2, dt=0.1, T=0.2, s=4, s_max=16, N=[7, 13], R=2,
                        seed=11, method="both", sigma2=0.25)
    assert len(reports) == 2
    assert reports[0]["method"] == "qmc"
    assert reports[1]["method"] == "mc"
    for report in reports:
        assert len(report["rows"]) == 4  # 2 functionals x 2 N values
        for row in report["rows"]:
            assert math.isfinite(row["Q_bar"])
            assert row["std_error"] >= 0.0
    # identical seed reproduces the numbers exactly
    again = nsqmc.run(mesh=2, dt=0.1, T=0.2, s=4, s_max=16, N=[7, 13], R=2,
                      seed=11, method="both", sigma2=0.25)
    for a, b in zip(reports, again):
        for ra, rb in zip(a["rows"], b["rows"]):
            assert ra["Q_r"] == rb["Q_r"]
