#include "nsqmc/errors.hpp"
#include "nsqmc/initial_data.hpp"
#include "nsqmc/kl.hpp"
#include "nsqmc/rng.hpp"
#include "nsqmc/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace nsqmc;

namespace {

/// Random member of the discrete divergence-free subspace.
VelocityState random_div_free_state(const TaylorHoodSpace& space,
                                    const FemOperators& ops,
                                    const InitialProjector& projector,
                                    Xoshiro256& rng, double scale = 1.0) {
    Eigen::VectorXd raw(space.n_velocity_dofs);
    for (long i = 0; i < raw.size(); ++i) raw[i] = scale * rng.uniform_sym();
    for (int dof : space.dirichlet_velocity_dofs) raw[dof] = 0.0;
    return projector.project(
        [&](const Eigen::Vector2d& x) { return space.evaluate_velocity(raw, x); });
}

} // namespace

TEST_CASE("solver config validation") {
    CHECK_THROWS_AS((SolverConfig{0.0, 1.0}.validate()), ConfigError);
    CHECK_THROWS_AS((SolverConfig{0.1, 0.05}.validate()), ConfigError);
    CHECK_THROWS_AS((SolverConfig{0.3, 1.0}.validate()), ConfigError); // off-grid T
    SolverConfig ok{0.1, 1.0};
    ok.validate();
    CHECK(ok.n_steps() == 10);
}

TEST_CASE("zero initial state stays zero") {
    const TaylorHoodSpace space = build_space(build_mesh(4));
    VelocityState u0;
    u0.u = Eigen::VectorXd::Zero(space.n_velocity_dofs);
    u0.p = Eigen::VectorXd::Zero(space.n_pressure_dofs);
    const Trajectory traj = backward_euler(space, u0, SolverConfig{0.1, 0.3});
    CHECK(traj.states.size() == 4);
    for (const auto& state : traj.states)
        CHECK(state.u.cwiseAbs().maxCoeff() == 0.0);
    for (int iters : traj.picard_iteration_counts) CHECK(iters == 1);
}

TEST_CASE("Stokes limit: one productive iteration plus the convergence check") {
    const TaylorHoodSpace space = build_space(build_mesh(4));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    Xoshiro256 rng(3);
    const VelocityState u0 = random_div_free_state(space, ops, projector, rng);

    SolverConfig cfg{0.1, 0.1};
    cfg.include_convection = false;
    NavierStokesIntegrator integrator(space, ops, cfg);
    int iters = 0;
    const VelocityState next = integrator.step(u0, &iters);
    CHECK(iters == 2);

    // matches a hand-built linear solve of the same saddle system
    SolverConfig cfg_full{0.1, 0.1};
    NavierStokesIntegrator with_convection(space, ops, cfg_full);
    int iters_full = 0;
    const VelocityState next_full = with_convection.step(u0, &iters_full);
    CHECK(iters_full >= 2);
    CHECK((next.u - next_full.u).cwiseAbs().maxCoeff() < 0.1); // mild advection
}

TEST_CASE("Picard residual oracle: converged state solves the nonlinear system") {
    const TaylorHoodSpace space = build_space(build_mesh(8));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    Xoshiro256 rng(41);
    const VelocityState u0 = random_div_free_state(space, ops, projector, rng);

    SolverConfig cfg{0.1, 0.1};
    NavierStokesIntegrator integrator(space, ops, cfg);
    const VelocityState u1 = integrator.step(u0);

    // residual of the momentum rows with the convection matrix rebuilt at u1
    const Eigen::VectorXd u1_int = restrict_interior(space, u1.u);
    const Eigen::VectorXd u0_int = restrict_interior(space, u0.u);
    const SpMat conv = assemble_convection_interior(space, u1.u);
    Eigen::VectorXd residual =
        (ops.mass_interior * (u1_int - u0_int)) / cfg.dt +
        ops.stiffness_interior * u1_int + conv * u1_int +
        ops.divergence_interior.transpose() * u1.p;
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("energy stability and divergence residual along trajectories") {
    const TaylorHoodSpace space = build_space(build_mesh(4));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    Xoshiro256 rng(8);

    for (int trial = 0; trial < 3; ++trial) {
        const VelocityState u0 = random_div_free_state(space, ops, projector, rng);
        NavierStokesIntegrator integrator(space, ops, SolverConfig{0.1, 0.5});
        const Trajectory traj = integrator.integrate(u0);

        const double e0 = u0.u.dot(ops.mass_velocity * u0.u);
        double dissipation = 0.0;
        for (size_t j = 1; j < traj.states.size(); ++j) {
            const auto& u = traj.states[j].u;
            dissipation += 0.1 * u.dot(ops.stiffness_velocity * u);
            const double energy = u.dot(ops.mass_velocity * u);
            CHECK(energy + dissipation <= e0 * (1.0 + 1e-8));
            CHECK(divergence_residual(ops, traj.states[j]) <= 1e-10);
        }
    }
}

TEST_CASE("first-order self-convergence in the time step") {
    // Steps small enough that the contributing Stokes modes see
    // lambda * dt <= O(1); larger steps sit in the stiff regime where the
    // consecutive-difference ratios exceed 2 by design of backward Euler.
    const TaylorHoodSpace space = build_space(build_mesh(4));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    const VelocityState u0 = projector.project([](const Eigen::Vector2d& x) {
        const double sx = std::sin(M_PI * x[0]), cx = std::cos(M_PI * x[0]);
        const double sy = std::sin(M_PI * x[1]), cy = std::cos(M_PI * x[1]);
        return Eigen::Vector2d(-2.0 * M_PI * sx * sx * sy * cy,
                               2.0 * M_PI * sx * cx * sy * sy);
    });

    const double T = 0.1;
    std::vector<Eigen::VectorXd> finals;
    for (double dt : {0.00625, 0.003125, 0.0015625, 0.00078125}) {
        SolverConfig cfg{dt, T};
        cfg.eta = 1e-9;
        NavierStokesIntegrator integrator(space, ops, cfg);
        finals.push_back(integrator.integrate(u0).states.back().u);
    }
    auto l2 = [&](const Eigen::VectorXd& v) {
        return std::sqrt(v.dot(ops.mass_velocity * v));
    };
    const double d01 = l2(finals[0] - finals[1]);
    const double d12 = l2(finals[1] - finals[2]);
    const double d23 = l2(finals[2] - finals[3]);
    CHECK(d01 / d12 >= 1.6);
    CHECK(d01 / d12 <= 2.4);
    CHECK(d12 / d23 >= 1.6);
    CHECK(d12 / d23 <= 2.4);
}

TEST_CASE("non-convergence is surfaced with context") {
    const TaylorHoodSpace space = build_space(build_mesh(4));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    Xoshiro256 rng(12);
    const VelocityState u0 =
        random_div_free_state(space, ops, projector, rng, 5.0);

    SolverConfig cfg{0.1, 0.1};
    cfg.max_picard = 1;
    NavierStokesIntegrator integrator(space, ops, cfg);
    try {
        integrator.step(u0);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.iterations == 1);
        CHECK(e.last_residual > cfg.eta);
        CHECK(e.time_index == 1);
    }
}

TEST_CASE("evaluate_G: interpolation contract") {
    const TaylorHoodSpace space = build_space(build_mesh(8));
    const double dt = 0.1;

    Trajectory traj;
    VelocityState zero;
    zero.u = Eigen::VectorXd::Zero(space.n_velocity_dofs);
    zero.p = Eigen::VectorXd::Zero(space.n_pressure_dofs);
    traj.states = {zero, zero};

    CHECK(evaluate_G(traj, space, FunctionalSpec{0, {0.5, 0.5}, 0.1}, dt) == 0.0);

    // inject a quadratic (P2-exact) field as the state at t = 0.1
    Eigen::VectorXd coeffs(space.n_velocity_dofs);
    auto f = [](const Eigen::Vector2d& x) {
        return Eigen::Vector2d(x[0] * x[1] + 0.25, x[1] * x[1] - x[0]);
    };
    for (int k = 0; k < space.n_p2_nodes; ++k) {
        const Eigen::Vector2d v = f(space.p2_node_coord(k));
        coeffs[2 * k] = v[0];
        coeffs[2 * k + 1] = v[1];
    }
    traj.states[1].u = coeffs;
    const Eigen::Vector2d pt{0.37, 0.81};
    CHECK(evaluate_G(traj, space, FunctionalSpec{0, pt, 0.1}, dt) ==
          doctest::Approx(f(pt)[0]).epsilon(1e-13));
    CHECK(evaluate_G(traj, space, FunctionalSpec{1, pt, 0.1}, dt) ==
          doctest::Approx(f(pt)[1]).epsilon(1e-13));

    // at a vertex the value is the stored nodal coefficient
    const int vertex = 4 * 9 + 4; // (1/2, 1/2) on m=8
    CHECK(evaluate_G(traj, space, FunctionalSpec{0, {0.5, 0.5}, 0.1}, dt) ==
          coeffs[2 * vertex]);

    CHECK_THROWS_AS(evaluate_G(traj, space, FunctionalSpec{0, {0.5, 0.5}, 0.9}, dt),
                    ConfigError);
    CHECK_THROWS_AS(evaluate_G(traj, space, FunctionalSpec{0, {1.5, 0.5}, 0.1}, dt),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate_G(traj, space, FunctionalSpec{0, {0.5, 0.5}, 0.13}, dt),
                    ConfigError);
}

TEST_CASE("determinism: identical config and state give identical trajectories") {
    const TaylorHoodSpace space = build_space(build_mesh(4));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    Xoshiro256 rng(77);
    const VelocityState u0 = random_div_free_state(space, ops, projector, rng);

    NavierStokesIntegrator a(space, ops, SolverConfig{0.1, 0.3});
    NavierStokesIntegrator b(space, ops, SolverConfig{0.1, 0.3});
    const Trajectory ta = a.integrate(u0);
    const Trajectory tb = b.integrate(u0);
    for (size_t j = 0; j < ta.states.size(); ++j) {
        CHECK((ta.states[j].u - tb.states[j].u).cwiseAbs().maxCoeff() == 0.0);
        CHECK((ta.states[j].p - tb.states[j].p).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("Picard iteration counts stay modest at desk scale") {
    const TaylorHoodSpace space = build_space(build_mesh(8));
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    const KLBasis kl = compute_kl(8, MaternParams{2.5, 0.25, 1.0}, 16);
    Xoshiro256 rng(55);
    Eigen::VectorXd y(16);
    for (int j = 0; j < 16; ++j) y[j] = rng.uniform_sym();
    const VelocityState u0 = projector.project(InitialFieldSpec{&kl, 16, y});
    NavierStokesIntegrator integrator(space, ops, SolverConfig{0.1, 0.5});
    const Trajectory traj = integrator.integrate(u0);
    for (int iters : traj.picard_iteration_counts) CHECK(iters <= 25);
}
