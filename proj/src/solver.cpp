#include "nsqmc/solver.hpp"

#include "nsqmc/errors.hpp"

#include <cmath>
#include <limits>

namespace nsqmc {

void SolverConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("SolverConfig: dt must be positive");
    if (!(T >= dt)) throw ConfigError("SolverConfig: T must be at least dt");
    if (!(eta > 0.0)) throw ConfigError("SolverConfig: eta must be positive");
    if (max_picard < 1) throw ConfigError("SolverConfig: max_picard must be >= 1");
    const int l = n_steps();
    if (std::abs(l * dt - T) > 1e-12)
        throw ConfigError("SolverConfig: T is not an integer multiple of dt");
}

int SolverConfig::n_steps() const {
    return static_cast<int>(std::lround(T / dt));
}

NavierStokesIntegrator::NavierStokesIntegrator(const TaylorHoodSpace& space,
                                               const FemOperators& ops,
                                               SolverConfig cfg)
    : space_(space), ops_(ops), cfg_(cfg) {
    cfg_.validate();
    n_int_ = static_cast<int>(space.interior_velocity_dofs.size());
}

SpMat NavierStokesIntegrator::assemble_saddle(
    const Eigen::VectorXd& advect_full) const {
    const int n_p = space_.n_pressure_dofs;
    const int dim = n_int_ + n_p + 1;
    const double inv_dt = 1.0 / cfg_.dt;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(ops_.mass_interior.nonZeros() + ops_.stiffness_interior.nonZeros() +
                  2 * ops_.divergence_interior.nonZeros() + 2 * n_p +
                  space_.mesh.n_triangles() * 72);
    for (int k = 0; k < ops_.mass_interior.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops_.mass_interior, k); it; ++it)
            trips.emplace_back(it.row(), it.col(), inv_dt * it.value());
    for (int k = 0; k < ops_.stiffness_interior.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops_.stiffness_interior, k); it; ++it)
            trips.emplace_back(it.row(), it.col(), it.value());
    if (cfg_.include_convection) {
        const SpMat conv = assemble_convection_interior(space_, advect_full);
        for (int k = 0; k < conv.outerSize(); ++k)
            for (SpMat::InnerIterator it(conv, k); it; ++it)
                trips.emplace_back(it.row(), it.col(), it.value());
    }
    for (int k = 0; k < ops_.divergence_interior.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops_.divergence_interior, k); it; ++it) {
            trips.emplace_back(n_int_ + it.row(), it.col(), it.value());
            trips.emplace_back(it.col(), n_int_ + it.row(), it.value());
        }
    for (int q = 0; q < n_p; ++q) {
        trips.emplace_back(n_int_ + q, n_int_ + n_p, ops_.pressure_integral[q]);
        trips.emplace_back(n_int_ + n_p, n_int_ + q, ops_.pressure_integral[q]);
    }
    SpMat saddle(dim, dim);
    saddle.setFromTriplets(trips.begin(), trips.end());
    return saddle;
}

VelocityState NavierStokesIntegrator::step(const VelocityState& u_prev,
                                           int* iterations) {
    const int n_p = space_.n_pressure_dofs;
    const double inv_dt = 1.0 / cfg_.dt;

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_int_ + n_p + 1);
    rhs.head(n_int_) =
        inv_dt * (ops_.mass_interior * restrict_interior(space_, u_prev.u));

    // Initial guess: solution from the previous time step.
    Eigen::VectorXd iterate_full = u_prev.u;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_p);
    double rel_change = std::numeric_limits<double>::infinity();

    for (int k = 1; k <= cfg_.max_picard; ++k) {
        const SpMat saddle = assemble_saddle(iterate_full);
        if (!pattern_ready_) {
            lu_.analyzePattern(saddle);
            pattern_ready_ = true;
        }
        lu_.factorize(saddle);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("NavierStokesIntegrator: LU factorization failed");
        const Eigen::VectorXd sol = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success)
            throw NumericalError("NavierStokesIntegrator: saddle solve failed");

        const Eigen::VectorXd next_full = expand_interior(space_, sol.head(n_int_));
        const Eigen::VectorXd diff = next_full - iterate_full;
        const double diff_norm = std::sqrt(diff.dot(ops_.mass_velocity * diff));
        const double next_norm =
            std::sqrt(next_full.dot(ops_.mass_velocity * next_full));
        rel_change = next_norm > 0.0 ? diff_norm / next_norm : diff_norm;

        iterate_full = next_full;
        p = sol.segment(n_int_, n_p);
        if (rel_change <= cfg_.eta) {
            if (iterations) *iterations = k;
            VelocityState out;
            out.u = std::move(iterate_full);
            out.p = std::move(p);
            out.time_index = u_prev.time_index + 1;
            return out;
        }
    }
    throw NonConvergence(cfg_.max_picard, rel_change, u_prev.time_index + 1,
                         "Picard iteration did not converge within " +
                             std::to_string(cfg_.max_picard) +
                             " iterations (last relative change " +
                             std::to_string(rel_change) + ") at time index " +
                             std::to_string(u_prev.time_index + 1));
}

Trajectory NavierStokesIntegrator::integrate(const VelocityState& u0) {
    Trajectory traj;
    const int l = cfg_.n_steps();
    traj.states.reserve(l + 1);
    traj.states.push_back(u0);
    traj.states.front().time_index = 0;
    for (int j = 0; j < l; ++j) {
        int iters = 0;
        traj.states.push_back(step(traj.states.back(), &iters));
        traj.picard_iteration_counts.push_back(iters);
    }
    return traj;
}

VelocityState picard_step(const TaylorHoodSpace& space,
                          const VelocityState& u_prev, const SolverConfig& cfg) {
    const FemOperators ops = assemble_operators(space);
    NavierStokesIntegrator integrator(space, ops, cfg);
    return integrator.step(u_prev);
}

Trajectory backward_euler(const TaylorHoodSpace& space, const VelocityState& u0,
                          const SolverConfig& cfg) {
    const FemOperators ops = assemble_operators(space);
    NavierStokesIntegrator integrator(space, ops, cfg);
    return integrator.integrate(u0);
}

double evaluate_G(const Trajectory& traj, const TaylorHoodSpace& space,
                  const FunctionalSpec& functional, double dt) {
    if (functional.component < 0 || functional.component > 1)
        throw ConfigError("evaluate_G: component must be 0 or 1");
    const double steps = functional.time / dt;
    const int index = static_cast<int>(std::lround(steps));
    if (std::abs(steps - index) > 1e-9)
        throw ConfigError("evaluate_G: functional time does not land on the grid");
    if (index < 0 || index >= static_cast<int>(traj.states.size()))
        throw ConfigError("evaluate_G: time index beyond the trajectory");
    const Eigen::Vector2d value =
        space.evaluate_velocity(traj.states[index].u, functional.point);
    return value[functional.component];
}

double divergence_residual(const FemOperators& ops, const VelocityState& state) {
    return (ops.divergence * state.u).cwiseAbs().maxCoeff();
}

} // namespace nsqmc
