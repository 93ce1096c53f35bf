#pragma once

#include "nsqmc/operators.hpp"
#include "nsqmc/space.hpp"
#include "nsqmc/state.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <string>
#include <vector>

namespace nsqmc {

struct SolverConfig {
    double dt = 0.1;
    double T = 1.0;
    double eta = 1e-7;      // Picard relative-L2 tolerance
    int max_picard = 50;
    bool include_convection = true;

    void validate() const;
    int n_steps() const;
};

struct Trajectory {
    std::vector<VelocityState> states; // time levels 0..l
    std::vector<int> picard_iteration_counts;
};

/// Point-evaluation functional: one velocity component at one point/time.
struct FunctionalSpec {
    int component = 0; // 0-based
    Eigen::Vector2d point{0.5, 0.5};
    double time = 0.1;
    std::string name = "G";
};

/// Backward-Euler stepper with Picard linearization of the convection term.
/// Each instance owns its factorization workspace; instances share the
/// immutable space/operators and run independently across samples.
class NavierStokesIntegrator {
public:
    NavierStokesIntegrator(const TaylorHoodSpace& space, const FemOperators& ops,
                           SolverConfig cfg);

    /// One implicit step from u_prev; Picard iterates until the relative L2
    /// change is at or below eta. Throws NonConvergence past max_picard.
    VelocityState step(const VelocityState& u_prev, int* iterations = nullptr);

    Trajectory integrate(const VelocityState& u0);

    const SolverConfig& config() const { return cfg_; }

private:
    SpMat assemble_saddle(const Eigen::VectorXd& advect_full) const;

    const TaylorHoodSpace& space_;
    const FemOperators& ops_;
    SolverConfig cfg_;
    int n_int_ = 0;
    bool pattern_ready_ = false;
    Eigen::SparseLU<SpMat> lu_;
};

VelocityState picard_step(const TaylorHoodSpace& space,
                          const VelocityState& u_prev, const SolverConfig& cfg);

Trajectory backward_euler(const TaylorHoodSpace& space, const VelocityState& u0,
                          const SolverConfig& cfg);

/// P2 interpolation of the requested component at the requested point/time.
double evaluate_G(const Trajectory& traj, const TaylorHoodSpace& space,
                  const FunctionalSpec& functional, double dt);

/// max_q |c(u, psi_q)| — discrete divergence residual of a state.
double divergence_residual(const FemOperators& ops, const VelocityState& state);

} // namespace nsqmc
