#pragma once

#include "nsqmc/kl.hpp"
#include "nsqmc/operators.hpp"
#include "nsqmc/space.hpp"
#include "nsqmc/state.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>

namespace nsqmc {

/// Truncated log-normal initial velocity: u0 = grad^perp exp(Z_s).
struct InitialFieldSpec {
    const KLBasis* kl = nullptr;
    int s = 0;
    Eigen::VectorXd y;

    void validate() const;
};

/// u0(x) = exp(Z_s(x)) * (-d2 Z_s, d1 Z_s) at one point.
Eigen::Vector2d eval_u0(const InitialFieldSpec& spec, const Eigen::Vector2d& x);

/// L2 projection into the discrete divergence-free subspace V_h, realized by
/// the mass saddle system with a pressure-mean multiplier. The factorization
/// is built once per space; load vectors use the degree-5 rule on the solver
/// mesh with the field sampled pointwise.
class InitialProjector {
public:
    InitialProjector(const TaylorHoodSpace& space, const FemOperators& ops);

    VelocityState project(
        const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const;

    /// Fast path for KL fields: P1 interpolation factors are cached, so each
    /// sample costs one nodal combination plus sparse products.
    VelocityState project(const InitialFieldSpec& spec) const;

    /// ||exp Z_s||_H1 for the sample, for per-sample diagnostics.
    double exp_field_h1_norm(const InitialFieldSpec& spec) const;

private:
    Eigen::VectorXd load_vector(
        const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const;
    VelocityState solve_saddle(const Eigen::VectorXd& load_interior) const;
    void ensure_plan(const KLBasis& kl) const;

    const TaylorHoodSpace& space_;
    const FemOperators& ops_;
    Eigen::SparseLU<SpMat> saddle_;
    std::vector<Eigen::Vector2d> quad_points_;
    std::vector<double> quad_weights_;
    std::vector<std::array<int, 6>> quad_nodes_;
    std::vector<std::array<double, 6>> quad_phi_;

    // Interpolation plan on the KL fine mesh (built on first use).
    mutable const KLBasis* plan_kl_ = nullptr;
    mutable SpMat plan_value_, plan_gx_, plan_gy_; // quad points x fine nodes
};

/// One-shot convenience wrapper around InitialProjector.
VelocityState project_initial(const InitialFieldSpec& spec,
                              const TaylorHoodSpace& space);

} // namespace nsqmc
