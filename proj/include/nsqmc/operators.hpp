#pragma once

#include "nsqmc/space.hpp"

#include <Eigen/Sparse>

namespace nsqmc {

using SpMat = Eigen::SparseMatrix<double>;

enum class SpaceLabel { velocity, pressure };

/// Sparse form with row/column space labels. Immutable after construction.
struct SparseOperator {
    SpMat mat;
    SpaceLabel rows;
    SpaceLabel cols;
};

/// Assembled forms for one Taylor-Hood space. All matrices are built once
/// and shared read-only between solver instances.
struct FemOperators {
    SpMat mass_scalar;          // P2 x P2
    SpMat stiffness_scalar;     // P2 x P2
    SpMat mass_velocity;        // full velocity dofs
    SpMat stiffness_velocity;   // full velocity dofs
    SpMat divergence;           // pressure x full velocity, from c(v,q)
    Eigen::VectorXd pressure_integral; // \int psi_q

    SpMat mass_interior;        // Dirichlet dofs eliminated
    SpMat stiffness_interior;
    SpMat divergence_interior;  // pressure x interior velocity
};

FemOperators assemble_operators(const TaylorHoodSpace& space);

SparseOperator assemble_mass(const TaylorHoodSpace& space);
SparseOperator assemble_stiffness(const TaylorHoodSpace& space);
SparseOperator assemble_divergence(const TaylorHoodSpace& space);

/// Skew-symmetrized convection form
///   B[u,v,w] = 1/2 \int ((u.grad)v).w - ((u.grad)w).v
/// evaluated with the degree-5 rule (exact: the integrand is degree 5).
double trilinear(const TaylorHoodSpace& space, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& v, const Eigen::VectorXd& w);

/// Matrix of B[advect, ., .] over interior velocity dofs:
/// N(i,j) = B[advect, phi_j, phi_i]. Skew-symmetric by construction.
SpMat assemble_convection_interior(const TaylorHoodSpace& space,
                                   const Eigen::VectorXd& advect_full);

double l2_norm(const TaylorHoodSpace& space, const Eigen::VectorXd& u);
double h1_seminorm(const TaylorHoodSpace& space, const Eigen::VectorXd& u);
double l4_norm(const TaylorHoodSpace& space, const Eigen::VectorXd& u);

/// Scatter interior coefficients into a full vector with zero Dirichlet dofs.
Eigen::VectorXd expand_interior(const TaylorHoodSpace& space,
                                const Eigen::VectorXd& interior);
Eigen::VectorXd restrict_interior(const TaylorHoodSpace& space,
                                  const Eigen::VectorXd& full);

} // namespace nsqmc
