#pragma once

#include "nsqmc/matern.hpp"
#include "nsqmc/mesh.hpp"
#include "nsqmc/operators.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace nsqmc {

/// Leading eigenpairs of the Galerkin-discretized covariance operator on a
/// fine P1 mesh. Eigenvalues are nonincreasing with tiny negatives clipped
/// to zero; eigenvectors are M-orthonormal nodal value columns.
struct KLBasis {
    TriMesh fine_mesh;
    Eigen::VectorXd mu;   // s_max entries
    Eigen::MatrixXd xi;   // n_nodes x s_max
    int s_max = 0;
    MaternParams params;
};

/// b_j = sqrt(mu_j) * ||xi_j||_C(D) (sup norm taken over fine-mesh nodes),
/// with the fitted summability exponent and its regression range.
struct BSequence {
    Eigen::VectorXd b;
    double p_hat = 0.0;
    int j_lo = 0;
    int j_hi = 0;
};

/// Galerkin matrix A_ij = int int phi_i(x) kernel(|x-x'|) phi_j(x') dx dx'
/// over the P1 fine mesh, with a tensorized per-triangle-pair rule
/// (rule_degree 2 = 3 points, default; 4 = 6 points, refinement oracle).
/// Kernel values are cached on the translation classes of the structured
/// mesh; assembly is tiled with a fixed reduction order so results are
/// bit-stable for any worker count.
Eigen::MatrixXd assemble_cov_operator(
    const TriMesh& fine_mesh, const std::function<double(double)>& kernel,
    int rule_degree = 2, int node_cap = 5000);

Eigen::MatrixXd assemble_cov_operator(const TriMesh& fine_mesh,
                                      const MaternParams& params,
                                      int rule_degree = 2, int node_cap = 5000);

/// P1 mass matrix of a mesh (vertex basis).
SpMat p1_mass_matrix(const TriMesh& mesh);

/// Solve A v = mu M v for the s leading eigenpairs (dense, Cholesky-reduced).
KLBasis solve_kl(const Eigen::MatrixXd& A, const SpMat& M, int s,
                 TriMesh fine_mesh, MaternParams params);

/// Mesh + covariance + eigensolve in one step; fine mesh is a factor-4
/// refinement of the solver mesh.
KLBasis compute_kl(int solver_m, const MaternParams& params, int s,
                   int rule_degree = 2, int node_cap = 5000);

BSequence b_sequence(const KLBasis& kl);

/// Least-squares slope q of |log b_j| against log j over j in [j_lo, j_hi];
/// returns p_hat = 1/q clamped to (0, 1].
double estimate_p(const BSequence& b, int j_lo, int j_hi);

/// Evaluate Z_s = sum_j sqrt(mu_j) xi_j(x) y_j and its (piecewise constant)
/// gradient at the given points via P1 interpolation.
void sample_Z(const KLBasis& kl, const Eigen::VectorXd& y,
              const std::vector<Eigen::Vector2d>& points,
              Eigen::VectorXd& values, Eigen::MatrixX2d& gradients);

void save_kl(const KLBasis& kl, const std::string& path);
KLBasis load_kl(const std::string& path);

} // namespace nsqmc
