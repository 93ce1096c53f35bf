#pragma once

#include "nsqmc/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace nsqmc {

/// P2 shape function values at a barycentric point; local node order is
/// (vertex0, vertex1, vertex2, mid12, mid20, mid01).
std::array<double, 6> p2_values(const std::array<double, 3>& bary);

/// Taylor-Hood pair on a TriMesh: continuous P2 velocity per component,
/// continuous P1 pressure. Velocity dofs interleave components: P2 node k
/// owns dofs (2k, 2k+1). Pressure dofs are the mesh vertices.
struct TaylorHoodSpace {
    TriMesh mesh;

    int n_p2_nodes = 0;
    int n_velocity_dofs = 0;
    int n_pressure_dofs = 0;

    /// 6 global P2 node ids per triangle in local order.
    std::vector<std::array<int, 6>> tri_nodes;
    std::vector<char> node_on_boundary;
    std::vector<int> dirichlet_velocity_dofs;

    /// Ascending interior velocity dofs and the inverse map (-1 = Dirichlet).
    std::vector<int> interior_velocity_dofs;
    std::vector<int> full_to_interior;

    Eigen::Vector2d p2_node_coord(int node) const {
        return node < mesh.n_vertices()
                   ? mesh.vertices[node]
                   : mesh.edge_midpoints[node - mesh.n_vertices()];
    }

    /// Value of a P2 vector field (full interleaved coefficients) at a point.
    Eigen::Vector2d evaluate_velocity(const Eigen::VectorXd& u,
                                      const Eigen::Vector2d& x) const;
};

TaylorHoodSpace build_space(const TriMesh& mesh);

} // namespace nsqmc
