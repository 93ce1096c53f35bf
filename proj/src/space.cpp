#include "nsqmc/space.hpp"

#include <stdexcept>

namespace nsqmc {

std::array<double, 6> p2_values(const std::array<double, 3>& bary) {
    const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
    return {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
            4 * l1 * l2,       4 * l2 * l0,       4 * l0 * l1};
}

TaylorHoodSpace build_space(const TriMesh& mesh) {
    TaylorHoodSpace space;
    space.mesh = mesh;
    space.n_p2_nodes = mesh.n_vertices() + mesh.n_edges();
    space.n_velocity_dofs = 2 * space.n_p2_nodes;
    space.n_pressure_dofs = mesh.n_vertices();

    space.tri_nodes.reserve(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const auto& te = mesh.triangle_edges[t];
        space.tri_nodes.push_back({tri[0], tri[1], tri[2],
                                   mesh.n_vertices() + te[0],
                                   mesh.n_vertices() + te[1],
                                   mesh.n_vertices() + te[2]});
    }

    space.node_on_boundary.resize(space.n_p2_nodes, 0);
    for (int v = 0; v < mesh.n_vertices(); ++v)
        space.node_on_boundary[v] = mesh.boundary_vertex[v];
    for (int e = 0; e < mesh.n_edges(); ++e)
        space.node_on_boundary[mesh.n_vertices() + e] = mesh.boundary_edge[e];

    space.full_to_interior.assign(space.n_velocity_dofs, -1);
    for (int k = 0; k < space.n_p2_nodes; ++k) {
        for (int c = 0; c < 2; ++c) {
            const int dof = 2 * k + c;
            if (space.node_on_boundary[k])
                space.dirichlet_velocity_dofs.push_back(dof);
            else {
                space.full_to_interior[dof] =
                    static_cast<int>(space.interior_velocity_dofs.size());
                space.interior_velocity_dofs.push_back(dof);
            }
        }
    }
    return space;
}

Eigen::Vector2d TaylorHoodSpace::evaluate_velocity(const Eigen::VectorXd& u,
                                                   const Eigen::Vector2d& x) const {
    if (u.size() != n_velocity_dofs)
        throw std::invalid_argument("evaluate_velocity: coefficient size mismatch");
    const auto loc = mesh.locate(x);
    const auto phi = p2_values(loc.bary);
    Eigen::Vector2d value = Eigen::Vector2d::Zero();
    for (int a = 0; a < 6; ++a) {
        const int node = tri_nodes[loc.tri][a];
        value[0] += phi[a] * u[2 * node];
        value[1] += phi[a] * u[2 * node + 1];
    }
    return value;
}

} // namespace nsqmc
