#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace nsqmc {

/// Structured triangulation of the unit square: m x m congruent squares,
/// each split along its lower-left -> upper-right diagonal into two right
/// triangles with counterclockwise orientation.
///
/// Vertex (ix, iy) sits at (ix*h, iy*h), index iy*(m+1)+ix. Edges are the
/// unique sorted vertex pairs, numbered lexicographically so that the dof
/// layout is deterministic.
struct TriMesh {
    int m = 0;
    double h = 0.0;
    std::vector<Eigen::Vector2d> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<int, 2>> edges;
    std::vector<Eigen::Vector2d> edge_midpoints;
    std::vector<char> boundary_vertex;
    std::vector<char> boundary_edge;
    /// edge index per triangle, opposite each local vertex
    std::vector<std::array<int, 3>> triangle_edges;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int n_edges() const { return static_cast<int>(edges.size()); }

    double triangle_area() const { return 0.5 * h * h; }

    struct Location {
        int tri;
        std::array<double, 3> bary;
    };

    /// Locate a point of the closed unit square; ties on cell diagonals go to
    /// the lower triangle. Throws std::invalid_argument outside the domain.
    Location locate(const Eigen::Vector2d& x) const;
};

/// Build the structured mesh with subdivision count m >= 1 (h = 1/m).
TriMesh build_mesh(int m);

} // namespace nsqmc
