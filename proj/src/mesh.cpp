#include "nsqmc/mesh.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace nsqmc {

TriMesh build_mesh(int m) {
    if (m < 1) throw std::invalid_argument("build_mesh: m must be >= 1");

    TriMesh mesh;
    mesh.m = m;
    mesh.h = 1.0 / m;
    const int nv_side = m + 1;

    mesh.vertices.reserve(nv_side * nv_side);
    for (int iy = 0; iy <= m; ++iy)
        for (int ix = 0; ix <= m; ++ix)
            mesh.vertices.emplace_back(ix * mesh.h, iy * mesh.h);

    mesh.triangles.reserve(2 * m * m);
    for (int cy = 0; cy < m; ++cy) {
        for (int cx = 0; cx < m; ++cx) {
            const int v00 = cy * nv_side + cx;
            const int v10 = v00 + 1;
            const int v01 = v00 + nv_side;
            const int v11 = v01 + 1;
            mesh.triangles.push_back({v00, v10, v11}); // below the diagonal
            mesh.triangles.push_back({v00, v11, v01}); // above the diagonal
        }
    }

    // Unique edges in lexicographic order of sorted vertex pairs.
    std::map<std::array<int, 2>, int> edge_count;
    for (const auto& tri : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[(e + 1) % 3];
            int b = tri[(e + 2) % 3];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
    }
    std::map<std::array<int, 2>, int> edge_index;
    mesh.edges.reserve(edge_count.size());
    mesh.edge_midpoints.reserve(edge_count.size());
    mesh.boundary_edge.reserve(edge_count.size());
    for (const auto& [pair, count] : edge_count) {
        edge_index[pair] = static_cast<int>(mesh.edges.size());
        mesh.edges.push_back(pair);
        mesh.edge_midpoints.push_back(
            0.5 * (mesh.vertices[pair[0]] + mesh.vertices[pair[1]]));
        mesh.boundary_edge.push_back(count == 1 ? 1 : 0);
    }

    mesh.triangle_edges.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        std::array<int, 3> te;
        for (int e = 0; e < 3; ++e) {
            int a = tri[(e + 1) % 3];
            int b = tri[(e + 2) % 3];
            if (a > b) std::swap(a, b);
            te[e] = edge_index.at({a, b});
        }
        mesh.triangle_edges.push_back(te);
    }

    mesh.boundary_vertex.resize(mesh.vertices.size(), 0);
    for (int iy = 0; iy <= m; ++iy)
        for (int ix = 0; ix <= m; ++ix)
            if (ix == 0 || ix == m || iy == 0 || iy == m)
                mesh.boundary_vertex[iy * nv_side + ix] = 1;

    return mesh;
}

TriMesh::Location TriMesh::locate(const Eigen::Vector2d& x) const {
    const double eps = 1e-12;
    if (x[0] < -eps || x[0] > 1.0 + eps || x[1] < -eps || x[1] > 1.0 + eps)
        throw std::invalid_argument("TriMesh::locate: point outside [0,1]^2");

    const double sx = std::clamp(x[0], 0.0, 1.0) * m;
    const double sy = std::clamp(x[1], 0.0, 1.0) * m;
    const int cx = std::min(static_cast<int>(sx), m - 1);
    const int cy = std::min(static_cast<int>(sy), m - 1);
    const double u = sx - cx;
    const double v = sy - cy;

    Location loc;
    const int base = 2 * (cy * m + cx);
    if (v <= u) {
        loc.tri = base;
        loc.bary = {1.0 - u, u - v, v};
    } else {
        loc.tri = base + 1;
        loc.bary = {1.0 - v, u, v - u};
    }
    return loc;
}

} // namespace nsqmc
