#include "nsqmc/operators.hpp"

#include "nsqmc/quadrature.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace nsqmc {

namespace {

/// Per-triangle geometry: constant barycentric gradients.
struct TriGeometry {
    Eigen::Vector2d grad_lambda[3];
};

TriGeometry triangle_geometry(const TriMesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector2d p0 = mesh.vertices[tri[0]];
    const Eigen::Vector2d p1 = mesh.vertices[tri[1]];
    const Eigen::Vector2d p2 = mesh.vertices[tri[2]];
    const double two_area =
        (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
    TriGeometry g;
    g.grad_lambda[0] = Eigen::Vector2d(p1[1] - p2[1], p2[0] - p1[0]) / two_area;
    g.grad_lambda[1] = Eigen::Vector2d(p2[1] - p0[1], p0[0] - p2[0]) / two_area;
    g.grad_lambda[2] = Eigen::Vector2d(p0[1] - p1[1], p1[0] - p0[0]) / two_area;
    return g;
}

std::array<Eigen::Vector2d, 6> p2_gradients(const std::array<double, 3>& bary,
                                            const TriGeometry& g) {
    const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
    const Eigen::Vector2d g0 = g.grad_lambda[0];
    const Eigen::Vector2d g1 = g.grad_lambda[1];
    const Eigen::Vector2d g2 = g.grad_lambda[2];
    return {(4 * l0 - 1) * g0,
            (4 * l1 - 1) * g1,
            (4 * l2 - 1) * g2,
            4 * (l2 * g1 + l1 * g2),
            4 * (l0 * g2 + l2 * g0),
            4 * (l1 * g0 + l0 * g1)};
}

/// Basis tables per quadrature point for the two congruent triangle shapes
/// of the structured mesh (even = below the diagonal, odd = above).
struct BasisTables {
    const TriQuadRule* rule;
    std::vector<std::array<double, 6>> values;                  // per qp
    std::vector<std::array<Eigen::Vector2d, 6>> gradients[2];   // per type, qp
    double area;

    BasisTables(const TriMesh& mesh, int degree) {
        rule = &triangle_rule(degree);
        area = mesh.triangle_area();
        values.reserve(rule->size());
        for (const auto& qp : *rule) values.push_back(p2_values(qp.bary));
        for (int type = 0; type < 2; ++type) {
            const TriGeometry g = triangle_geometry(mesh, type);
            gradients[type].reserve(rule->size());
            for (const auto& qp : *rule)
                gradients[type].push_back(p2_gradients(qp.bary, g));
        }
    }
};

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat expand_to_velocity(const SpMat& scalar) {
    Triplets trips;
    trips.reserve(2 * scalar.nonZeros());
    for (int k = 0; k < scalar.outerSize(); ++k)
        for (SpMat::InnerIterator it(scalar, k); it; ++it)
            for (int c = 0; c < 2; ++c)
                trips.emplace_back(2 * it.row() + c, 2 * it.col() + c, it.value());
    SpMat out(2 * scalar.rows(), 2 * scalar.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

SpMat reduce_velocity(const TaylorHoodSpace& space, const SpMat& full) {
    const int n = static_cast<int>(space.interior_velocity_dofs.size());
    Triplets trips;
    trips.reserve(full.nonZeros());
    for (int k = 0; k < full.outerSize(); ++k)
        for (SpMat::InnerIterator it(full, k); it; ++it) {
            const int r = space.full_to_interior[it.row()];
            const int c = space.full_to_interior[it.col()];
            if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
        }
    SpMat out(n, n);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

} // namespace

FemOperators assemble_operators(const TaylorHoodSpace& space) {
    const TriMesh& mesh = space.mesh;
    const BasisTables tab(mesh, 5);
    const int nq = static_cast<int>(tab.rule->size());

    Triplets mass_trips, stiff_trips, div_trips;
    mass_trips.reserve(mesh.n_triangles() * 36);
    stiff_trips.reserve(mesh.n_triangles() * 36);
    div_trips.reserve(mesh.n_triangles() * 36);
    Eigen::VectorXd pressure_integral = Eigen::VectorXd::Zero(space.n_pressure_dofs);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const int type = t % 2;
        const auto& nodes = space.tri_nodes[t];
        const auto& tri = mesh.triangles[t];

        double mloc[6][6] = {};
        double kloc[6][6] = {};
        double dloc[3][6][2] = {};
        for (int q = 0; q < nq; ++q) {
            const double w = (*tab.rule)[q].weight * tab.area;
            const auto& phi = tab.values[q];
            const auto& grad = tab.gradients[type][q];
            const auto& bary = (*tab.rule)[q].bary;
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    mloc[a][b] += w * phi[a] * phi[b];
                    kloc[a][b] += w * grad[a].dot(grad[b]);
                }
                // c(v,q) = -\int q (div v); P1 test = barycentric coordinate
                for (int p = 0; p < 3; ++p) {
                    dloc[p][a][0] -= w * bary[p] * grad[a][0];
                    dloc[p][a][1] -= w * bary[p] * grad[a][1];
                }
            }
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                mass_trips.emplace_back(nodes[a], nodes[b], mloc[a][b]);
                stiff_trips.emplace_back(nodes[a], nodes[b], kloc[a][b]);
            }
        for (int p = 0; p < 3; ++p) {
            pressure_integral[tri[p]] += tab.area / 3.0;
            for (int a = 0; a < 6; ++a)
                for (int c = 0; c < 2; ++c)
                    div_trips.emplace_back(tri[p], 2 * nodes[a] + c, dloc[p][a][c]);
        }
    }

    FemOperators ops;
    ops.mass_scalar.resize(space.n_p2_nodes, space.n_p2_nodes);
    ops.mass_scalar.setFromTriplets(mass_trips.begin(), mass_trips.end());
    ops.stiffness_scalar.resize(space.n_p2_nodes, space.n_p2_nodes);
    ops.stiffness_scalar.setFromTriplets(stiff_trips.begin(), stiff_trips.end());
    ops.divergence.resize(space.n_pressure_dofs, space.n_velocity_dofs);
    ops.divergence.setFromTriplets(div_trips.begin(), div_trips.end());
    ops.pressure_integral = pressure_integral;

    ops.mass_velocity = expand_to_velocity(ops.mass_scalar);
    ops.stiffness_velocity = expand_to_velocity(ops.stiffness_scalar);
    ops.mass_interior = reduce_velocity(space, ops.mass_velocity);
    ops.stiffness_interior = reduce_velocity(space, ops.stiffness_velocity);

    const int n_int = static_cast<int>(space.interior_velocity_dofs.size());
    Triplets divi;
    divi.reserve(ops.divergence.nonZeros());
    for (int k = 0; k < ops.divergence.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops.divergence, k); it; ++it) {
            const int c = space.full_to_interior[it.col()];
            if (c >= 0) divi.emplace_back(it.row(), c, it.value());
        }
    ops.divergence_interior.resize(space.n_pressure_dofs, n_int);
    ops.divergence_interior.setFromTriplets(divi.begin(), divi.end());
    return ops;
}

SparseOperator assemble_mass(const TaylorHoodSpace& space) {
    FemOperators ops = assemble_operators(space);
    return {std::move(ops.mass_velocity), SpaceLabel::velocity, SpaceLabel::velocity};
}

SparseOperator assemble_stiffness(const TaylorHoodSpace& space) {
    FemOperators ops = assemble_operators(space);
    return {std::move(ops.stiffness_velocity), SpaceLabel::velocity,
            SpaceLabel::velocity};
}

SparseOperator assemble_divergence(const TaylorHoodSpace& space) {
    FemOperators ops = assemble_operators(space);
    return {std::move(ops.divergence), SpaceLabel::pressure, SpaceLabel::velocity};
}

double trilinear(const TaylorHoodSpace& space, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
    if (u.size() != space.n_velocity_dofs || v.size() != space.n_velocity_dofs ||
        w.size() != space.n_velocity_dofs)
        throw std::invalid_argument("trilinear: coefficient size mismatch");

    const BasisTables tab(space.mesh, 5);
    const int nq = static_cast<int>(tab.rule->size());
    double total = 0.0;

    for (int t = 0; t < space.mesh.n_triangles(); ++t) {
        const int type = t % 2;
        const auto& nodes = space.tri_nodes[t];
        for (int q = 0; q < nq; ++q) {
            const double wq = (*tab.rule)[q].weight * tab.area;
            const auto& phi = tab.values[q];
            const auto& grad = tab.gradients[type][q];

            Eigen::Vector2d uq = Eigen::Vector2d::Zero();
            Eigen::Vector2d vq = Eigen::Vector2d::Zero();
            Eigen::Vector2d wq_vec = Eigen::Vector2d::Zero();
            Eigen::Matrix2d gv = Eigen::Matrix2d::Zero(); // gv(c,d) = d_d v_c
            Eigen::Matrix2d gw = Eigen::Matrix2d::Zero();
            for (int a = 0; a < 6; ++a) {
                const int node = nodes[a];
                for (int c = 0; c < 2; ++c) {
                    uq[c] += phi[a] * u[2 * node + c];
                    vq[c] += phi[a] * v[2 * node + c];
                    wq_vec[c] += phi[a] * w[2 * node + c];
                    gv.row(c) += grad[a].transpose() * v[2 * node + c];
                    gw.row(c) += grad[a].transpose() * w[2 * node + c];
                }
            }
            const Eigen::Vector2d u_grad_v = gv * uq;
            const Eigen::Vector2d u_grad_w = gw * uq;
            total += 0.5 * wq * (u_grad_v.dot(wq_vec) - u_grad_w.dot(vq));
        }
    }
    return total;
}

SpMat assemble_convection_interior(const TaylorHoodSpace& space,
                                   const Eigen::VectorXd& advect_full) {
    if (advect_full.size() != space.n_velocity_dofs)
        throw std::invalid_argument("assemble_convection_interior: size mismatch");

    const BasisTables tab(space.mesh, 5);
    const int nq = static_cast<int>(tab.rule->size());
    const int n_int = static_cast<int>(space.interior_velocity_dofs.size());

    Triplets trips;
    trips.reserve(space.mesh.n_triangles() * 72);
    for (int t = 0; t < space.mesh.n_triangles(); ++t) {
        const int type = t % 2;
        const auto& nodes = space.tri_nodes[t];

        double local[6][6] = {};
        for (int q = 0; q < nq; ++q) {
            const double wq = (*tab.rule)[q].weight * tab.area;
            const auto& phi = tab.values[q];
            const auto& grad = tab.gradients[type][q];
            Eigen::Vector2d adv = Eigen::Vector2d::Zero();
            for (int a = 0; a < 6; ++a) {
                const int node = nodes[a];
                adv[0] += phi[a] * advect_full[2 * node];
                adv[1] += phi[a] * advect_full[2 * node + 1];
            }
            double conv[6]; // (advect . grad) phi_a
            for (int a = 0; a < 6; ++a) conv[a] = adv.dot(grad[a]);
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b)
                    local[a][b] += 0.5 * wq * (phi[a] * conv[b] - phi[b] * conv[a]);
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                if (local[a][b] == 0.0) continue;
                for (int c = 0; c < 2; ++c) {
                    const int r = space.full_to_interior[2 * nodes[a] + c];
                    const int cc = space.full_to_interior[2 * nodes[b] + c];
                    if (r >= 0 && cc >= 0) trips.emplace_back(r, cc, local[a][b]);
                }
            }
    }
    SpMat out(n_int, n_int);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

double l2_norm(const TaylorHoodSpace& space, const Eigen::VectorXd& u) {
    const FemOperators ops = assemble_operators(space);
    return std::sqrt(u.dot(ops.mass_velocity * u));
}

double h1_seminorm(const TaylorHoodSpace& space, const Eigen::VectorXd& u) {
    const FemOperators ops = assemble_operators(space);
    return std::sqrt(u.dot(ops.stiffness_velocity * u));
}

double l4_norm(const TaylorHoodSpace& space, const Eigen::VectorXd& u) {
    if (u.size() != space.n_velocity_dofs)
        throw std::invalid_argument("l4_norm: coefficient size mismatch");
    const BasisTables tab(space.mesh, 8);
    const int nq = static_cast<int>(tab.rule->size());
    double total = 0.0;
    for (int t = 0; t < space.mesh.n_triangles(); ++t) {
        const auto& nodes = space.tri_nodes[t];
        for (int q = 0; q < nq; ++q) {
            const double wq = (*tab.rule)[q].weight * tab.area;
            const auto& phi = tab.values[q];
            Eigen::Vector2d uq = Eigen::Vector2d::Zero();
            for (int a = 0; a < 6; ++a) {
                uq[0] += phi[a] * u[2 * nodes[a]];
                uq[1] += phi[a] * u[2 * nodes[a] + 1];
            }
            const double sq = uq.squaredNorm();
            total += wq * sq * sq;
        }
    }
    return std::pow(total, 0.25);
}

Eigen::VectorXd expand_interior(const TaylorHoodSpace& space,
                                const Eigen::VectorXd& interior) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(space.n_velocity_dofs);
    for (size_t i = 0; i < space.interior_velocity_dofs.size(); ++i)
        full[space.interior_velocity_dofs[i]] = interior[static_cast<long>(i)];
    return full;
}

Eigen::VectorXd restrict_interior(const TaylorHoodSpace& space,
                                  const Eigen::VectorXd& full) {
    Eigen::VectorXd out(space.interior_velocity_dofs.size());
    for (size_t i = 0; i < space.interior_velocity_dofs.size(); ++i)
        out[static_cast<long>(i)] = full[space.interior_velocity_dofs[i]];
    return out;
}

} // namespace nsqmc
