#include "nsqmc/initial_data.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/quadrature.hpp"

#include <cmath>

namespace nsqmc {

namespace {
constexpr double kFieldMagnitudeCap = 300.0;
}

void InitialFieldSpec::validate() const {
    if (!kl) throw ConfigError("InitialFieldSpec: missing KL basis");
    if (s < 0 || s > kl->s_max)
        throw ConfigError("InitialFieldSpec: truncation s out of range");
    if (y.size() != s) throw ConfigError("InitialFieldSpec: y length != s");
    if (!y.allFinite()) throw ConfigError("InitialFieldSpec: nonfinite y");
}

Eigen::Vector2d eval_u0(const InitialFieldSpec& spec, const Eigen::Vector2d& x) {
    spec.validate();
    Eigen::VectorXd values;
    Eigen::MatrixX2d gradients;
    sample_Z(*spec.kl, spec.y, {x}, values, gradients);
    const double z = values[0];
    if (z > kFieldMagnitudeCap)
        throw NumericalError("eval_u0: field magnitude exp(Z) overflows, Z = " +
                             std::to_string(z));
    const double e = std::exp(z);
    return {-e * gradients(0, 1), e * gradients(0, 0)};
}

InitialProjector::InitialProjector(const TaylorHoodSpace& space,
                                   const FemOperators& ops)
    : space_(space), ops_(ops) {
    const int n_int = static_cast<int>(space.interior_velocity_dofs.size());
    const int n_p = space.n_pressure_dofs;
    const int dim = n_int + n_p + 1;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(ops.mass_interior.nonZeros() +
                  2 * ops.divergence_interior.nonZeros() + 2 * n_p);
    for (int k = 0; k < ops.mass_interior.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops.mass_interior, k); it; ++it)
            trips.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < ops.divergence_interior.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops.divergence_interior, k); it; ++it) {
            trips.emplace_back(n_int + it.row(), it.col(), it.value());
            trips.emplace_back(it.col(), n_int + it.row(), it.value());
        }
    for (int q = 0; q < n_p; ++q) {
        trips.emplace_back(n_int + q, n_int + n_p, ops.pressure_integral[q]);
        trips.emplace_back(n_int + n_p, n_int + q, ops.pressure_integral[q]);
    }
    SpMat saddle(dim, dim);
    saddle.setFromTriplets(trips.begin(), trips.end());
    saddle_.compute(saddle);
    if (saddle_.info() != Eigen::Success)
        throw NumericalError("InitialProjector: singular mass saddle system");

    // Quadrature layout on the solver mesh, fixed for every sample.
    const TriQuadRule& rule = triangle_rule(5);
    const double area = space.mesh.triangle_area();
    for (int t = 0; t < space.mesh.n_triangles(); ++t) {
        const auto& tri = space.mesh.triangles[t];
        for (const auto& qp : rule) {
            Eigen::Vector2d x = Eigen::Vector2d::Zero();
            for (int i = 0; i < 3; ++i) x += qp.bary[i] * space.mesh.vertices[tri[i]];
            quad_points_.push_back(x);
            quad_weights_.push_back(qp.weight * area);
            quad_nodes_.push_back(space.tri_nodes[t]);
            quad_phi_.push_back(p2_values(qp.bary));
        }
    }
}

Eigen::VectorXd InitialProjector::load_vector(
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(space_.n_velocity_dofs);
    for (size_t q = 0; q < quad_points_.size(); ++q) {
        const Eigen::Vector2d v = field(quad_points_[q]);
        const double w = quad_weights_[q];
        for (int a = 0; a < 6; ++a) {
            const int node = quad_nodes_[q][a];
            full[2 * node] += w * quad_phi_[q][a] * v[0];
            full[2 * node + 1] += w * quad_phi_[q][a] * v[1];
        }
    }
    return restrict_interior(space_, full);
}

VelocityState InitialProjector::solve_saddle(
    const Eigen::VectorXd& load_interior) const {
    const int n_int = static_cast<int>(space_.interior_velocity_dofs.size());
    const int n_p = space_.n_pressure_dofs;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_int + n_p + 1);
    rhs.head(n_int) = load_interior;
    const Eigen::VectorXd sol = saddle_.solve(rhs);
    if (saddle_.info() != Eigen::Success)
        throw NumericalError("InitialProjector: saddle solve failed");
    VelocityState state;
    state.u = expand_interior(space_, sol.head(n_int));
    state.p = sol.segment(n_int, n_p);
    state.time_index = 0;
    return state;
}

VelocityState InitialProjector::project(
    const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& field) const {
    return solve_saddle(load_vector(field));
}

void InitialProjector::ensure_plan(const KLBasis& kl) const {
    if (plan_kl_ == &kl) return;
    const long npts = static_cast<long>(quad_points_.size());
    std::vector<Eigen::Triplet<double>> val, gx, gy;
    val.reserve(3 * npts);
    gx.reserve(3 * npts);
    gy.reserve(3 * npts);
    for (long q = 0; q < npts; ++q) {
        const auto loc = kl.fine_mesh.locate(quad_points_[q]);
        const auto& tri = kl.fine_mesh.triangles[loc.tri];
        const Eigen::Vector2d p0 = kl.fine_mesh.vertices[tri[0]];
        const Eigen::Vector2d p1 = kl.fine_mesh.vertices[tri[1]];
        const Eigen::Vector2d p2 = kl.fine_mesh.vertices[tri[2]];
        const double two_area =
            (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        const Eigen::Vector2d g[3] = {
            Eigen::Vector2d(p1[1] - p2[1], p2[0] - p1[0]) / two_area,
            Eigen::Vector2d(p2[1] - p0[1], p0[0] - p2[0]) / two_area,
            Eigen::Vector2d(p0[1] - p1[1], p1[0] - p0[0]) / two_area};
        for (int i = 0; i < 3; ++i) {
            val.emplace_back(q, tri[i], loc.bary[i]);
            gx.emplace_back(q, tri[i], g[i][0]);
            gy.emplace_back(q, tri[i], g[i][1]);
        }
    }
    const int n_nodes = kl.fine_mesh.n_vertices();
    plan_value_.resize(npts, n_nodes);
    plan_value_.setFromTriplets(val.begin(), val.end());
    plan_gx_.resize(npts, n_nodes);
    plan_gx_.setFromTriplets(gx.begin(), gx.end());
    plan_gy_.resize(npts, n_nodes);
    plan_gy_.setFromTriplets(gy.begin(), gy.end());
    plan_kl_ = &kl;
}

VelocityState InitialProjector::project(const InitialFieldSpec& spec) const {
    spec.validate();
    ensure_plan(*spec.kl);

    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(spec.kl->fine_mesh.n_vertices());
    for (int j = 0; j < spec.s; ++j)
        nodal += std::sqrt(spec.kl->mu[j]) * spec.y[j] * spec.kl->xi.col(j);

    const Eigen::VectorXd z = plan_value_ * nodal;
    const Eigen::VectorXd zx = plan_gx_ * nodal;
    const Eigen::VectorXd zy = plan_gy_ * nodal;

    Eigen::VectorXd full = Eigen::VectorXd::Zero(space_.n_velocity_dofs);
    for (long q = 0; q < z.size(); ++q) {
        if (z[q] > kFieldMagnitudeCap)
            throw NumericalError("project: field magnitude exp(Z) overflows");
        const double e = std::exp(z[q]);
        const double v0 = -e * zy[q];
        const double v1 = e * zx[q];
        const double w = quad_weights_[static_cast<size_t>(q)];
        const auto& nodes = quad_nodes_[static_cast<size_t>(q)];
        const auto& phi = quad_phi_[static_cast<size_t>(q)];
        for (int a = 0; a < 6; ++a) {
            full[2 * nodes[a]] += w * phi[a] * v0;
            full[2 * nodes[a] + 1] += w * phi[a] * v1;
        }
    }
    return solve_saddle(restrict_interior(space_, full));
}

double InitialProjector::exp_field_h1_norm(const InitialFieldSpec& spec) const {
    spec.validate();
    ensure_plan(*spec.kl);
    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(spec.kl->fine_mesh.n_vertices());
    for (int j = 0; j < spec.s; ++j)
        nodal += std::sqrt(spec.kl->mu[j]) * spec.y[j] * spec.kl->xi.col(j);
    const Eigen::VectorXd z = plan_value_ * nodal;
    const Eigen::VectorXd zx = plan_gx_ * nodal;
    const Eigen::VectorXd zy = plan_gy_ * nodal;
    double acc = 0.0;
    for (long q = 0; q < z.size(); ++q) {
        const double e = std::exp(std::min(z[q], kFieldMagnitudeCap));
        acc += quad_weights_[static_cast<size_t>(q)] * e * e *
               (1.0 + zx[q] * zx[q] + zy[q] * zy[q]);
    }
    return std::sqrt(acc);
}

VelocityState project_initial(const InitialFieldSpec& spec,
                              const TaylorHoodSpace& space) {
    const FemOperators ops = assemble_operators(space);
    const InitialProjector projector(space, ops);
    return projector.project(spec);
}

} // namespace nsqmc
