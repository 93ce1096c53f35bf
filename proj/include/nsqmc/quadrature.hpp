#pragma once

#include <array>
#include <vector>

namespace nsqmc {

/// One quadrature point on the reference triangle, in barycentric
/// coordinates. Weights sum to 1; integrals are weight * |T| * f(point).
struct TriQuadPoint {
    std::array<double, 3> bary;
    double weight;
};

using TriQuadRule = std::vector<TriQuadPoint>;

/// Symmetric Gauss rules on the triangle.
///   degree 2 -> 3 points   (covariance Galerkin default)
///   degree 4 -> 6 points   (covariance refined-quadrature oracle)
///   degree 5 -> 7 points   (mass/stiffness/trilinear/load terms)
///   degree 8 -> 16 points  (L4 norms and test oracles)
const TriQuadRule& triangle_rule(int degree);

} // namespace nsqmc
