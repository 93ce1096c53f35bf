#include "nsqmc/kl.hpp"

#include "nsqmc/errors.hpp"
#include "nsqmc/parallel.hpp"
#include "nsqmc/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace nsqmc {

namespace {

/// Quadrature-point bookkeeping for the structured fine mesh. Points fall
/// into 2 * P translation classes (triangle type x point index); the kernel
/// value between two points depends only on the class pair and the cell
/// offset, which keeps the number of kernel evaluations at
/// O(P^2 (2m-1)^2) instead of O(P^2 m^4).
struct CovQuadrature {
    int m;
    int P; // points per triangle
    std::vector<int> cell_x, cell_y, cls;      // per quad point
    std::vector<std::array<int, 3>> nodes;     // vertex ids per quad point
    std::vector<std::array<double, 3>> weights; // w * |T| * bary
    std::vector<double> offset_x, offset_y;    // per class, within the cell

    CovQuadrature(const TriMesh& mesh, const TriQuadRule& rule) {
        m = mesh.m;
        P = static_cast<int>(rule.size());
        const double area = mesh.triangle_area();
        const int n_tri = mesh.n_triangles();
        cell_x.resize(n_tri * P);
        cell_y.resize(n_tri * P);
        cls.resize(n_tri * P);
        nodes.resize(n_tri * P);
        weights.resize(n_tri * P);
        offset_x.resize(2 * P);
        offset_y.resize(2 * P);

        for (int type = 0; type < 2; ++type) {
            const auto& tri = mesh.triangles[type];
            const Eigen::Vector2d origin = mesh.vertices[mesh.triangles[0][0]];
            for (int k = 0; k < P; ++k) {
                Eigen::Vector2d p = Eigen::Vector2d::Zero();
                for (int i = 0; i < 3; ++i) p += rule[k].bary[i] * mesh.vertices[tri[i]];
                offset_x[type * P + k] = p[0] - origin[0];
                offset_y[type * P + k] = p[1] - origin[1];
            }
        }
        for (int t = 0; t < n_tri; ++t) {
            const int cell = t / 2;
            const int type = t % 2;
            for (int k = 0; k < P; ++k) {
                const int q = t * P + k;
                cell_x[q] = cell % m;
                cell_y[q] = cell / m;
                cls[q] = type * P + k;
                for (int i = 0; i < 3; ++i) {
                    nodes[q][i] = mesh.triangles[t][i];
                    weights[q][i] = rule[k].weight * area * rule[k].bary[i];
                }
            }
        }
    }
};

} // namespace

SpMat p1_mass_matrix(const TriMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.n_triangles() * 9);
    const double area = mesh.triangle_area();
    for (const auto& tri : mesh.triangles)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(tri[i], tri[j], area * (i == j ? 2.0 : 1.0) / 12.0);
    SpMat M(mesh.n_vertices(), mesh.n_vertices());
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

Eigen::MatrixXd assemble_cov_operator(const TriMesh& fine_mesh,
                                      const std::function<double(double)>& kernel,
                                      int rule_degree, int node_cap) {
    const int n = fine_mesh.n_vertices();
    if (n > node_cap)
        throw ConfigError("assemble_cov_operator: fine mesh has " +
                          std::to_string(n) + " nodes, above the cap of " +
                          std::to_string(node_cap));

    const TriQuadRule& rule = triangle_rule(rule_degree);
    const CovQuadrature quad(fine_mesh, rule);
    const int m = fine_mesh.m;
    const int P = quad.P;
    const int n_classes = 2 * P;
    const int span = 2 * m - 1;
    const double h = fine_mesh.h;
    const long nq = static_cast<long>(quad.cls.size());

    // Kernel values per (class pair, cell offset).
    std::vector<double> table(static_cast<size_t>(n_classes) * n_classes * span *
                              span);
    parallel_for(n_classes * n_classes, [&](long cp) {
        const int ca = static_cast<int>(cp) / n_classes;
        const int cb = static_cast<int>(cp) % n_classes;
        double* row = table.data() + static_cast<size_t>(cp) * span * span;
        for (int di = -(m - 1); di <= m - 1; ++di) {
            for (int dj = -(m - 1); dj <= m - 1; ++dj) {
                const double dx = di * h + (quad.offset_x[cb] - quad.offset_x[ca]);
                const double dy = dj * h + (quad.offset_y[cb] - quad.offset_y[ca]);
                row[(di + m - 1) * span + (dj + m - 1)] =
                    kernel(std::sqrt(dx * dx + dy * dy));
            }
        }
    });

    // Quad points incident to each node, ascending.
    std::vector<std::vector<std::pair<long, double>>> node_quads(n);
    for (long q = 0; q < nq; ++q)
        for (int i = 0; i < 3; ++i)
            node_quads[quad.nodes[q][i]].emplace_back(q, quad.weights[q][i]);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    const long block = 2048;
    Eigen::MatrixXd B(std::min(block, nq), n);

    for (long q0 = 0; q0 < nq; q0 += block) {
        const long q1 = std::min(q0 + block, nq);
        // B[q - q0, j] = sum_q' K(q, q') Phi[q', j]
        parallel_for(q1 - q0, [&](long row) {
            const long q = q0 + row;
            B.row(row).setZero();
            const int cx = quad.cell_x[q];
            const int cy = quad.cell_y[q];
            const double* tab_base =
                table.data() +
                static_cast<size_t>(quad.cls[q]) * n_classes * span * span;
            for (long qp = 0; qp < nq; ++qp) {
                const double* tab =
                    tab_base + static_cast<size_t>(quad.cls[qp]) * span * span;
                const int di = quad.cell_x[qp] - cx + (m - 1);
                const int dj = quad.cell_y[qp] - cy + (m - 1);
                const double v = tab[di * span + dj];
                for (int i = 0; i < 3; ++i)
                    B(row, quad.nodes[qp][i]) += v * quad.weights[qp][i];
            }
        });
        // A[i, :] += sum_{q in block} Phi[q, i] B[q - q0, :]
        parallel_for(n, [&](long i) {
            for (const auto& [q, w] : node_quads[i]) {
                if (q < q0 || q >= q1) continue;
                A.row(i) += w * B.row(q - q0);
            }
        });
    }
    return A;
}

Eigen::MatrixXd assemble_cov_operator(const TriMesh& fine_mesh,
                                      const MaternParams& params,
                                      int rule_degree, int node_cap) {
    params.validate();
    return assemble_cov_operator(
        fine_mesh, [&params](double r) { return matern_cov(r, params); },
        rule_degree, node_cap);
}

KLBasis solve_kl(const Eigen::MatrixXd& A, const SpMat& M, int s,
                 TriMesh fine_mesh, MaternParams params) {
    const int n = static_cast<int>(A.rows());
    if (s < 1 || s > n)
        throw ConfigError("solve_kl: requested " + std::to_string(s) +
                          " modes from a rank-" + std::to_string(n) + " space");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        A, Eigen::MatrixXd(M));
    if (solver.info() != Eigen::Success)
        throw NumericalError("solve_kl: generalized eigensolver failed");

    // Eigen returns ascending eigenvalues with M-orthonormal vectors.
    KLBasis kl;
    kl.fine_mesh = std::move(fine_mesh);
    kl.params = params;
    kl.s_max = s;
    kl.mu.resize(s);
    kl.xi.resize(n, s);
    const double mu_max = std::abs(solver.eigenvalues()[n - 1]);
    for (int j = 0; j < s; ++j) {
        double mu = solver.eigenvalues()[n - 1 - j];
        if (mu < 0.0) {
            if (mu < -1e-12 * mu_max)
                throw NumericalError(
                    "solve_kl: eigenvalue " + std::to_string(mu) +
                    " is negative beyond the quadrature-noise tolerance");
            mu = 0.0;
        }
        kl.mu[j] = mu;
        kl.xi.col(j) = solver.eigenvectors().col(n - 1 - j);
    }
    return kl;
}

KLBasis compute_kl(int solver_m, const MaternParams& params, int s,
                   int rule_degree, int node_cap) {
    TriMesh fine = build_mesh(4 * solver_m);
    Eigen::MatrixXd A = assemble_cov_operator(fine, params, rule_degree, node_cap);
    SpMat M = p1_mass_matrix(fine);
    return solve_kl(A, M, s, std::move(fine), params);
}

BSequence b_sequence(const KLBasis& kl) {
    BSequence seq;
    seq.b.resize(kl.s_max);
    for (int j = 0; j < kl.s_max; ++j)
        seq.b[j] = std::sqrt(kl.mu[j]) * kl.xi.col(j).cwiseAbs().maxCoeff();
    return seq;
}

double estimate_p(const BSequence& seq, int j_lo, int j_hi) {
    if (j_lo < 1 || j_hi > seq.b.size() || j_hi - j_lo < 8)
        throw ConfigError("estimate_p: need a range [j_lo, j_hi] with at least 8 "
                          "entries inside the b sequence");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int count = j_hi - j_lo + 1;
    for (int j = j_lo; j <= j_hi; ++j) {
        const double bj = seq.b[j - 1];
        if (!(bj > 0.0))
            throw NumericalError("estimate_p: nonpositive b_j in regression range");
        const double x = std::log(static_cast<double>(j));
        const double y = std::abs(std::log(bj));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    if (!(slope > 0.0))
        throw NumericalError("estimate_p: b sequence does not decay over the range");
    return std::min(1.0, 1.0 / slope);
}

void sample_Z(const KLBasis& kl, const Eigen::VectorXd& y,
              const std::vector<Eigen::Vector2d>& points,
              Eigen::VectorXd& values, Eigen::MatrixX2d& gradients) {
    const int s = static_cast<int>(y.size());
    if (s > kl.s_max) throw ConfigError("sample_Z: y longer than s_max");
    if (!y.allFinite()) throw ConfigError("sample_Z: nonfinite parameter vector");

    // Combined nodal field sum_j sqrt(mu_j) xi_j y_j, then P1 interpolation.
    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(kl.fine_mesh.n_vertices());
    for (int j = 0; j < s; ++j)
        nodal += std::sqrt(kl.mu[j]) * y[j] * kl.xi.col(j);

    values.resize(points.size());
    gradients.resize(points.size(), 2);
    for (size_t p = 0; p < points.size(); ++p) {
        const auto loc = kl.fine_mesh.locate(points[p]);
        const auto& tri = kl.fine_mesh.triangles[loc.tri];
        double v = 0.0;
        for (int i = 0; i < 3; ++i) v += loc.bary[i] * nodal[tri[i]];
        values[static_cast<long>(p)] = v;

        const Eigen::Vector2d p0 = kl.fine_mesh.vertices[tri[0]];
        const Eigen::Vector2d p1 = kl.fine_mesh.vertices[tri[1]];
        const Eigen::Vector2d p2 = kl.fine_mesh.vertices[tri[2]];
        const double two_area =
            (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        const Eigen::Vector2d g0(p1[1] - p2[1], p2[0] - p1[0]);
        const Eigen::Vector2d g1(p2[1] - p0[1], p0[0] - p2[0]);
        const Eigen::Vector2d g2(p0[1] - p1[1], p1[0] - p0[0]);
        const Eigen::Vector2d grad =
            (nodal[tri[0]] * g0 + nodal[tri[1]] * g1 + nodal[tri[2]] * g2) / two_area;
        gradients.row(static_cast<long>(p)) = grad.transpose();
    }
}

namespace {
constexpr char kKlMagic[8] = {'N', 'S', 'Q', 'M', 'C', 'K', 'L', '1'};
}

void save_kl(const KLBasis& kl, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("save_kl: cannot open " + path);
    out.write(kKlMagic, 8);
    const std::int64_t fine_m = kl.fine_mesh.m;
    const std::int64_t s_max = kl.s_max;
    const std::int64_t n_nodes = kl.fine_mesh.n_vertices();
    out.write(reinterpret_cast<const char*>(&fine_m), 8);
    out.write(reinterpret_cast<const char*>(&s_max), 8);
    out.write(reinterpret_cast<const char*>(&kl.params.nu), 8);
    out.write(reinterpret_cast<const char*>(&kl.params.sigma2), 8);
    out.write(reinterpret_cast<const char*>(&kl.params.lambda_c), 8);
    out.write(reinterpret_cast<const char*>(&n_nodes), 8);
    out.write(reinterpret_cast<const char*>(kl.mu.data()),
              static_cast<std::streamsize>(sizeof(double) * kl.mu.size()));
    out.write(reinterpret_cast<const char*>(kl.xi.data()),
              static_cast<std::streamsize>(sizeof(double) * kl.xi.size()));
    if (!out) throw ConfigError("save_kl: write failed for " + path);
}

KLBasis load_kl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("load_kl: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kKlMagic, 8) != 0)
        throw ConfigError("load_kl: " + path + " is not a KL cache file");
    std::int64_t fine_m = 0, s_max = 0, n_nodes = 0;
    KLBasis kl;
    in.read(reinterpret_cast<char*>(&fine_m), 8);
    in.read(reinterpret_cast<char*>(&s_max), 8);
    in.read(reinterpret_cast<char*>(&kl.params.nu), 8);
    in.read(reinterpret_cast<char*>(&kl.params.sigma2), 8);
    in.read(reinterpret_cast<char*>(&kl.params.lambda_c), 8);
    in.read(reinterpret_cast<char*>(&n_nodes), 8);
    if (!in || fine_m < 1) throw ConfigError("load_kl: corrupt header in " + path);
    kl.fine_mesh = build_mesh(static_cast<int>(fine_m));
    if (kl.fine_mesh.n_vertices() != n_nodes)
        throw ConfigError("load_kl: node count mismatch in " + path);
    kl.s_max = static_cast<int>(s_max);
    kl.mu.resize(kl.s_max);
    kl.xi.resize(n_nodes, kl.s_max);
    in.read(reinterpret_cast<char*>(kl.mu.data()),
            static_cast<std::streamsize>(sizeof(double) * kl.mu.size()));
    in.read(reinterpret_cast<char*>(kl.xi.data()),
            static_cast<std::streamsize>(sizeof(double) * kl.xi.size()));
    if (!in) throw ConfigError("load_kl: truncated data in " + path);
    return kl;
}

} // namespace nsqmc
