#pragma once

#include "nsqmc/weights.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nsqmc {

/// Rank-1 lattice rule: N points, generating vector z with gcd(z_j, N) = 1.
struct LatticeRule {
    int N = 0;
    std::vector<int> z;

    void validate() const;
};

std::uint64_t euler_totient(std::uint64_t n);

/// Ascending list of 1 <= z <= N-1 with gcd(z, N) = 1.
std::vector<int> coprime_candidates(int N);

/// Shift-averaged worst-case-error kernel
///   theta(f) = 2 [ int_0^A (Phi(1-Phi) - min(f,1-f)) e^{2at} dt
///                - int_A^inf (1-Phi)^2 e^{2at} dt ],  A = Phi^{-1}(max(f,1-f)),
/// the exact combination of the three divergent weight-space integrals with
/// psi^2(t) = e^{-2a|t|}. Adaptive Gauss-Kronrod panels; the upper limit is
/// extended until the Gaussian tail bound drops below 1e-16 of the running
/// total. Absolute accuracy ~1e-10 at the default tolerance.
double theta_kernel(double f, double a, double tol = 1e-12);

/// theta(k/N) for k = 0..N-1; the table is symmetric about k = N/2.
std::vector<double> theta_table(int N, double a, double tol = 1e-12);

void save_theta_table(const std::vector<double>& table, int N, double a,
                      double tol, const std::string& path);
/// Returns an empty vector if the file does not exist or its key mismatches.
std::vector<double> load_theta_table(int N, double a, double tol,
                                     const std::string& path);

/// (e^sh)^2 via the POD order recursion
///   q_i^{(j)}(l) = q_i^{(j-1)}(l) + gamma_j theta(frac(i z_j / N)) q_i^{(j-1)}(l-1),
///   (e^sh)^2 = (1/N) sum_i sum_{l>=1} Gamma_l q_i(l),
/// which equals the sum over nonempty subsets of {1:s}. Orders are tracked
/// up to order_cap; the cap is grown when the top order still contributes
/// more than 1e-14 of the total.
double shift_avg_error_sq(const LatticeRule& rule, const PODWeights& weights,
                          int s, const std::vector<double>& theta_tab,
                          int order_cap = 30);

/// Component-by-component construction: for d = 1..s pick the coprime z
/// minimizing the shift-averaged error of (z_1..z_{d-1}, z). Ties (within
/// roundoff; z and N-z always tie exactly) break to the smallest candidate.
/// Deterministic for any worker count.
LatticeRule cbc_construct(int N, int s, const PODWeights& weights,
                          const std::vector<double>& theta_tab,
                          int order_cap = 30, int n_workers = 0);

void save_lattice(const LatticeRule& rule, const std::string& path);
LatticeRule load_lattice(const std::string& path);

/// Row i-1 = frac(i z / N + shift) for i = 1..N (first s components of z).
Eigen::MatrixXd generate_points(const LatticeRule& rule,
                                const Eigen::VectorXd& shift, int s);

/// Componentwise inverse normal CDF; exact zeros are nudged to 2^-53 first.
Eigen::MatrixXd map_to_gaussian(const Eigen::MatrixXd& points);

/// One uniform random shift in [0,1)^s.
Eigen::VectorXd make_shift(int s, std::uint64_t seed);

/// R independent uniform shifts; shift r is drawn from the documented
/// generator seeded with base_seed ^ r.
struct ShiftSet {
    int R = 0;
    Eigen::MatrixXd deltas; // R x s, coordinates in [0,1)
    std::uint64_t base_seed = 0;
};

ShiftSet make_shifts(int R, int s, std::uint64_t base_seed);

/// Mean of the evaluator over the N mapped points. Evaluator failures are
/// rethrown with the 1-based point index attached.
double qmc_quadrature(const std::function<double(const Eigen::VectorXd&)>& evaluator,
                      const LatticeRule& rule, const Eigen::VectorXd& shift);

} // namespace nsqmc
