#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace nsqmc {

/// Riemann zeta for real x > 1 (direct sum plus Euler-Maclaurin tail).
double riemann_zeta(double x);

/// rho(lambda, a) = 2 (sqrt(2 pi) e^{a^2/eta} / (pi^{2-2 eta} (1-eta) eta))^lambda
///                  * zeta(lambda + 1/2),   eta = (2 lambda - 1) / (4 lambda).
/// Requires lambda in (1/2, 1] and a > 0.
double rho_factor(double lambda, double a);

/// Three-branch selection of lambda*:
///   p in (0, 2/3]  -> 1 / (2 - 2 delta)
///   p in (2/3, 1)  -> p / (2 - p)
///   p = 1          -> 1
double choose_lambda(double p_hat, double delta);

/// a = sqrt((2 lambda* - 1) / (8 lambda*)), shared by every dimension.
double choose_a(double lambda_star);

/// Product-and-order-dependent weights
///   gamma_u = Gamma_{|u|} prod_{j in u} gamma_j
/// with Gamma_l = ((l!)^2 4^l)^{1/(1+lambda)} and
/// gamma_j = (b_j^2 / (a_j rho_j))^{1/(1+lambda)}.
struct PODWeights {
    double lambda_star = 0.0;
    double delta = 0.0;
    std::vector<double> a;        // per-dimension weight-function exponents
    std::vector<double> gamma_j;  // per-dimension factors
    std::vector<double> b;        // b_j the weights were built from
    std::vector<double> rho;      // rho_j(lambda*)

    int dims() const { return static_cast<int>(gamma_j.size()); }

    /// Order factor Gamma_l (Gamma_0 = 1).
    double gamma_order(int ell) const;

    /// Reconstructed subset weight Gamma_{|u|} prod gamma_j (1-based dims).
    double gamma_subset(std::span<const int> u) const;

    /// Subset weight from the closed-form expression in one evaluation;
    /// reconstruction must match this to 1e-12 relative.
    double gamma_subset_direct(std::span<const int> u) const;

    static PODWeights from_b(const Eigen::VectorXd& b, double p_hat, double delta);

    /// Explicit weights for tests and synthetic cases.
    static PODWeights explicit_weights(double lambda_star,
                                       std::vector<double> gamma_j,
                                       std::vector<double> a);
};

} // namespace nsqmc
