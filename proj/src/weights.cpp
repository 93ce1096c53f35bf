#include "nsqmc/weights.hpp"

#include "nsqmc/errors.hpp"

#include <cmath>

namespace nsqmc {

double riemann_zeta(double x) {
    if (!(x > 1.0)) throw std::invalid_argument("riemann_zeta: requires x > 1");
    const int K = 64;
    double sum = 0.0;
    for (int k = 1; k < K; ++k) sum += std::pow(k, -x);
    const double Kx = std::pow(K, -x);
    sum += K * Kx / (x - 1.0);     // K^{1-x}/(x-1)
    sum += 0.5 * Kx;
    sum += x * Kx / (12.0 * K);
    sum -= x * (x + 1) * (x + 2) * Kx / (720.0 * K * K * K);
    sum += x * (x + 1) * (x + 2) * (x + 3) * (x + 4) * Kx /
           (30240.0 * std::pow(static_cast<double>(K), 5));
    return sum;
}

double rho_factor(double lambda, double a) {
    if (!(lambda > 0.5 && lambda <= 1.0))
        throw std::invalid_argument("rho_factor: lambda must lie in (1/2, 1]");
    if (!(a > 0.0)) throw std::invalid_argument("rho_factor: a must be positive");
    const double eta = (2.0 * lambda - 1.0) / (4.0 * lambda);
    const double inner = std::sqrt(2.0 * M_PI) * std::exp(a * a / eta) /
                         (std::pow(M_PI, 2.0 - 2.0 * eta) * (1.0 - eta) * eta);
    return 2.0 * std::pow(inner, lambda) * riemann_zeta(lambda + 0.5);
}

double choose_lambda(double p_hat, double delta) {
    if (!(p_hat > 0.0 && p_hat <= 1.0))
        throw ConfigError("choose_lambda: p_hat must lie in (0,1]");
    if (!(delta > 0.0 && delta <= 0.5))
        throw ConfigError("choose_lambda: delta must lie in (0,1/2]");
    if (p_hat <= 2.0 / 3.0) return 1.0 / (2.0 - 2.0 * delta);
    if (p_hat < 1.0) return p_hat / (2.0 - p_hat);
    return 1.0;
}

double choose_a(double lambda_star) {
    if (!(lambda_star > 0.5 && lambda_star <= 1.0))
        throw ConfigError("choose_a: lambda_star must lie in (1/2, 1]");
    return std::sqrt((2.0 * lambda_star - 1.0) / (8.0 * lambda_star));
}

double PODWeights::gamma_order(int ell) const {
    if (ell <= 0) return 1.0;
    return std::exp((2.0 * std::lgamma(ell + 1.0) + ell * std::log(4.0)) /
                    (1.0 + lambda_star));
}

double PODWeights::gamma_subset(std::span<const int> u) const {
    double prod = gamma_order(static_cast<int>(u.size()));
    for (int j : u) prod *= gamma_j[j - 1];
    return prod;
}

double PODWeights::gamma_subset_direct(std::span<const int> u) const {
    const int n = static_cast<int>(u.size());
    double log_inner = 2.0 * std::lgamma(n + 1.0) + n * std::log(4.0);
    for (int j : u) {
        const double bj = b[j - 1];
        if (bj == 0.0) return 0.0;
        log_inner += std::log(bj * bj / (a[j - 1] * rho[j - 1]));
    }
    return std::exp(log_inner / (1.0 + lambda_star));
}

PODWeights PODWeights::from_b(const Eigen::VectorXd& b, double p_hat,
                              double delta) {
    PODWeights w;
    w.lambda_star = choose_lambda(p_hat, delta);
    w.delta = delta;
    const double a = choose_a(w.lambda_star);
    const double rho = rho_factor(w.lambda_star, a);
    const int s = static_cast<int>(b.size());
    w.a.assign(s, a);
    w.rho.assign(s, rho);
    w.b.resize(s);
    w.gamma_j.resize(s);
    for (int j = 0; j < s; ++j) {
        w.b[j] = b[j];
        w.gamma_j[j] = std::pow(b[j] * b[j] / (a * rho), 1.0 / (1.0 + w.lambda_star));
    }
    return w;
}

PODWeights PODWeights::explicit_weights(double lambda_star,
                                        std::vector<double> gamma_j,
                                        std::vector<double> a) {
    PODWeights w;
    w.lambda_star = lambda_star;
    w.delta = 0.0;
    w.gamma_j = std::move(gamma_j);
    w.a = std::move(a);
    w.b.assign(w.gamma_j.size(), 0.0);
    w.rho.assign(w.gamma_j.size(), 0.0);
    return w;
}

} // namespace nsqmc
