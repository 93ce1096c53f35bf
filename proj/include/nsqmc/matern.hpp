#pragma once

namespace nsqmc {

/// Matern covariance parameters: smoothness nu > 1/2, variance sigma2 > 0,
/// length scale lambda_c > 0.
struct MaternParams {
    double nu = 2.5;
    double sigma2 = 1.0;
    double lambda_c = 1.0;

    void validate() const;
};

/// Matern kernel
///   rho(r) = sigma2 * 2^(1-nu)/Gamma(nu) * x^nu * K_nu(x),  x = 2 sqrt(nu) r / lambda_c,
/// continuously extended to rho(0) = sigma2.
double matern_cov(double r, const MaternParams& params);

} // namespace nsqmc
