#pragma once

namespace nsqmc {

/// Standard normal CDF via erfc (accurate in both tails).
double norm_cdf(double x);

/// Inverse standard normal CDF: rational initial guess refined by Halley
/// steps against the erfc-based CDF. Throws std::invalid_argument for
/// v outside (0,1).
double inv_norm_cdf(double v);

} // namespace nsqmc
