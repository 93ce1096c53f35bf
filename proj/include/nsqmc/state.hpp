#pragma once

#include <Eigen/Dense>

namespace nsqmc {

/// Discrete velocity/pressure pair at one time level. Velocity coefficients
/// cover all dofs (Dirichlet entries zero); pressure is zero-mean.
struct VelocityState {
    Eigen::VectorXd u;
    Eigen::VectorXd p;
    int time_index = 0;
};

} // namespace nsqmc
