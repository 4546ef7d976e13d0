#pragma once

#include <functional>
#include <vector>

namespace fluxtrace::levmar {

/// Residual callback: fills `out` (fixed length) from the parameter vector.
using ResidualFn = std::function<void(const std::vector<double>& params,
                                      std::vector<double>& out)>;

struct Options {
    int max_iterations = 200;
    double lambda0 = 1e-3;         ///< initial damping
    double lambda_up = 8.0;        ///< damping growth on a rejected step
    double lambda_down = 0.25;     ///< damping decay on an accepted step
    double cost_tol = 1e-12;       ///< relative cost-decrease stop
    double step_tol = 1e-11;       ///< relative parameter-step stop
    double jacobian_step = 1e-7;   ///< relative forward-difference step
};

struct Result {
    std::vector<double> params;
    double cost = 0.0; ///< 0.5 * sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

/// Damped least squares with a Levenberg-Marquardt style contract:
/// the accepted cost sequence is monotone non-increasing, the iteration
/// count is bounded, and box bounds are enforced by projection. The
/// Jacobian is formed by forward differences.
Result fit(const ResidualFn& residuals, std::size_t n_residuals,
           std::vector<double> initial,
           const std::vector<double>& lower = {},
           const std::vector<double>& upper = {},
           const Options& opts = {});

} // namespace fluxtrace::levmar
