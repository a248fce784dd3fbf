#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace hqm {

struct LmOptions {
  int max_iterations = 2000;
  double ftol = 1e-14;  ///< relative chi-square decrease that counts as stalled
  double lambda0 = 1e-3;
  double lambda_max = 1e16;
};

struct LmResult {
  Eigen::VectorXd x;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  Eigen::MatrixXd jtj;  ///< J^T J at the solution (weighted)
};

/// Fills the weighted residual vector r and its Jacobian J at x.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J)>;

/// Levenberg-Marquardt with Marquardt diagonal scaling. Trial points are
/// projected onto the box [lower, upper].
LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt = {});

}  // namespace hqm
