#include "hqm/lm.hpp"

#include <cmath>
#include <limits>

namespace hqm {

LmResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LmOptions& opt) {
  const Eigen::Index n = x0.size();
  LmResult res;
  Eigen::VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  f(x, r, J);
  double chi2 = r.squaredNorm();
  if (!std::isfinite(chi2)) {
    res.x = x;
    res.chi2 = chi2;
    res.message = "non-finite residual at the starting point";
    return res;
  }

  double lambda = opt.lambda0;
  int stalls = 0;
  Eigen::VectorXd r_new;
  Eigen::MatrixXd J_new;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (chi2 == 0.0) {
      res.converged = true;
      res.message = "exact fit";
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::VectorXd d = A.diagonal();
    const double dmax = d.maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) d[i] = std::max(d[i], 1e-30 * std::max(dmax, 1e-300));

    bool accepted = false;
    while (lambda <= opt.lambda_max) {
      Eigen::MatrixXd M = A;
      M.diagonal() += lambda * d;
      const Eigen::VectorXd step = M.ldlt().solve(-g);
      const Eigen::VectorXd x_new = (x + step).cwiseMax(lower).cwiseMin(upper);
      if (!step.allFinite() || x_new == x) {
        lambda *= 10.0;
        continue;
      }
      f(x_new, r_new, J_new);
      const double chi2_new = r_new.squaredNorm();
      if (std::isfinite(chi2_new) && chi2_new < chi2) {
        const double decrease = chi2 - chi2_new;
        x = x_new;
        r.swap(r_new);
        J.swap(J_new);
        stalls = decrease <= opt.ftol * chi2 ? stalls + 1 : 0;
        chi2 = chi2_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left within the damping budget: a minimum.
      res.converged = true;
      res.message = "no further decrease";
      break;
    }
    if (stalls >= 2) {
      res.converged = true;
      res.message = "relative chi-square decrease below tolerance";
      break;
    }
  }
  if (!res.converged) res.message = "iteration limit reached";
  res.x = x;
  res.chi2 = chi2;
  res.jtj = J.transpose() * J;
  return res;
}

}  // namespace hqm
