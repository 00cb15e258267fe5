#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace somfdr {

struct LogisticFit {
  Eigen::VectorXd coef;
  bool intercept_only = false;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  std::string diagnostic;  // why the fit fell back to intercept-only, if it did

  double predict(const Eigen::RowVectorXd& x) const {
    if (intercept_only) return 1.0 / (1.0 + std::exp(-coef[0]));
    return 1.0 / (1.0 + std::exp(-x.dot(coef)));
  }
};

namespace detail {

inline double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = mu[i];
    d -= 2.0 * (y[i] > 0.5 ? std::log(p) : std::log1p(-p));
  }
  return d;
}

inline LogisticFit intercept_only_fit(const Eigen::VectorXd& y, std::string why) {
  LogisticFit f;
  f.intercept_only = true;
  f.converged = true;
  f.diagnostic = std::move(why);
  const double p = y.size() ? y.mean() : 0.0;
  f.coef = Eigen::VectorXd::Constant(1, p <= 0.0 ? -INFINITY : (p >= 1.0 ? INFINITY : std::log(p / (1.0 - p))));
  return f;
}

}  // namespace detail

/// Binary logistic regression by iteratively reweighted least squares. The
/// design must include its own intercept column (column 0). Rank deficiency,
/// separation or non-convergence fall back to the intercept-only model.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double dev_tol = 1e-10,
                                int max_iter = 100) {
  const auto n = x.rows(), p = x.cols();
  if (n == 0) return detail::intercept_only_fit(y, "no observations");
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) return detail::intercept_only_fit(y, "outcome is constant");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) return detail::intercept_only_fit(y, "design matrix is rank deficient");

  LogisticFit f;
  f.coef = Eigen::VectorXd::Zero(p);
  f.coef[0] = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = x * f.coef, mu(n), w(n), z(n);
  double dev_old = INFINITY;
  for (int it = 1; it <= max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-300);
      z[i] = eta[i] + (y[i] - mu[i]) / w[i];
    }
    const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd xtwz = x.transpose() * (w.array() * z.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      return detail::intercept_only_fit(y, "weighted normal equations are singular");
    f.coef = ldlt.solve(xtwz);
    eta = x * f.coef;
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    if (mu.minCoeff() < 1e-12 || mu.maxCoeff() > 1.0 - 1e-12)
      return detail::intercept_only_fit(y, "fitted probabilities hit 0 or 1 (separation)");
    const double dev = detail::binomial_deviance(y, mu);
    f.iterations = it;
    f.deviance = dev;
    if (std::abs(dev - dev_old) < dev_tol * (std::abs(dev) + 0.1)) {
      f.converged = true;
      return f;
    }
    dev_old = dev;
  }
  return detail::intercept_only_fit(y, "IRLS did not converge");
}

}  // namespace somfdr
