#ifndef DGPS_KERNEL_HPP
#define DGPS_KERNEL_HPP

#include <Eigen/Dense>

namespace dgps {

// Squared-exponential ARD kernel hyperparameters, stored in log form so
// positivity can never be violated by a gradient step.
struct KernelParams {
  Eigen::VectorXd log_lengthscales;  // one per input dimension
  double log_signal_variance = 0.0;

  int input_dim() const { return static_cast<int>(log_lengthscales.size()); }
  Eigen::VectorXd lengthscales() const { return log_lengthscales.array().exp(); }
  double signal_variance() const { return std::exp(log_signal_variance); }

  static KernelParams isotropic(int dim, double lengthscale = 1.0, double signal_variance = 1.0);
};

// k(x, x') = sigma_k^2 * exp(-1/2 * sum_d (x_d - x'_d)^2 / l_d^2)
double se_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const KernelParams& params);

// |A| x |B| covariance matrix with entries k(A_i, B_j); points are rows.
// The diagonal of gram(A, A) is exactly sigma_k^2 and the result is exactly
// symmetric in that case.
Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelParams& params);

}  // namespace dgps

#endif  // DGPS_KERNEL_HPP
