#include "dgps/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace dgps {

KernelParams KernelParams::isotropic(int dim, double lengthscale, double signal_variance) {
  KernelParams p;
  p.log_lengthscales = Eigen::VectorXd::Constant(dim, std::log(lengthscale));
  p.log_signal_variance = std::log(signal_variance);
  return p;
}

namespace {

double se_ard_row(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                  Eigen::Index j, const Eigen::VectorXd& inv_ls2, double sv) {
  double q = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double r = a(i, d) - b(j, d);
    q += r * r * inv_ls2(d);
  }
  return sv * std::exp(-0.5 * q);
}

}  // namespace

double se_ard(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime, const KernelParams& params) {
  if (x.size() != params.input_dim() || x_prime.size() != params.input_dim())
    throw std::invalid_argument("se_ard: point dimension does not match lengthscale count");
  double q = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double l = std::exp(params.log_lengthscales(d));
    const double r = (x(d) - x_prime(d)) / l;
    q += r * r;
  }
  return params.signal_variance() * std::exp(-0.5 * q);
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelParams& params) {
  if (a.cols() != params.input_dim() || b.cols() != params.input_dim())
    throw std::invalid_argument("gram: point dimension does not match lengthscale count");
  const double sv = params.signal_variance();
  const Eigen::VectorXd inv_ls2 =
      (-2.0 * params.log_lengthscales).array().exp();  // 1 / l_d^2

  Eigen::MatrixXd k(a.rows(), b.rows());
  const bool aliased = a.data() == b.data() && a.rows() == b.rows();
  if (aliased) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k(i, i) = sv;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double v = se_ard_row(a, i, b, j, inv_ls2, sv);
        k(i, j) = v;
        k(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = se_ard_row(a, i, b, j, inv_ls2, sv);
  }
  return k;
}

}  // namespace dgps
