#ifndef DGPS_LINALG_HPP
#define DGPS_LINALG_HPP

#include <Eigen/Dense>

#include "dgps/errors.hpp"

namespace dgps {

// Lower Cholesky factor of A + jitter_used * I.
struct CholFactor {
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;
};

// Factors a symmetric PSD matrix, escalating jitter geometrically (x10)
// from base_jitter until the factorization succeeds. The ceiling is
// 1e-2 relative to the mean diagonal; exceeding it raises NumericalError
// carrying the last attempted jitter. base_jitter is an absolute value;
// a zero base retries from 1e-6 relative to the mean diagonal.
CholFactor chol_psd(const Eigen::MatrixXd& a, double base_jitter);

// Default base jitter: 1e-6 relative to the mean diagonal.
CholFactor chol_psd(const Eigen::MatrixXd& a);

enum class TriMode {
  kForward,           // solve L x = rhs
  kBackward,          // solve L^T x = rhs
  kFullInverseApply,  // (L L^T)^{-1} rhs
};

Eigen::MatrixXd tri_solve(const CholFactor& factor, const Eigen::MatrixXd& rhs, TriMode mode);

}  // namespace dgps

#endif  // DGPS_LINALG_HPP
