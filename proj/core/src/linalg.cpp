#include "dgps/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgps {

namespace {
constexpr double kRelBaseJitter = 1e-6;
constexpr double kRelJitterCeiling = 1e-2;
}  // namespace

CholFactor chol_psd(const Eigen::MatrixXd& a, double base_jitter) {
  if (a.rows() != a.cols()) throw std::invalid_argument("chol_psd: matrix must be square");
  const double scale = std::max(a.norm(), 1.0);
  if ((a - a.transpose()).norm() > 1e-10 * scale)
    throw std::invalid_argument("chol_psd: matrix is not symmetric to 1e-10 relative error");

  const double mean_diag = std::max(a.diagonal().mean(), 1e-300);
  const double ceiling = kRelJitterCeiling * mean_diag;

  double jitter = base_jitter;
  while (true) {
    Eigen::MatrixXd shifted = a;
    if (jitter > 0.0) shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    const double next = jitter == 0.0 ? kRelBaseJitter * mean_diag : jitter * 10.0;
    if (next > ceiling)
      throw NumericalError(
          "chol_psd: factorization failed at jitter ceiling (last jitter " + std::to_string(jitter) + ")",
          jitter);
    jitter = next;
  }
}

CholFactor chol_psd(const Eigen::MatrixXd& a) {
  const double mean_diag = std::max(a.diagonal().mean(), 1e-300);
  return chol_psd(a, kRelBaseJitter * mean_diag);
}

Eigen::MatrixXd tri_solve(const CholFactor& factor, const Eigen::MatrixXd& rhs, TriMode mode) {
  const Eigen::MatrixXd& l = factor.lower;
  if (l.rows() != rhs.rows())
    throw std::invalid_argument("tri_solve: rhs row count does not match factor size");
  switch (mode) {
    case TriMode::kForward:
      return l.triangularView<Eigen::Lower>().solve(rhs);
    case TriMode::kBackward:
      return l.transpose().triangularView<Eigen::Upper>().solve(rhs);
    case TriMode::kFullInverseApply: {
      Eigen::MatrixXd y = l.triangularView<Eigen::Lower>().solve(rhs);
      return l.transpose().triangularView<Eigen::Upper>().solve(y);
    }
  }
  throw std::invalid_argument("tri_solve: unknown mode");
}

}  // namespace dgps
