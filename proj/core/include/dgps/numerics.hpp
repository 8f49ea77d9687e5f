#ifndef DGPS_NUMERICS_HPP
#define DGPS_NUMERICS_HPP

#include <Eigen/Dense>

#include "dgps/errors.hpp"

namespace dgps {

// Absolute base jitter used by the model's internal Cholesky calls. Kept
// independent of the hyperparameters so the recorded gradient graphs stay
// consistent with finite differences; inputs and targets are normalized, so
// kernel matrices are O(1) in scale.
inline constexpr double kGraphJitter = 1e-6;

// Variance entries below this are treated as round-off and clamped to zero;
// anything more negative indicates a broken factorization.
inline constexpr double kVarianceRoundoff = -1e-10;

inline void clamp_variances(Eigen::Ref<Eigen::VectorXd> var) {
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (var(i) < kVarianceRoundoff)
      throw NumericalError("conditional variance is negative beyond round-off");
    if (var(i) < 0.0) var(i) = 0.0;
  }
}

}  // namespace dgps

#endif  // DGPS_NUMERICS_HPP
