#ifndef DGPS_GP_LAYER_HPP
#define DGPS_GP_LAYER_HPP

#include <Eigen/Dense>

#include "dgps/kernel.hpp"
#include "dgps/rng.hpp"

namespace dgps {

// Deterministic mean function added to a layer's GP conditional mean.
// Hidden layers default to identity (equal widths) or an orthonormal SVD
// projection (shrinking widths); without it, deep prior stacks collapse.
struct MeanFnSpec {
  enum class Kind { kZero, kIdentity, kProjection };

  Kind kind = Kind::kZero;
  Eigen::MatrixXd projection;  // D_in x D_out, orthonormal columns (kProjection only)

  static MeanFnSpec zero() { return {}; }
  static MeanFnSpec identity();

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x, Eigen::Index d_out) const;
};

// Identity when dimensions match, otherwise projection onto the top-d_out
// right singular vectors of the centered training inputs.
MeanFnSpec make_mean_fn(int d_in, int d_out, const Eigen::MatrixXd& training_inputs);

// One sparse GP layer. The kernel (and hence the inducing covariance) is
// shared across the d_out output columns.
struct LayerState {
  Eigen::MatrixXd z;       // M x D_in inducing inputs
  Eigen::MatrixXd u;       // M x D_out inducing outputs
  KernelParams kernel;     // input dim D_in
  MeanFnSpec mean_fn;

  int m() const { return static_cast<int>(z.rows()); }
  int d_in() const { return static_cast<int>(z.cols()); }
  int d_out() const { return static_cast<int>(u.cols()); }

  void validate() const;
};

// Per-point conditional moments; the variance is shared across output
// columns and stored replicated.
struct ConditionalMoments {
  Eigen::MatrixXd mean;      // N x D_out
  Eigen::MatrixXd var_diag;  // N x D_out, nonnegative
};

// p(f | u) moments at the rows of x_in:
//   mean = mean_fn(x_in) + K_xZ K_ZZ^{-1} u
//   var  = diag(K_xx - K_xZ K_ZZ^{-1} K_xZ^T)
ConditionalMoments conditional(const Eigen::MatrixXd& x_in, const LayerState& layer);

// mean + sqrt(var_diag) .* standard normal draws; deterministic per seed.
Eigen::MatrixXd sample_layer(const ConditionalMoments& moments, RngStream& rng);

}  // namespace dgps

#endif  // DGPS_GP_LAYER_HPP
