#include "dgps/gp_layer.hpp"

#include <stdexcept>

#include "dgps/errors.hpp"
#include "dgps/linalg.hpp"
#include "dgps/numerics.hpp"

namespace dgps {

MeanFnSpec MeanFnSpec::identity() {
  MeanFnSpec s;
  s.kind = Kind::kIdentity;
  return s;
}

Eigen::MatrixXd MeanFnSpec::apply(const Eigen::MatrixXd& x, Eigen::Index d_out) const {
  switch (kind) {
    case Kind::kZero:
      return Eigen::MatrixXd::Zero(x.rows(), d_out);
    case Kind::kIdentity:
      if (x.cols() != d_out)
        throw std::invalid_argument("MeanFnSpec: identity requires equal widths");
      return x;
    case Kind::kProjection:
      if (projection.rows() != x.cols() || projection.cols() != d_out)
        throw std::invalid_argument("MeanFnSpec: projection shape mismatch");
      return x * projection;
  }
  throw std::invalid_argument("MeanFnSpec: unknown kind");
}

MeanFnSpec make_mean_fn(int d_in, int d_out, const Eigen::MatrixXd& training_inputs) {
  if (d_in == d_out) return MeanFnSpec::identity();
  if (d_out > d_in)
    throw std::invalid_argument("make_mean_fn: projection requires d_out <= d_in");
  if (training_inputs.rows() == 0)
    throw std::invalid_argument("make_mean_fn: projection requires training inputs");
  if (training_inputs.cols() != d_in)
    throw std::invalid_argument("make_mean_fn: training input width does not match d_in");

  Eigen::MatrixXd centered = training_inputs.rowwise() - training_inputs.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  MeanFnSpec s;
  s.kind = MeanFnSpec::Kind::kProjection;
  s.projection = svd.matrixV().leftCols(d_out);
  return s;
}

void LayerState::validate() const {
  if (u.rows() != z.rows())
    throw std::invalid_argument("LayerState: u row count must equal Z row count");
  if (kernel.input_dim() != d_in())
    throw std::invalid_argument("LayerState: kernel input dim must equal Z width");
}

ConditionalMoments conditional(const Eigen::MatrixXd& x_in, const LayerState& layer) {
  if (x_in.cols() != layer.d_in())
    throw std::invalid_argument("conditional: input width does not match layer");

  const CholFactor lz = chol_psd(gram(layer.z, layer.z, layer.kernel), kGraphJitter);
  const Eigen::MatrixXd kzx = gram(layer.z, x_in, layer.kernel);
  const Eigen::MatrixXd a = tri_solve(lz, kzx, TriMode::kForward);       // M x N
  const Eigen::MatrixXd w = tri_solve(lz, layer.u, TriMode::kForward);   // M x D_out

  ConditionalMoments out;
  out.mean = layer.mean_fn.apply(x_in, layer.d_out()) + a.transpose() * w;

  Eigen::VectorXd var =
      Eigen::VectorXd::Constant(x_in.rows(), layer.kernel.signal_variance()) -
      a.colwise().squaredNorm().transpose();
  clamp_variances(var);
  out.var_diag = var.replicate(1, layer.d_out());
  return out;
}

Eigen::MatrixXd sample_layer(const ConditionalMoments& moments, RngStream& rng) {
  const Eigen::MatrixXd eps = rng.normal_matrix(moments.mean.rows(), moments.mean.cols());
  return moments.mean + moments.var_diag.cwiseMax(0.0).cwiseSqrt().cwiseProduct(eps);
}

}  // namespace dgps
