#include "dgps/targets.hpp"

#include <stdexcept>

namespace dgps {

std::vector<Eigen::Index> draw_batch_indices(Eigen::Index n, Eigen::Index batch, RngStream& rng) {
  std::vector<Eigen::Index> idx(n);
  for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
  if (batch >= n || batch <= 0) return idx;
  // Partial Fisher-Yates.
  for (Eigen::Index i = 0; i < batch; ++i) {
    const Eigen::Index j = i + rng.uniform_int(static_cast<int>(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

namespace {

void gather_rows(const Eigen::MatrixXd& src, const std::vector<Eigen::Index>& rows,
                 Eigen::MatrixXd& out) {
  out.resize(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
}

}  // namespace

DgpLatentTarget::DgpLatentTarget(DGPModel& model, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& y, Eigen::Index minibatch)
    : model_(&model), x_(&x), y_(&y), minibatch_(minibatch) {
  model.validate();
  if (x.rows() != y.rows()) throw std::invalid_argument("DgpLatentTarget: x/y row mismatch");
}

Eigen::Index DgpLatentTarget::dim() const { return latent_layout(*model_).total(); }

std::pair<double, Eigen::VectorXd> DgpLatentTarget::value_and_grad(const Eigen::VectorXd& u,
                                                                   RngStream& rng) {
  FlatLatent latent{u, latent_layout(*model_)};
  if (minibatch_ >= x_->rows()) {
    LogJointGrads g = grad_log_joint(latent, *x_, *y_, *model_, rng, GradWrt::kLatent);
    return {g.value, std::move(g.latent)};
  }
  const std::vector<Eigen::Index> rows = draw_batch_indices(x_->rows(), minibatch_, rng);
  Eigen::MatrixXd xb, yb;
  gather_rows(*x_, rows, xb);
  gather_rows(*y_, rows, yb);
  LogJointGrads g = grad_log_joint(latent, xb, yb, *model_, rng, GradWrt::kLatent);
  return {g.value, std::move(g.latent)};
}

DgpHyperTarget::DgpHyperTarget(DGPModel& model, const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& y, Eigen::Index minibatch, bool fix_noise)
    : model_(&model), x_(&x), y_(&y), minibatch_(minibatch), fix_noise_(fix_noise) {
  model.validate();
  if (x.rows() != y.rows()) throw std::invalid_argument("DgpHyperTarget: x/y row mismatch");
}

Eigen::Index DgpHyperTarget::dim() const { return hyper_dim(*model_); }

std::pair<double, Eigen::VectorXd> DgpHyperTarget::value_and_grad(const Eigen::VectorXd& latent,
                                                                  RngStream& rng) {
  FlatLatent flat{latent, latent_layout(*model_)};
  LogJointGrads g;
  if (minibatch_ >= x_->rows()) {
    g = grad_log_joint(flat, *x_, *y_, *model_, rng, GradWrt::kHypers);
  } else {
    const std::vector<Eigen::Index> rows = draw_batch_indices(x_->rows(), minibatch_, rng);
    Eigen::MatrixXd xb, yb;
    gather_rows(*x_, rows, xb);
    gather_rows(*y_, rows, yb);
    g = grad_log_joint(flat, xb, yb, *model_, rng, GradWrt::kHypers);
  }
  if (fix_noise_) g.hypers(g.hypers.size() - 1) = 0.0;
  return {g.value, std::move(g.hypers)};
}

Eigen::VectorXd DgpHyperTarget::get_hypers() const { return pack_hypers(*model_); }

void DgpHyperTarget::set_hypers(const Eigen::VectorXd& theta) { unpack_hypers(theta, *model_); }

}  // namespace dgps
