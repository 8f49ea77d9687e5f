// Taped computation graphs shared by the gradient paths: the stochastic
// log-joint (sampler and hyperparameter steps) and the coupled/decoupled
// stochastic ELBOs. Internal to the library.
#ifndef DGPS_SRC_GRAPHS_HPP
#define DGPS_SRC_GRAPHS_HPP

#include <vector>

#include "dgps/dgp.hpp"
#include "dgps/dsvi.hpp"
#include "dgps/tape.hpp"

namespace dgps::detail {

struct HyperVars {
  ad::Var z;
  ad::Var log_ls;
  ad::Var log_sv;
};

struct JointGraph {
  ad::Tape tape;
  std::vector<ad::Var> u;
  std::vector<HyperVars> hyper;
  ad::Var log_noise;
  ad::Var root;

  double value() const { return tape.scalar(root); }
};

// Records (N_total/batch) * log p(y_b | f^i) + log p(u) with the layer noise
// draws taken from rng (one N x D_l matrix per layer, in layer order).
JointGraph build_log_joint_graph(const DGPModel& model, const FlatLatent& latent,
                                 const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                                 RngStream& rng, bool diff_latent, bool diff_hypers);

// Gathers [d log_ls; d log_sv; d vec(Z)] per layer plus d log_noise into the
// pack_hypers order.
Eigen::VectorXd collect_hyper_grads(const ad::Tape& tape, const std::vector<HyperVars>& hyper,
                                    ad::Var log_noise, const DGPModel& model);

struct CoupledElboGraph {
  ad::Tape tape;
  std::vector<ad::Var> m;
  std::vector<ad::Var> s_chol;
  std::vector<HyperVars> hyper;
  ad::Var log_noise;
  ad::Var kl_total;
  ad::Var root;

  double value() const { return tape.scalar(root); }
};

CoupledElboGraph build_coupled_elbo_graph(const DGPModel& model, const CoupledVarParams& vp,
                                          const Eigen::MatrixXd& x_batch,
                                          const Eigen::MatrixXd& y_batch, RngStream& rng,
                                          bool diff_var, bool diff_hypers);

struct DecoupledElboGraph {
  ad::Tape tape;
  std::vector<ad::Var> mean_param;
  std::vector<ad::Var> b_chol;
  std::vector<ad::Var> z_a;
  std::vector<ad::Var> z_b;
  std::vector<HyperVars> hyper;  // z member unused (inducing inputs live in z_a/z_b)
  ad::Var log_noise;
  ad::Var kl_total;
  ad::Var root;

  double value() const { return tape.scalar(root); }
};

DecoupledElboGraph build_decoupled_elbo_graph(const DGPModel& model, const DecoupledVarParams& vp,
                                              MeanParameterization kind,
                                              const Eigen::MatrixXd& x_batch,
                                              const Eigen::MatrixXd& y_batch, RngStream& rng,
                                              bool diff_var, bool diff_hypers);

// Minibatch scale factor N_total / batch (1 when n_total is unset).
double batch_scale(const DGPModel& model, Eigen::Index batch_rows);

}  // namespace dgps::detail

#endif  // DGPS_SRC_GRAPHS_HPP
