#ifndef DGPS_DGP_HPP
#define DGPS_DGP_HPP

#include <vector>

#include <Eigen/Dense>

#include "dgps/flat_latent.hpp"
#include "dgps/gp_layer.hpp"
#include "dgps/rng.hpp"
#include "dgps/sample_window.hpp"

namespace dgps {

// A stack of sparse GP layers with a Gaussian likelihood.
struct DGPModel {
  std::vector<LayerState> layers;
  double log_noise_variance = std::log(1e-2);
  long n_total = 0;  // full dataset size for minibatch scaling (0: no scaling)

  int depth() const { return static_cast<int>(layers.size()); }
  int input_dim() const { return layers.front().d_in(); }
  int output_dim() const { return layers.back().d_out(); }
  double noise_variance() const { return std::exp(log_noise_variance); }

  // Checks layer dimension chaining and per-layer consistency.
  void validate() const;
};

LatentLayout latent_layout(const DGPModel& model);
// Snapshot of the model's inducing outputs as a flat position vector.
FlatLatent latent_from_model(const DGPModel& model);
// Writes a flat position vector back into the layers' u matrices.
void set_model_latent(DGPModel& model, const FlatLatent& latent);

// Hyperparameter vector theta: per layer [log_lengthscales; log_signal_variance;
// vec(Z)] in layer order, then log_noise_variance last.
Eigen::Index hyper_dim(const DGPModel& model);
Eigen::VectorXd pack_hypers(const DGPModel& model);
void unpack_hypers(const Eigen::VectorXd& theta, DGPModel& model);

// Draws f_1 .. f_L with f_0 = x; each layer sampled from its conditional
// given the previous layer's draw. Deterministic per rng seed.
std::vector<Eigen::MatrixXd> propagate(const Eigen::MatrixXd& x, const FlatLatent& latent,
                                       const DGPModel& model, RngStream& rng);

// sum_l sum_cols log N(u_l[:,c]; 0, K_{Z_l Z_l}), normalization included.
double log_prior(const FlatLatent& latent, const DGPModel& model);

// sum over entries of log N(y_ij; f_ij, sigma^2).
double gaussian_loglik(const Eigen::MatrixXd& y, const Eigen::MatrixXd& f,
                       double log_noise_variance);

// Monte Carlo estimate of log p(u, y):
//   (N_total / batch) * log p(y_b | f^i) + log p(u),  f^i ~ p(f | u, x_b).
double log_joint_estimate(const FlatLatent& latent, const Eigen::MatrixXd& x_batch,
                          const Eigen::MatrixXd& y_batch, const DGPModel& model, RngStream& rng);

enum class GradWrt { kLatent, kHypers, kBoth };

struct LogJointGrads {
  double value = 0.0;
  Eigen::VectorXd latent;  // empty unless requested
  Eigen::VectorXd hypers;  // empty unless requested
};

// Pathwise gradient of log_joint_estimate with the propagation noise frozen;
// matches central finite differences of log_joint_estimate at the same seed.
LogJointGrads grad_log_joint(const FlatLatent& latent, const Eigen::MatrixXd& x_batch,
                             const Eigen::MatrixXd& y_batch, const DGPModel& model,
                             RngStream& rng, GradWrt wrt);

// Equal-weight Gaussian mixture over per-sample predictions.
struct PredictiveMixture {
  struct Component {
    Eigen::MatrixXd mean;  // N* x P
    Eigen::MatrixXd var;   // N* x P, includes likelihood noise
  };
  std::vector<Component> components;

  Eigen::MatrixXd mean() const;  // uniform-weight mixture mean
};

// One component per stored sample: hidden layers propagated stochastically,
// final layer reported as (conditional mean, conditional var + sigma^2).
PredictiveMixture predict_mixture(const Eigen::MatrixXd& x_star, const SampleWindow& window,
                                  const DGPModel& model, RngStream& rng);

// Mean over test points of log( (1/S) sum_s N(y; mean_s, var_s) ), with the
// inner log-sum-exp computed stably. Output dims multiply within a component.
double mixture_mll(const PredictiveMixture& mixture, const Eigen::MatrixXd& y_star);

}  // namespace dgps

#endif  // DGPS_DGP_HPP
