#ifndef DGPS_DSVI_HPP
#define DGPS_DSVI_HPP

#include <vector>

#include <Eigen/Dense>

#include "dgps/dgp.hpp"
#include "dgps/diagnostics.hpp"
#include "dgps/gp_layer.hpp"
#include "dgps/rng.hpp"

namespace dgps {

// Gaussian variational posterior q(u_l) = N(m_l, S_l) per layer, with
// S_l = s_chol_l s_chol_l^T shared across the layer's output columns.
struct CoupledVarParams {
  std::vector<Eigen::MatrixXd> m;       // M x D_l
  std::vector<Eigen::MatrixXd> s_chol;  // M x M lower triangular, positive diagonal
};

// Which variable parameterizes the decoupled predictive mean.
enum class MeanParameterization {
  kCB,      // mu = K_xZa a                    (direct basis weights)
  kGP,      // mu = K_xZa K_ZaZa^{-1} m        (moment parameterization)
  kGPcent,  // mu = K_xZa L^{-T} m'            (whitened; L L^T = K_ZaZa)
};

// Decoupled parameterization: separate inducing sets for the layerwise mean
// (Z_a, typically larger) and variance (Z_b, typically smaller).
struct DecoupledLayerParams {
  Eigen::MatrixXd z_a;         // M_a x D_in
  Eigen::MatrixXd z_b;         // M_b x D_in
  Eigen::MatrixXd mean_param;  // M_a x D_l; a, m or m' depending on the parameterization
  Eigen::MatrixXd b_chol;      // M_b x M_b lower triangular; B = b_chol b_chol^T
};

struct DecoupledVarParams {
  std::vector<DecoupledLayerParams> layers;
};

// Marginal of the coupled variational posterior at the rows of x:
//   mean = mean_fn(x) + K_xZ K_ZZ^{-1} m
//   var  = diag(K_xx - K_xZ K_ZZ^{-1} (K_ZZ - S) K_ZZ^{-1} K_xZ^T)
ConditionalMoments variational_marginal(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                        const Eigen::MatrixXd& m, const Eigen::MatrixXd& s_chol,
                                        const KernelParams& kernel,
                                        const MeanFnSpec& mean_fn = MeanFnSpec::zero());

// Complete KL( N(m, S) || N(0, K_ZZ) ) summed over the columns of m:
//   1/2 ( tr(K^{-1} S) + m^T K^{-1} m - M + log det K - log det S ) per column.
double kl_coupled(const Eigen::MatrixXd& m, const Eigen::MatrixXd& s_chol,
                  const Eigen::MatrixXd& k_zz);

// Decoupled marginal:
//   mean = mean_fn(x) + (per MeanParameterization above)
//   var  = diag(K_xx - K_xZb (B^{-1} + K_ZbZb)^{-1} K_xZb^T)
// evaluated through b_chol without forming B^{-1}.
ConditionalMoments decoupled_marginal(const Eigen::MatrixXd& x, const DecoupledLayerParams& dec,
                                      const KernelParams& kernel, MeanParameterization kind,
                                      const MeanFnSpec& mean_fn = MeanFnSpec::zero());

// Decoupled KL per output column:
//   1/2 a^T K_ZaZa a + 1/2 log|I + K_ZbZb B| - 1/2 tr(K_ZbZb (B^{-1} + K_ZbZb)^{-1})
// with the additive constant fixed so the zero-information configuration
// (a = 0, B -> 0) gives exactly 0. With that convention the value matches
// kl_coupled exactly on matched configurations (constant 0).
double kl_decoupled(const DecoupledLayerParams& dec, const KernelParams& kernel,
                    MeanParameterization kind);

// Single-sample stochastic ELBO on a minibatch:
//   (N_total/batch) * log p(y_b | f_L^i) - sum_l KL_l,  layers sampled once.
double elbo_estimate(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                     const DGPModel& model, const CoupledVarParams& vp, RngStream& rng);
double elbo_estimate(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                     const DGPModel& model, const DecoupledVarParams& vp,
                     MeanParameterization kind, RngStream& rng);

// Pathwise ELBO gradients with frozen propagation noise, in the natural
// (matrix) parameter space. For triangular factors only the lower part is
// meaningful. Matches central finite differences of elbo_estimate at the
// same seed.
struct CoupledElboGrads {
  double value = 0.0;
  double kl_total = 0.0;
  std::vector<Eigen::MatrixXd> d_m;
  std::vector<Eigen::MatrixXd> d_s_chol;
  Eigen::VectorXd d_hypers;  // pack_hypers order
};
CoupledElboGrads elbo_grads(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                            const DGPModel& model, const CoupledVarParams& vp, RngStream& rng);

struct DecoupledElboGrads {
  double value = 0.0;
  double kl_total = 0.0;
  std::vector<Eigen::MatrixXd> d_mean_param;
  std::vector<Eigen::MatrixXd> d_b_chol;
  std::vector<Eigen::MatrixXd> d_z_a;
  std::vector<Eigen::MatrixXd> d_z_b;
  std::vector<Eigen::VectorXd> d_log_lengthscales;
  std::vector<double> d_log_signal_variance;
  double d_log_noise = 0.0;
};
DecoupledElboGrads elbo_grads(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                              const DGPModel& model, const DecoupledVarParams& vp,
                              MeanParameterization kind, RngStream& rng);

struct DsviTrainConfig {
  long iterations = 20000;
  double learning_rate = 0.01;
  int minibatch_size = 10000;
  bool optimize_hypers = true;  // kernel params and noise trained jointly
  bool fix_noise = false;
  long report_every = 50;
  std::string method_label = "dsvi_dgp";
};

// m = 0, S = 1e-5 * K_ZZ per layer.
CoupledVarParams make_coupled_varparams(const DGPModel& model);
// Z_a/Z_b subsampled-with-noise from the model's inducing inputs; mean
// parameter zero; B small (near the zero-information configuration).
DecoupledVarParams make_decoupled_varparams(const DGPModel& model, int m_a, int m_b,
                                            RngStream& rng);

// Jointly ascends the stochastic ELBO in the variational parameters and, if
// enabled, the hyperparameters, with a bias-corrected adaptive stepper.
// Emits (iteration, elbo, kl_total) records to the sink.
void dsvi_train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, DGPModel& model,
                CoupledVarParams& vp, const DsviTrainConfig& config, RngStream& rng,
                const DiagnosticsSink& sink = nullptr);
void dsvi_train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, DGPModel& model,
                DecoupledVarParams& vp, MeanParameterization kind,
                const DsviTrainConfig& config, RngStream& rng,
                const DiagnosticsSink& sink = nullptr);

// Mixture prediction for a trained variational model: one component per
// propagation seed, final layer reported as (marginal mean, var + sigma^2).
PredictiveMixture dsvi_predict(const Eigen::MatrixXd& x_star, const DGPModel& model,
                               const CoupledVarParams& vp, int n_seeds, RngStream& rng);
PredictiveMixture dsvi_predict(const Eigen::MatrixXd& x_star, const DGPModel& model,
                               const DecoupledVarParams& vp, MeanParameterization kind,
                               int n_seeds, RngStream& rng);

// Draws joint samples u_l ~ q(u_l) per layer and returns them flattened,
// matching the model's latent layout (coupled parameterization only).
Eigen::VectorXd sample_variational_latent(const DGPModel& model, const CoupledVarParams& vp,
                                          RngStream& rng);

}  // namespace dgps

#endif  // DGPS_DSVI_HPP
