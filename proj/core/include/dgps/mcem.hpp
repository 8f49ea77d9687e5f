#ifndef DGPS_MCEM_HPP
#define DGPS_MCEM_HPP

#include <Eigen/Dense>

#include "dgps/diagnostics.hpp"
#include "dgps/rng.hpp"
#include "dgps/sample_window.hpp"
#include "dgps/sghmc.hpp"
#include "dgps/targets.hpp"

namespace dgps {

// Bias-corrected first/second-moment adaptive stepper state ("stepSGD").
struct OptimizerState {
  Eigen::VectorXd m1;
  Eigen::VectorXd m2;
  long step_count = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState create(Eigen::Index dim, double learning_rate = 0.01);
};

// Returns the ascent increment for the given gradient; the caller adds it.
// Deterministic; per-coordinate magnitude approaches learning_rate under a
// constant gradient.
Eigen::VectorXd adaptive_step(OptimizerState& opt, const Eigen::VectorXd& grad);

struct McemStepInfo {
  double log_joint = 0.0;
  double grad_norm = 0.0;
};

// One Moving Window MCEM hyperparameter step: draw a uniformly random sample
// from the window and take one adaptive ascent step on log p(y, u' | x, theta).
// The window itself is never mutated here; the sampler owns its contents.
McemStepInfo mw_mcem_step(const SampleWindow& window, HyperTarget& target, OptimizerState& opt,
                          RngStream& rng);

struct McemConfig {
  int m = 10;                  // E-step sample-set size
  long e_step_chain_iters = 500;  // chain iterations per E-step
  long m_step_iters = 100;     // ascent steps per M-step
  int max_outer = 10;
  double learning_rate = 0.01;
};

// Classical MCEM baseline: alternate E-steps (m fresh posterior samples
// collected evenly over e_step_chain_iters chain iterations, auto-tuning
// active) with M-steps ascending Q(theta) = (1/m) sum_i log p(y, u_i | x, theta)
// for a fixed step budget. Returns the final hyperparameters.
Eigen::VectorXd mcem_run(HyperTarget& hyper_target, StochasticTarget& latent_target,
                         SamplerState& chain, const McemConfig& config, RngStream& rng,
                         const DiagnosticsSink& sink = nullptr,
                         const std::string& method = "mcem",
                         const WallClock* clock = nullptr);

}  // namespace dgps

#endif  // DGPS_MCEM_HPP
