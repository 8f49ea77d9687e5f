#ifndef DGPS_SGHMC_HPP
#define DGPS_SGHMC_HPP

#include <chrono>
#include <functional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dgps/diagnostics.hpp"
#include "dgps/rng.hpp"
#include "dgps/sample_window.hpp"

namespace dgps {

// A (possibly stochastic) unnormalized log density over a flat position
// vector. Implementations draw their own minibatches / propagation noise
// from the rng they are handed.
class StochasticTarget {
 public:
  virtual ~StochasticTarget() = default;
  virtual Eigen::Index dim() const = 0;
  // (estimate of log p, estimate of grad log p) at u.
  virtual std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& u,
                                                            RngStream& rng) = 0;
};

// Shared wall clock so diagnostics from consecutive phases line up.
class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// SGHMC chain state in the scale-adapted parameterization: position u,
// velocity v = eps M^{-1} r, elementwise gradient second-moment estimate
// V_hat (the preconditioner is M^{-1} = diag(V_hat^{-1/2})), gradient mean
// estimate g_hat and adaptation window tau. epsilon is the step size and
// decay is the constant friction eps * V_hat^{-1/2} * C.
struct SamplerState {
  enum class Phase { kBurnIn, kSampling };

  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd v_hat;
  Eigen::VectorXd g_hat;
  Eigen::VectorXd tau;
  double epsilon = 0.01;
  double decay = 0.05;
  Phase phase = Phase::kBurnIn;
  long noise_clamp_count = 0;
  bool inject_noise = true;  // test hook; the injected noise term stays on in real runs
};

// v = 0, V_hat = 1, g_hat = 0, tau = 10.
SamplerState make_sampler_state(Eigen::VectorXd u0, double epsilon = 0.01, double decay = 0.05);

// Exponential-moving-average auto-tuning statistics, elementwise and in this
// order with the pre-update tau:
//   V_hat += tau^{-1} ((grad_u)^2 - V_hat)
//   g_hat += tau^{-1} (grad_u - g_hat)
//   tau    = tau (1 - g_hat^2 / V_hat) + 1        (floored at 1)
// grad_u is the stochastic gradient of the potential U = -log p.
// Only valid during burn-in.
void autotune_update(SamplerState& state, const Eigen::VectorXd& grad_u);

// One SGHMC move in the substituted variables:
//   u += v
//   v += -eps^2 V^{-1/2} grad_u - decay * v + N(0, 2 eps^2 decay V^{-1/2} - eps^4)
// Negative noise variances are clamped to zero and counted.
void sghmc_step(SamplerState& state, const Eigen::VectorXd& grad_u, RngStream& rng);

// Hook invoked once per burn-in iteration after the window is full; used by
// Moving Window MCEM to take one hyperparameter step.
using HyperStepper = std::function<void(const SampleWindow&, long iteration, RngStream&)>;

// Burn-in phase: per iteration one auto-tuning update + one SGHMC step on a
// fresh stochastic gradient, pushing the new position into the window; the
// hyper stepper runs once per iteration after the first `window.capacity()`
// pre-fill iterations. Freezes the sampler (phase -> kSampling) at the end.
// Emits (iteration, log_joint, noise_clamps) to the sink.
void run_burn_in(StochasticTarget& target, SamplerState& state, SampleWindow& window,
                 long n_iters, RngStream& rng, const HyperStepper& hyper_stepper = nullptr,
                 const DiagnosticsSink& sink = nullptr, const std::string& method = "sghmc",
                 const WallClock* clock = nullptr);

// Sampling phase: n_samples * thin steps with frozen tuning statistics,
// recording the position every `thin` steps. Returns a window holding
// exactly n_samples entries.
SampleWindow run_sampling(StochasticTarget& target, SamplerState& state, long n_samples,
                          long thin, RngStream& rng, const DiagnosticsSink& sink = nullptr,
                          const std::string& method = "sghmc", const WallClock* clock = nullptr);

}  // namespace dgps

#endif  // DGPS_SGHMC_HPP
