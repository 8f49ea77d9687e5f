#include "dgps/sghmc.hpp"

#include <cmath>
#include <stdexcept>

#include "dgps/errors.hpp"

namespace dgps {

namespace {
constexpr double kVhatFloor = 1e-16;
}

SamplerState make_sampler_state(Eigen::VectorXd u0, double epsilon, double decay) {
  SamplerState s;
  const Eigen::Index n = u0.size();
  s.u = std::move(u0);
  s.v = Eigen::VectorXd::Zero(n);
  s.v_hat = Eigen::VectorXd::Ones(n);
  s.g_hat = Eigen::VectorXd::Zero(n);
  s.tau = Eigen::VectorXd::Constant(n, 10.0);
  s.epsilon = epsilon;
  s.decay = decay;
  return s;
}

void autotune_update(SamplerState& state, const Eigen::VectorXd& grad_u) {
  if (state.phase != SamplerState::Phase::kBurnIn)
    throw InvalidStateError("autotune_update: tuning statistics are frozen outside burn-in");
  if (grad_u.size() != state.u.size())
    throw std::invalid_argument("autotune_update: gradient length mismatch");

  const Eigen::ArrayXd inv_tau = state.tau.array().inverse();
  state.v_hat.array() += inv_tau * (grad_u.array().square() - state.v_hat.array());
  state.g_hat.array() += inv_tau * (grad_u.array() - state.g_hat.array());
  const Eigen::ArrayXd ratio =
      state.g_hat.array().square() / state.v_hat.array().max(kVhatFloor);
  state.tau.array() = (state.tau.array() * (1.0 - ratio) + 1.0).max(1.0);
}

void sghmc_step(SamplerState& state, const Eigen::VectorXd& grad_u, RngStream& rng) {
  if (grad_u.size() != state.u.size())
    throw std::invalid_argument("sghmc_step: gradient length mismatch");
  const double eps = state.epsilon;
  const double eps2 = eps * eps;

  state.u += state.v;

  const Eigen::ArrayXd precond = state.v_hat.array().max(kVhatFloor).rsqrt();  // V^{-1/2}
  Eigen::ArrayXd noise_var = 2.0 * eps2 * state.decay * precond - eps2 * eps2;
  for (Eigen::Index i = 0; i < noise_var.size(); ++i) {
    if (noise_var(i) < 0.0) {
      noise_var(i) = 0.0;
      ++state.noise_clamp_count;
    }
  }

  Eigen::ArrayXd dv = -eps2 * precond * grad_u.array() - state.decay * state.v.array();
  if (state.inject_noise)
    dv += noise_var.sqrt() * rng.normal_vector(state.v.size()).array();
  state.v.array() += dv;
}

void run_burn_in(StochasticTarget& target, SamplerState& state, SampleWindow& window,
                 long n_iters, RngStream& rng, const HyperStepper& hyper_stepper,
                 const DiagnosticsSink& sink, const std::string& method,
                 const WallClock* clock) {
  if (n_iters < 1) throw std::invalid_argument("run_burn_in: n_iters must be >= 1");
  if (state.phase != SamplerState::Phase::kBurnIn)
    throw InvalidStateError("run_burn_in: sampler already frozen");
  if (state.u.size() != target.dim())
    throw std::invalid_argument("run_burn_in: state dimension does not match target");

  WallClock local;
  const WallClock* wc = clock ? clock : &local;
  for (long i = 0; i < n_iters; ++i) {
    auto [logp, grad_logp] = target.value_and_grad(state.u, rng);
    const Eigen::VectorXd grad_u = -grad_logp;
    autotune_update(state, grad_u);
    sghmc_step(state, grad_u, rng);
    window.push(state.u);
    if (hyper_stepper && window.full()) hyper_stepper(window, i, rng);
    if (sink) {
      const double t = wc->seconds();
      sink({method, i, t, "log_joint", logp});
      sink({method, i, t, "noise_clamps", static_cast<double>(state.noise_clamp_count)});
    }
  }
  state.phase = SamplerState::Phase::kSampling;
}

SampleWindow run_sampling(StochasticTarget& target, SamplerState& state, long n_samples,
                          long thin, RngStream& rng, const DiagnosticsSink& sink,
                          const std::string& method, const WallClock* clock) {
  if (n_samples < 1 || thin < 1)
    throw std::invalid_argument("run_sampling: n_samples and thin must be >= 1");
  if (state.phase != SamplerState::Phase::kSampling)
    throw InvalidStateError("run_sampling: burn-in must complete first");

  WallClock local;
  const WallClock* wc = clock ? clock : &local;
  SampleWindow window(static_cast<int>(n_samples));
  long iter = 0;
  for (long s = 0; s < n_samples; ++s) {
    for (long k = 0; k < thin; ++k, ++iter) {
      auto [logp, grad_logp] = target.value_and_grad(state.u, rng);
      sghmc_step(state, -grad_logp, rng);
      if (sink) sink({method, iter, wc->seconds(), "log_joint", logp});
    }
    window.push(state.u);
  }
  return window;
}

}  // namespace dgps
