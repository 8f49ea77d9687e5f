#include "dgps/mcem.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dgps/errors.hpp"

namespace dgps {

OptimizerState OptimizerState::create(Eigen::Index dim, double learning_rate) {
  OptimizerState s;
  s.m1 = Eigen::VectorXd::Zero(dim);
  s.m2 = Eigen::VectorXd::Zero(dim);
  s.learning_rate = learning_rate;
  return s;
}

Eigen::VectorXd adaptive_step(OptimizerState& opt, const Eigen::VectorXd& grad) {
  if (grad.size() != opt.m1.size())
    throw std::invalid_argument("adaptive_step: gradient length mismatch");
  ++opt.step_count;
  opt.m1 = opt.beta1 * opt.m1 + (1.0 - opt.beta1) * grad;
  opt.m2.array() = opt.beta2 * opt.m2.array() + (1.0 - opt.beta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  return (opt.learning_rate * (opt.m1.array() / c1) /
          ((opt.m2.array() / c2).sqrt() + opt.epsilon))
      .matrix();
}

McemStepInfo mw_mcem_step(const SampleWindow& window, HyperTarget& target, OptimizerState& opt,
                          RngStream& rng) {
  if (window.empty()) throw InvalidStateError("mw_mcem_step: sample window is empty");
  const Eigen::VectorXd& u = window.at(rng.uniform_int(window.size()));
  auto [logp, grad] = target.value_and_grad(u, rng);
  target.set_hypers(target.get_hypers() + adaptive_step(opt, grad));
  return {logp, grad.norm()};
}

Eigen::VectorXd mcem_run(HyperTarget& hyper_target, StochasticTarget& latent_target,
                         SamplerState& chain, const McemConfig& config, RngStream& rng,
                         const DiagnosticsSink& sink, const std::string& method,
                         const WallClock* clock) {
  if (config.m < 1) throw std::invalid_argument("mcem_run: m must be >= 1");
  if (config.max_outer < 1 || config.m_step_iters < 1 || config.e_step_chain_iters < 1)
    throw std::invalid_argument("mcem_run: budgets must be >= 1");

  WallClock local;
  const WallClock* wc = clock ? clock : &local;
  OptimizerState opt = OptimizerState::create(hyper_target.dim(), config.learning_rate);
  const long gap = std::max<long>(1, config.e_step_chain_iters / config.m);
  long iteration = 0;

  for (int outer = 0; outer < config.max_outer; ++outer) {
    // E-step: advance the chain at the current hyperparameters, keeping the
    // last sample of every gap.
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(config.m);
    for (long i = 0; i < config.e_step_chain_iters; ++i) {
      auto [logp, grad_logp] = latent_target.value_and_grad(chain.u, rng);
      (void)logp;
      const Eigen::VectorXd grad_u = -grad_logp;
      if (chain.phase == SamplerState::Phase::kBurnIn) autotune_update(chain, grad_u);
      sghmc_step(chain, grad_u, rng);
      if ((i + 1) % gap == 0 && static_cast<int>(samples.size()) < config.m)
        samples.push_back(chain.u);
    }
    while (static_cast<int>(samples.size()) < config.m) samples.push_back(chain.u);

    // M-step: ascend the sample-averaged log joint for a fixed budget.
    for (long step = 0; step < config.m_step_iters; ++step, ++iteration) {
      Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(hyper_target.dim());
      double mean_logp = 0.0;
      for (const Eigen::VectorXd& u : samples) {
        auto [logp, grad] = hyper_target.value_and_grad(u, rng);
        mean_grad += grad;
        mean_logp += logp;
      }
      mean_grad /= static_cast<double>(samples.size());
      mean_logp /= static_cast<double>(samples.size());
      hyper_target.set_hypers(hyper_target.get_hypers() + adaptive_step(opt, mean_grad));
      if (sink) {
        const double t = wc->seconds();
        sink({method, iteration, t, "hyper_grad_norm", mean_grad.norm()});
        sink({method, iteration, t, "log_joint", mean_logp});
      }
    }
  }
  return hyper_target.get_hypers();
}

}  // namespace dgps
