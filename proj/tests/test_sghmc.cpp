#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dgps/errors.hpp"
#include "dgps/sghmc.hpp"
#include "dgps/targets.hpp"
#include "support/test_models.hpp"
#include "support/test_oracles.hpp"

using namespace dgps;

namespace {

// Gaussian log density target with optional i.i.d. gradient noise standing
// in for minibatch stochasticity. The auto-tuning scheme assumes noisy
// gradients; with exact gradients the gradient-to-noise ratio locks tau at 1
// and the preconditioner diverges at mode crossings.
class GaussianTarget : public StochasticTarget {
 public:
  GaussianTarget(Eigen::VectorXd mean, Eigen::MatrixXd covariance, double grad_noise_sd = 1.0)
      : mean_(std::move(mean)), precision_(covariance.inverse()), noise_sd_(grad_noise_sd) {}

  Eigen::Index dim() const override { return mean_.size(); }

  std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& u,
                                                    RngStream& rng) override {
    const Eigen::VectorXd d = u - mean_;
    Eigen::VectorXd g = -precision_ * d;
    if (noise_sd_ > 0.0) g += noise_sd_ * rng.normal_vector(u.size());
    return {-0.5 * d.dot(precision_ * d), std::move(g)};
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  double noise_sd_;
};

}  // namespace

TEST_CASE("sample window keeps exactly the last m pushes in order") {
  SampleWindow w(3);
  CHECK(w.capacity() == 3);
  for (int k = 1; k <= 7; ++k) w.push(Eigen::VectorXd::Constant(1, static_cast<double>(k)));
  REQUIRE(w.size() == 3);
  CHECK(w.at(0)(0) == 5.0);
  CHECK(w.at(1)(0) == 6.0);
  CHECK(w.at(2)(0) == 7.0);
  CHECK_THROWS_AS(SampleWindow(0), std::invalid_argument);
}

TEST_CASE("autotune fixed point: matched statistics drive tau to one") {
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(2));
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(2, 1.7);
  s.g_hat = c;
  s.v_hat = c.array().square();
  autotune_update(s, c);
  CHECK((s.g_hat - c).norm() == 0.0);
  CHECK((s.v_hat - Eigen::VectorXd(c.array().square().matrix())).norm() == 0.0);
  CHECK(s.tau(0) == doctest::Approx(1.0));
  CHECK(s.tau(1) == doctest::Approx(1.0));
}

TEST_CASE("autotune tau recursion converges geometrically to 1/ratio") {
  // With g^2/V fixed at rho, tau' = (1 - rho) tau + 1 has fixed point 1/rho.
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  const double c = 2.0;
  s.g_hat.setConstant(c * 0.5);         // after update with grad c and tau large, stays near
  s.v_hat.setConstant(c * c * 0.5);     // rho = g^2 / V = 0.5
  // Freeze g/V at the ratio by feeding the implied constant gradient is not
  // possible exactly; instead iterate the tau recursion directly.
  double tau = 10.0;
  for (int i = 0; i < 60; ++i) tau = (1.0 - 0.5) * tau + 1.0;
  CHECK(tau == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("autotune zero-gradient stream decays v_hat monotonically") {
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  s.v_hat.setConstant(1.0);
  s.g_hat.setZero();
  s.tau.setConstant(2.0);
  double prev = s.v_hat(0);
  for (int i = 0; i < 200; ++i) {
    autotune_update(s, Eigen::VectorXd::Zero(1));
    CHECK(s.v_hat(0) < prev);
    prev = s.v_hat(0);
  }
  CHECK(s.v_hat(0) < 0.02);
  CHECK(s.tau(0) > 100.0);  // no signal: window keeps growing
}

TEST_CASE("autotune EMA tracks the gradient second moment") {
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  RngStream rng(71);
  const double sd = 0.6;
  for (int i = 0; i < 100000; ++i)
    autotune_update(s, Eigen::VectorXd::Constant(1, sd * rng.normal()));
  CHECK(s.v_hat(0) == doctest::Approx(sd * sd).epsilon(0.10));
}

TEST_CASE("autotune tau stays at least one under arbitrary gradient streams") {
  RngStream rng(72);
  for (int rep = 0; rep < 10; ++rep) {
    SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(3));
    for (int i = 0; i < 2000; ++i) {
      Eigen::VectorXd g = 10.0 * rng.normal_vector(3);
      if (i % 7 == 0) g.setZero();
      if (i % 11 == 0) g.setConstant(1e6);
      autotune_update(s, g);
      CHECK(s.tau.minCoeff() >= 1.0);
    }
  }
}

TEST_CASE("autotune is rejected outside burn-in") {
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  s.phase = SamplerState::Phase::kSampling;
  CHECK_THROWS_AS(autotune_update(s, Eigen::VectorXd::Zero(1)), InvalidStateError);
}

TEST_CASE("sghmc_step frictionless limit") {
  // decay = 0, noise clamps to zero, V = 1: u' = u + v, v' = v - eps^2 gradU.
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(2), 0.01, 0.0);
  s.u << 0.3, -0.2;
  s.v << 0.05, 0.1;
  const Eigen::VectorXd u0 = s.u, v0 = s.v;
  Eigen::VectorXd grad(2);
  grad << 1.0, -2.0;
  RngStream rng(73);
  sghmc_step(s, grad, rng);
  CHECK((s.u - (u0 + v0)).norm() == 0.0);
  CHECK((s.v - (v0 - 0.01 * 0.01 * grad)).norm() < 1e-15);
  CHECK(s.noise_clamp_count == 2);  // 2 eps^2 d V^{-1/2} - eps^4 < 0 at d = 0
}

TEST_CASE("sghmc_step pure friction decays velocity by (1 - decay)") {
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(2), 0.01, 0.07);
  s.inject_noise = false;
  s.v << 0.4, -0.3;
  const Eigen::VectorXd v0 = s.v;
  RngStream rng(74);
  sghmc_step(s, Eigen::VectorXd::Zero(2), rng);
  CHECK((s.v - (1.0 - 0.07) * v0).norm() < 1e-15);
}

TEST_CASE("sghmc_step trajectories are bitwise deterministic per seed") {
  GaussianTarget target(Eigen::VectorXd::Zero(2),
                        (Eigen::MatrixXd(2, 2) << 1.0, 0.4, 0.4, 0.7).finished(), 1.0);
  auto run = [&](std::uint64_t seed) {
    SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(2));
    RngStream rng(seed);
    Eigen::MatrixXd traj(50, 2);
    for (int i = 0; i < 50; ++i) {
      auto [v, g] = target.value_and_grad(s.u, rng);
      (void)v;
      autotune_update(s, -g);
      sghmc_step(s, -g, rng);
      traj.row(i) = s.u.transpose();
    }
    return traj;
  };
  CHECK((run(5) - run(5)).norm() == 0.0);
  CHECK((run(5) - run(6)).norm() != 0.0);
}

TEST_CASE("sghmc samples a 1-D standard Gaussian with the right variance") {
  GaussianTarget target(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 3.0);
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1), 0.05, 0.05);
  SampleWindow burn(100);
  RngStream rng(75);
  run_burn_in(target, s, burn, 2000, rng);
  SampleWindow w = run_sampling(target, s, 2000, 300, rng);
  std::vector<double> xs(w.size());
  for (int i = 0; i < w.size(); ++i) xs[i] = w.at(i)(0);
  CHECK(std::abs(oracles::mean_of(xs)) < 0.15);
  CHECK(oracles::variance_of(xs) == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("run_burn_in validates inputs and freezes the phase") {
  GaussianTarget target(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  SampleWindow w(10);
  RngStream rng(76);
  CHECK_THROWS_AS(run_burn_in(target, s, w, 0, rng), std::invalid_argument);
  run_burn_in(target, s, w, 5, rng);
  CHECK(s.phase == SamplerState::Phase::kSampling);
  CHECK_THROWS_AS(run_burn_in(target, s, w, 5, rng), InvalidStateError);
}

TEST_CASE("run_burn_in with a no-op hyper stepper leaves hyperparameters unchanged") {
  RngStream mk(77);
  DGPModel model = test_models::make_model(mk, {1, 1}, 4);
  model.n_total = 8;
  Eigen::MatrixXd x = mk.normal_matrix(8, 1), y = mk.normal_matrix(8, 1);
  DgpLatentTarget target(model, x, y, 8);
  const Eigen::VectorXd theta0 = pack_hypers(model);

  SamplerState s = make_sampler_state(0.01 * mk.normal_vector(target.dim()));
  SampleWindow w(5);
  RngStream rng(78);
  int stepper_calls = 0;
  run_burn_in(target, s, w, 30, rng,
              [&](const SampleWindow&, long, RngStream&) { ++stepper_calls; });
  CHECK(stepper_calls == 30 - 5 + 1);  // fires once the window is full
  CHECK((pack_hypers(model) - theta0).norm() == 0.0);
}

TEST_CASE("run_burn_in lands inside the target's 4-sigma region") {
  // 1-D Gaussian target, fixed hyperparameters; over seeds the post-burn-in
  // state must be within 4 sigma with probability >= 0.99.
  // Gradient noise must dominate the deterministic drift, otherwise the
  // gradient-to-noise ratio locks tau at its absorbing fixed point 1 during
  // the transit and the preconditioner follows the raw gradient.
  const double mu = 2.5, var = 0.49;
  GaussianTarget target(Eigen::VectorXd::Constant(1, mu),
                        Eigen::MatrixXd::Constant(1, 1, var), 8.0);
  int inside = 0;
  const int seeds = 100;
  for (int k = 0; k < seeds; ++k) {
    SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
    SampleWindow w(10);
    RngStream rng(1000 + k);
    run_burn_in(target, s, w, 3000, rng);
    if (std::abs(s.u(0) - mu) < 4.0 * std::sqrt(var)) ++inside;
  }
  CHECK(inside >= 97);
}

TEST_CASE("run_sampling minimal run and window length") {
  GaussianTarget target(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(1));
  SampleWindow burn(5);
  RngStream rng(79);
  run_burn_in(target, s, burn, 10, rng);

  SamplerState before = s;
  RngStream r2(80), r3(80);
  SampleWindow w = run_sampling(target, s, 1, 1, r2);
  REQUIRE(w.size() == 1);
  // The single entry is exactly the state after one step.
  auto [v, g] = target.value_and_grad(before.u, r3);
  (void)v;
  sghmc_step(before, -g, r3);
  CHECK((w.at(0) - before.u).norm() == 0.0);

  SampleWindow w2 = run_sampling(target, s, 37, 3, rng);
  CHECK(w2.size() == 37);
}

TEST_CASE("run_sampling on a correlated 2-D Gaussian recovers the moments") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.6, 0.6, 0.8;
  Eigen::VectorXd mean(2);
  mean << 1.0, -0.5;
  GaussianTarget target(mean, cov, 5.0);  // noise-dominated gradients

  // Position decorrelation takes ~2 decay / (eps^2 V^{-1/2} lambda) steps;
  // a larger test step size keeps the unit test fast (the acceptance suite
  // runs the same check at the default step size).
  SamplerState s = make_sampler_state(Eigen::VectorXd::Zero(2), 0.05, 0.05);
  SampleWindow burn(50);
  RngStream rng(81);
  run_burn_in(target, s, burn, 3000, rng);
  SampleWindow w = run_sampling(target, s, 2000, 1000, rng);

  Eigen::MatrixXd samples(w.size(), 2);
  for (int i = 0; i < w.size(); ++i) samples.row(i) = w.at(i).transpose();
  const Eigen::RowVector2d emp_mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - emp_mean;
  Eigen::MatrixXd emp_cov = centered.transpose() * centered / (samples.rows() - 1.0);

  // Batch-means standard error for the correlated chain.
  const int n_batches = 40, batch = w.size() / n_batches;
  for (int d = 0; d < 2; ++d) {
    std::vector<double> bmeans(n_batches);
    for (int b = 0; b < n_batches; ++b)
      bmeans[b] = samples.col(d).segment(b * batch, batch).mean();
    const double se = std::sqrt(oracles::variance_of(bmeans) / n_batches);
    CHECK(std::abs(emp_mean(d) - mean(d)) < 3.0 * se);
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(emp_cov(i, j) - cov(i, j)) < 0.15 * std::abs(cov(i, j)));
}
