#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dgps/errors.hpp"
#include "dgps/mcem.hpp"
#include "support/test_oracles.hpp"

using namespace dgps;

namespace {

// Synthetic model with log p(y, u | theta) = -(theta - u)^2 / 2 for scalar
// theta; the averaged objective over a sample set peaks at the sample mean.
class QuadraticHyperTarget : public HyperTarget {
 public:
  explicit QuadraticHyperTarget(double theta0) : theta_(theta0) {}

  Eigen::Index dim() const override { return 1; }

  std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& latent,
                                                    RngStream&) override {
    const double d = theta_ - latent(0);
    return {-0.5 * d * d, Eigen::VectorXd::Constant(1, -d)};
  }

  Eigen::VectorXd get_hypers() const override { return Eigen::VectorXd::Constant(1, theta_); }
  void set_hypers(const Eigen::VectorXd& t) override { theta_ = t(0); }

  double theta() const { return theta_; }

 private:
  double theta_;
};

// Latent "posterior" N(center, 1) with noisy gradients, independent of theta.
class FixedGaussianLatent : public StochasticTarget {
 public:
  explicit FixedGaussianLatent(double center) : center_(center) {}
  Eigen::Index dim() const override { return 1; }
  std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& u,
                                                    RngStream& rng) override {
    const double d = u(0) - center_;
    return {-0.5 * d * d, Eigen::VectorXd::Constant(1, -d + 2.0 * rng.normal())};
  }

 private:
  double center_;
};

SampleWindow window_of(std::initializer_list<double> values) {
  SampleWindow w(static_cast<int>(values.size()));
  for (double v : values) w.push(Eigen::VectorXd::Constant(1, v));
  return w;
}

}  // namespace

TEST_CASE("adaptive_step zero gradient produces zero updates") {
  OptimizerState opt = OptimizerState::create(3);
  for (int i = 0; i < 5; ++i)
    CHECK(adaptive_step(opt, Eigen::VectorXd::Zero(3)).norm() == 0.0);
}

TEST_CASE("adaptive_step magnitude approaches the learning rate under constant gradients") {
  OptimizerState opt = OptimizerState::create(2, 0.02);
  Eigen::VectorXd g(2);
  g << 4.0, -0.3;
  Eigen::VectorXd step;
  for (int i = 0; i < 3000; ++i) step = adaptive_step(opt, g);
  CHECK(step(0) == doctest::Approx(0.02).epsilon(1e-3));
  CHECK(step(1) == doctest::Approx(-0.02).epsilon(1e-3));
}

TEST_CASE("adaptive_step sign flip flips the first update") {
  OptimizerState a = OptimizerState::create(1), b = OptimizerState::create(1);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 0.7);
  CHECK(adaptive_step(a, g)(0) == doctest::Approx(-adaptive_step(b, -g)(0)).epsilon(1e-12));
}

TEST_CASE("adaptive_step is an ascent step on the gradient sign") {
  OptimizerState opt = OptimizerState::create(1, 0.01);
  CHECK(adaptive_step(opt, Eigen::VectorXd::Constant(1, 2.0))(0) > 0.0);
}

TEST_CASE("mw_mcem_step on a degenerate window equals a plain ascent step") {
  SampleWindow w = window_of({1.3, 1.3, 1.3});
  QuadraticHyperTarget reference(0.0), stepped(0.0);
  OptimizerState o1 = OptimizerState::create(1), o2 = OptimizerState::create(1);
  RngStream r1(4), r2(5);

  mw_mcem_step(w, stepped, o1, r1);
  auto [v, g] = reference.value_and_grad(Eigen::VectorXd::Constant(1, 1.3), r2);
  (void)v;
  reference.set_hypers(reference.get_hypers() + adaptive_step(o2, g));
  CHECK(stepped.theta() == doctest::Approx(reference.theta()).epsilon(1e-14));
}

TEST_CASE("mw_mcem_step with zero learning rate leaves hyperparameters unchanged") {
  SampleWindow w = window_of({0.2, -0.4});
  QuadraticHyperTarget t(0.9);
  OptimizerState opt = OptimizerState::create(1, 0.0);
  RngStream rng(6);
  for (int i = 0; i < 10; ++i) mw_mcem_step(w, t, opt, rng);
  CHECK(t.theta() == 0.9);
}

TEST_CASE("mw_mcem_step never mutates the window") {
  SampleWindow w = window_of({0.5, -1.0, 2.0});
  QuadraticHyperTarget t(0.0);
  OptimizerState opt = OptimizerState::create(1);
  RngStream rng(7);
  for (int i = 0; i < 50; ++i) mw_mcem_step(w, t, opt, rng);
  REQUIRE(w.size() == 3);
  CHECK(w.at(0)(0) == 0.5);
  CHECK(w.at(1)(0) == -1.0);
  CHECK(w.at(2)(0) == 2.0);
}

TEST_CASE("mw_mcem_step rejects an empty window") {
  SampleWindow w(2);
  QuadraticHyperTarget t(0.0);
  OptimizerState opt = OptimizerState::create(1);
  RngStream rng(8);
  CHECK_THROWS_AS(mw_mcem_step(w, t, opt, rng), InvalidStateError);
}

TEST_CASE("mw_mcem converges to the window mean on the quadratic synthetic") {
  SampleWindow w = window_of({0.1, 0.9, 0.4, 0.6, 0.5});  // mean 0.5
  QuadraticHyperTarget t(-3.0);
  OptimizerState opt = OptimizerState::create(1, 0.01);
  RngStream rng(9);
  for (int i = 0; i < 5000; ++i) mw_mcem_step(w, t, opt, rng);
  CHECK(std::abs(t.theta() - 0.5) < 0.05);
}

TEST_CASE("mw_mcem expected ascent direction is the averaged-objective gradient") {
  // At fixed theta, E[step gradient] over the uniform window draw equals
  // grad of (1/m) sum_i log p(y, u_i | theta).
  SampleWindow w = window_of({-1.0, 0.2, 2.2, 0.8});
  const double theta = 0.3;
  const double expected = -(theta - (-1.0 + 0.2 + 2.2 + 0.8) / 4.0);

  RngStream rng(10);
  const int draws = 10000;
  std::vector<double> grads(draws);
  QuadraticHyperTarget t(theta);
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd& u = w.at(rng.uniform_int(w.size()));
    grads[i] = t.value_and_grad(u, rng).second(0);
  }
  const double mean = oracles::mean_of(grads);
  const double se = oracles::standard_error(grads);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("adaptive ascent strictly increases the frozen objective away from the optimum") {
  // Q(theta) = mean over frozen samples of -(theta - u)^2 / 2, exact gradient.
  const std::vector<double> samples = {0.1, 0.9, 0.4, 0.6};
  const double mean = 0.5;
  auto q = [&](double th) {
    double s = 0.0;
    for (double u : samples) s += -0.5 * (th - u) * (th - u);
    return s / static_cast<double>(samples.size());
  };
  double theta = 6.0;  // ascent phase: far from the optimum
  OptimizerState opt = OptimizerState::create(1, 0.01);
  double prev = q(theta);
  for (int i = 0; i < 300; ++i) {
    const double grad = -(theta - mean);
    theta += adaptive_step(opt, Eigen::VectorXd::Constant(1, grad))(0);
    const double cur = q(theta);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("mcem_run converges to the latent distribution's center") {
  QuadraticHyperTarget t(-2.0);
  FixedGaussianLatent latent(1.4);
  SamplerState chain = make_sampler_state(Eigen::VectorXd::Zero(1));
  McemConfig cfg;
  cfg.m = 10;
  cfg.e_step_chain_iters = 300;
  cfg.m_step_iters = 150;
  cfg.max_outer = 8;
  RngStream rng(11);
  std::vector<CurvePoint> diag;
  mcem_run(t, latent, chain, cfg, rng, collect_into(diag));
  CHECK(std::abs(t.theta() - 1.4) < 0.25);
  CHECK(!diag.empty());
}

TEST_CASE("mcem_run minimal configuration performs a single step") {
  QuadraticHyperTarget t(0.0);
  FixedGaussianLatent latent(0.0);
  SamplerState chain = make_sampler_state(Eigen::VectorXd::Constant(1, 5.0));
  McemConfig cfg;
  cfg.m = 1;
  cfg.e_step_chain_iters = 1;
  cfg.m_step_iters = 1;
  cfg.max_outer = 1;
  RngStream rng(12);
  mcem_run(t, latent, chain, cfg, rng);
  // One adaptive step of magnitude ~ learning rate toward the sample.
  CHECK(std::abs(t.theta()) > 0.0);
  CHECK(std::abs(t.theta()) <= cfg.learning_rate * 1.0001);
}

TEST_CASE("mcem_run validates budgets") {
  QuadraticHyperTarget t(0.0);
  FixedGaussianLatent latent(0.0);
  SamplerState chain = make_sampler_state(Eigen::VectorXd::Zero(1));
  McemConfig cfg;
  cfg.m = 0;
  RngStream rng(13);
  CHECK_THROWS_AS(mcem_run(t, latent, chain, cfg, rng), std::invalid_argument);
}
