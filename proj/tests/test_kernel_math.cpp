#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dgps/errors.hpp"
#include "dgps/kernel.hpp"
#include "dgps/linalg.hpp"
#include "dgps/rng.hpp"

using namespace dgps;

namespace {

Eigen::MatrixXd random_points(RngStream& rng, int n, int d, double scale = 1.0) {
  return scale * rng.normal_matrix(n, d);
}

}  // namespace

TEST_CASE("se_ard at zero distance returns the signal variance") {
  KernelParams p = KernelParams::isotropic(3, 0.7, 2.5);
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 4.0;
  CHECK(se_ard(x, x, p) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("se_ard is symmetric in its arguments") {
  RngStream rng(42);
  KernelParams p;
  p.log_lengthscales = rng.normal_vector(4) * 0.3;
  p.log_signal_variance = 0.4;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd a = rng.normal_vector(4);
    Eigen::VectorXd b = rng.normal_vector(4);
    CHECK(se_ard(a, b, p) == doctest::Approx(se_ard(b, a, p)).epsilon(1e-15));
  }
}

TEST_CASE("se_ard unit-lengthscale 1-D value at distance one") {
  // Direct scalar evaluation: exp(-0.5) = 0.6065306597126334
  KernelParams p = KernelParams::isotropic(1);
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(se_ard(a, b, p) == doctest::Approx(0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("se_ard rejects dimension mismatch") {
  KernelParams p = KernelParams::isotropic(2);
  Eigen::VectorXd a(3), b(3);
  a.setZero();
  b.setZero();
  CHECK_THROWS_AS(se_ard(a, b, p), std::invalid_argument);
}

TEST_CASE("se_ard is translation invariant") {
  RngStream rng(7);
  KernelParams p;
  p.log_lengthscales = rng.normal_vector(3) * 0.2;
  p.log_signal_variance = -0.3;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd a = rng.normal_vector(3);
    Eigen::VectorXd b = rng.normal_vector(3);
    Eigen::VectorXd t = rng.normal_vector(3);
    CHECK(se_ard(a, b, p) == doctest::Approx(se_ard(a + t, b + t, p)).epsilon(1e-12));
  }
}

TEST_CASE("se_ard is invariant under joint coordinate and lengthscale scaling") {
  RngStream rng(8);
  KernelParams p;
  p.log_lengthscales = rng.normal_vector(2) * 0.1;
  p.log_signal_variance = 0.0;
  const double c = 3.7;
  KernelParams ps = p;
  ps.log_lengthscales.array() += std::log(c);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd a = rng.normal_vector(2);
    Eigen::VectorXd b = rng.normal_vector(2);
    CHECK(std::abs(se_ard(a, b, p) - se_ard(c * a, c * b, ps)) < 1e-12);
  }
}

TEST_CASE("gram diagonal is exactly the signal variance") {
  RngStream rng(3);
  KernelParams p = KernelParams::isotropic(2, 0.9, 1.7);
  Eigen::MatrixXd a = random_points(rng, 6, 2);
  Eigen::MatrixXd k = gram(a, a, p);
  for (int i = 0; i < 6; ++i) CHECK(k(i, i) == 1.7);
}

TEST_CASE("gram(A,B) equals gram(B,A) transposed") {
  RngStream rng(4);
  KernelParams p = KernelParams::isotropic(3, 1.2, 0.8);
  Eigen::MatrixXd a = random_points(rng, 5, 3);
  Eigen::MatrixXd b = random_points(rng, 7, 3);
  CHECK((gram(a, b, p) - gram(b, a, p).transpose()).norm() == 0.0);
}

TEST_CASE("gram two-point 1-D example") {
  KernelParams p = KernelParams::isotropic(1);
  Eigen::MatrixXd a(2, 1);
  a << 0.0, 1.0;
  Eigen::MatrixXd k = gram(a, a, p);
  const double e = 0.6065306597126334;
  CHECK(k(0, 0) == doctest::Approx(1.0));
  CHECK(k(1, 1) == doctest::Approx(1.0));
  CHECK(k(0, 1) == doctest::Approx(e).epsilon(1e-12));
  CHECK(k(1, 0) == doctest::Approx(e).epsilon(1e-12));
}

TEST_CASE("gram matrices admit a jittered Cholesky for random inputs") {
  RngStream rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    KernelParams p;
    p.log_lengthscales = rng.normal_vector(3) * 0.4;
    p.log_signal_variance = rng.normal() * 0.3;
    Eigen::MatrixXd a = random_points(rng, 12, 3);
    CholFactor f = chol_psd(gram(a, a, p));
    const Eigen::MatrixXd k = gram(a, a, p);
    Eigen::MatrixXd rec = f.lower * f.lower.transpose();
    rec.diagonal().array() -= f.jitter_used;
    CHECK((rec - k).norm() <= 1e-10 * std::max(1.0, k.norm()));
    CHECK((f.lower.diagonal().array() > 0.0).all());
  }
}

TEST_CASE("chol_psd of the identity uses no jitter") {
  CholFactor f = chol_psd(Eigen::MatrixXd::Identity(4, 4), 0.0);
  CHECK(f.jitter_used == 0.0);
  CHECK((f.lower - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("chol_psd hand-checked 2x2 factor") {
  // Hand Cholesky of [[2,1],[1,2]]: L00 = sqrt(2), L10 = 1/sqrt(2), L11 = sqrt(3/2).
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  CholFactor f = chol_psd(a, 0.0);
  CHECK(f.jitter_used == 0.0);
  CHECK(f.lower(0, 0) == doctest::Approx(1.4142135623730951).epsilon(1e-12));
  CHECK(f.lower(1, 0) == doctest::Approx(0.7071067811865475).epsilon(1e-12));
  CHECK(f.lower(1, 1) == doctest::Approx(1.224744871391589).epsilon(1e-12));
  CHECK(f.lower(0, 1) == 0.0);
}

TEST_CASE("chol_psd raises NumericalError when the ceiling is exceeded") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1; needs jitter > 1
  CHECK_THROWS_AS(chol_psd(a, 0.0), NumericalError);
  try {
    chol_psd(a, 0.0);
  } catch (const NumericalError& e) {
    CHECK(e.last_jitter() > 0.0);
    CHECK(e.last_jitter() <= 1e-2);
  }
}

TEST_CASE("chol_psd rejects asymmetric input") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(chol_psd(a, 0.0), std::invalid_argument);
}

TEST_CASE("tri_solve identity factor returns the rhs") {
  CholFactor f{Eigen::MatrixXd::Identity(3, 3), 0.0};
  RngStream rng(5);
  Eigen::MatrixXd rhs = rng.normal_matrix(3, 2);
  CHECK((tri_solve(f, rhs, TriMode::kForward) - rhs).norm() == 0.0);
  CHECK((tri_solve(f, rhs, TriMode::kBackward) - rhs).norm() == 0.0);
  CHECK((tri_solve(f, rhs, TriMode::kFullInverseApply) - rhs).norm() == 0.0);
}

TEST_CASE("tri_solve full-inverse-apply hand-checked 2x2 solve") {
  // [[2,1],[1,2]]^{-1} [1,0]^T = [2/3, -1/3]^T
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  CholFactor f = chol_psd(a, 0.0);
  Eigen::MatrixXd rhs(2, 1);
  rhs << 1.0, 0.0;
  Eigen::MatrixXd x = tri_solve(f, rhs, TriMode::kFullInverseApply);
  CHECK(x(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(x(1, 0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("tri_solve inverse round-trip recovers the rhs") {
  RngStream rng(6);
  Eigen::MatrixXd b = rng.normal_matrix(5, 5);
  Eigen::MatrixXd a = b * b.transpose() + 5.0 * Eigen::MatrixXd::Identity(5, 5);
  CholFactor f = chol_psd(a, 0.0);
  Eigen::MatrixXd rhs = rng.normal_matrix(5, 3);
  Eigen::MatrixXd x = tri_solve(f, rhs, TriMode::kFullInverseApply);
  CHECK((a * x - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("tri_solve recovers x from A x for well-conditioned gram matrices") {
  RngStream rng(9);
  KernelParams p = KernelParams::isotropic(2, 1.5, 1.0);
  Eigen::MatrixXd pts = random_points(rng, 6, 2, 2.0);
  Eigen::MatrixXd k = gram(pts, pts, p);
  CholFactor f = chol_psd(k);
  Eigen::MatrixXd x = rng.normal_matrix(6, 1);
  Eigen::MatrixXd kx = k * x;
  kx += f.jitter_used * x;  // solve against the factored matrix
  Eigen::MatrixXd rec = tri_solve(f, kx, TriMode::kFullInverseApply);
  CHECK((rec - x).norm() <= 1e-8 * x.norm());
}

TEST_CASE("tri_solve rejects mismatched shapes") {
  CholFactor f{Eigen::MatrixXd::Identity(3, 3), 0.0};
  CHECK_THROWS_AS(tri_solve(f, Eigen::MatrixXd::Zero(4, 1), TriMode::kForward),
                  std::invalid_argument);
}

TEST_CASE("rng streams are deterministic and split streams differ") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  RngStream c = RngStream(123).split(1);
  RngStream d = RngStream(123).split(2);
  bool all_equal = true;
  for (int i = 0; i < 16; ++i)
    if (c.normal() != d.normal()) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng normal moments are sane") {
  RngStream rng(99);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
