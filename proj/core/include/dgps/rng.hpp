#ifndef DGPS_RNG_HPP
#define DGPS_RNG_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dgps {

// Seeded random stream. Normal variates are produced by a hand-rolled
// Box-Muller transform so that a given seed yields the same sequence on
// every standard library implementation. Streams can be split into
// independent child streams for concurrent work; the split is a pure
// function of (seed, tag), never of consumption state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Uniform double in [0, 1).
  double uniform();

  // Standard normal variate.
  double normal();

  // Uniform integer in [0, n). Requires n > 0.
  int uniform_int(int n);

  std::uint64_t next_u64();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd normal_vector(Eigen::Index n);

  // Derived independent stream; deterministic in (original seed, tag).
  RngStream split(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace dgps

#endif  // DGPS_RNG_HPP
