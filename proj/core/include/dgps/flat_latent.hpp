#ifndef DGPS_FLAT_LATENT_HPP
#define DGPS_FLAT_LATENT_HPP

#include <vector>

#include <Eigen/Dense>

namespace dgps {

// Layout of a flattened set of per-layer inducing-output matrices.
// Order: layer 0 .. L-1, each matrix in column-major element order.
struct LatentLayout {
  struct Block {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
  };
  std::vector<Block> blocks;

  Eigen::Index total() const {
    Eigen::Index t = 0;
    for (const Block& b : blocks) t += b.rows * b.cols;
    return t;
  }
};

// Position variable of the sampler: all u_l concatenated.
struct FlatLatent {
  Eigen::VectorXd values;
  LatentLayout layout;
};

FlatLatent pack_latent(const std::vector<Eigen::MatrixXd>& u);
std::vector<Eigen::MatrixXd> unpack_latent(const FlatLatent& latent);
std::vector<Eigen::MatrixXd> unpack_latent(const Eigen::VectorXd& values, const LatentLayout& layout);

}  // namespace dgps

#endif  // DGPS_FLAT_LATENT_HPP
