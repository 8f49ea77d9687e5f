#ifndef DGPS_TARGETS_HPP
#define DGPS_TARGETS_HPP

#include <utility>

#include <Eigen/Dense>

#include "dgps/dgp.hpp"
#include "dgps/rng.hpp"
#include "dgps/sghmc.hpp"

namespace dgps {

// Gradient of the scaled log joint with respect to the hyperparameters at a
// fixed latent position; the interface Moving Window MCEM and MCEM step on.
class HyperTarget {
 public:
  virtual ~HyperTarget() = default;
  virtual Eigen::Index dim() const = 0;
  // (log joint estimate, d/dtheta) at the given flattened latent.
  virtual std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& latent,
                                                            RngStream& rng) = 0;
  virtual Eigen::VectorXd get_hypers() const = 0;
  virtual void set_hypers(const Eigen::VectorXd& theta) = 0;
};

// Draws `batch` distinct row indices (all rows when batch >= n).
std::vector<Eigen::Index> draw_batch_indices(Eigen::Index n, Eigen::Index batch, RngStream& rng);

// log p(u, y) estimate over minibatches of (x, y) for the referenced model;
// the model is shared so hyperparameter updates apply between chain steps.
class DgpLatentTarget : public StochasticTarget {
 public:
  DgpLatentTarget(DGPModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  Eigen::Index minibatch);

  Eigen::Index dim() const override;
  std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& u,
                                                    RngStream& rng) override;

 private:
  DGPModel* model_;
  const Eigen::MatrixXd* x_;
  const Eigen::MatrixXd* y_;
  Eigen::Index minibatch_;
};

// Same estimator differentiated with respect to the hyperparameters.
class DgpHyperTarget : public HyperTarget {
 public:
  DgpHyperTarget(DGPModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                 Eigen::Index minibatch, bool fix_noise = false);

  Eigen::Index dim() const override;
  std::pair<double, Eigen::VectorXd> value_and_grad(const Eigen::VectorXd& latent,
                                                    RngStream& rng) override;
  Eigen::VectorXd get_hypers() const override;
  void set_hypers(const Eigen::VectorXd& theta) override;

 private:
  DGPModel* model_;
  const Eigen::MatrixXd* x_;
  const Eigen::MatrixXd* y_;
  Eigen::Index minibatch_;
  bool fix_noise_;
};

}  // namespace dgps

#endif  // DGPS_TARGETS_HPP
