#ifndef DGPS_TAPE_HPP
#define DGPS_TAPE_HPP

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace dgps::ad {

// Handle to a tape node. Scalars are 1x1 matrices.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode automatic differentiation over dense matrices. A fresh tape
// is built per evaluation: record the forward computation through the ops
// below, call backward() on a scalar root, then read adjoints with grad().
//
// Leaves created with input() receive adjoints; constant() leaves do not,
// and whole subgraphs that depend only on constants are skipped during the
// backward sweep.
class Tape {
 public:
  Var input(Eigen::MatrixXd value);
  Var constant(Eigen::MatrixXd value);
  Var scalar_input(double value);
  Var scalar_constant(double value);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, const Eigen::MatrixXd& c);
  Var cwise_mul(Var a, Var b);
  Var cwise_mul_const(Var a, const Eigen::MatrixXd& c);
  Var exp(Var a);
  // max(a, 0) elementwise; gradient passes only where a > 0.
  Var clamp_nonneg(Var a);
  // sqrt(max(a, 0)); gradient is 0 where a <= 0.
  Var sqrt_clamped(Var a);
  Var transpose(Var a);
  // N x 1 column replicated to N x cols.
  Var broadcast_cols(Var column, Eigen::Index cols);

  Var mul(Var a, Var b);           // matrix product
  Var mul_scalar(Var a, Var s);    // s is 1x1
  Var sum(Var a);                  // 1x1
  Var dot(Var a, Var b);           // 1x1, sum(a cwise* b), same shape
  Var colwise_sumsq(Var a);        // M x N -> N x 1 column sums of squares
  Var sum_log_diag(Var a);         // 1x1, sum_i log(a_ii); requires positive diagonal

  // Lower Cholesky factor of value(a) + jitter * I via chol_psd escalation
  // starting from base_jitter (absolute). The jitter actually used is a
  // constant of the recorded graph, not differentiated.
  Var cholesky_psd(Var a, double base_jitter);
  double last_jitter() const { return last_jitter_; }

  Var tri_solve_lower(Var l, Var b);  // L^{-1} b

  // Squared-exponential ARD cross-covariance between row-point sets x and z.
  // log_ls is D x 1, log_sv is 1x1. Differentiates into all four arguments.
  Var gram_se(Var x, Var z, Var log_ls, Var log_sv);
  // N x 1 vector of prior marginal variances k(x, x) = sigma_k^2.
  Var se_prior_diag(Eigen::Index n, Var log_sv);

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. root must be 1x1.
  void backward(Var root);

  // Adjoint of a node after backward(); zero matrix if it never received one.
  Eigen::MatrixXd grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd adjoint;
    bool differentiable = false;  // depends on at least one input() leaf
    bool seen = false;            // adjoint storage initialized
    std::function<void(Tape&, Node&)> back;
  };

  Var emit(Eigen::MatrixXd value, bool differentiable, std::function<void(Tape&, Node&)> back);
  void accumulate(Var v, const Eigen::MatrixXd& g);
  bool diff(Var v) const { return nodes_[v.id].differentiable; }

  std::vector<Node> nodes_;
  double last_jitter_ = 0.0;
};

}  // namespace dgps::ad

#endif  // DGPS_TAPE_HPP
