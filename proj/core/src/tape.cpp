#include "dgps/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "dgps/linalg.hpp"

namespace dgps::ad {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Lower triangle with halved diagonal; the Phi map of the Cholesky pullback.
Eigen::MatrixXd phi(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m.triangularView<Eigen::Lower>();
  out.diagonal() *= 0.5;
  return out;
}

}  // namespace

Var Tape::emit(Eigen::MatrixXd value, bool differentiable, std::function<void(Tape&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.differentiable = differentiable;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& n = nodes_[v.id];
  if (!n.differentiable) return;
  if (!n.seen) {
    n.adjoint = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    n.seen = true;
  }
  n.adjoint += g;
}

Var Tape::input(Eigen::MatrixXd value) { return emit(std::move(value), true, nullptr); }
Var Tape::constant(Eigen::MatrixXd value) { return emit(std::move(value), false, nullptr); }
Var Tape::scalar_input(double value) { return input(Eigen::MatrixXd::Constant(1, 1, value)); }
Var Tape::scalar_constant(double value) { return constant(Eigen::MatrixXd::Constant(1, 1, value)); }

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  return emit(value(a) + value(b), diff(a) || diff(b), [a, b](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint);
    t.accumulate(b, n.adjoint);
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  return emit(value(a) - value(b), diff(a) || diff(b), [a, b](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint);
    t.accumulate(b, -n.adjoint);
  });
}

Var Tape::scale(Var a, double c) {
  return emit(c * value(a), diff(a), [a, c](Tape& t, Node& n) { t.accumulate(a, c * n.adjoint); });
}

Var Tape::add_const(Var a, const Eigen::MatrixXd& c) {
  check_same_shape(value(a), c, "add_const");
  return emit(value(a) + c, diff(a), [a](Tape& t, Node& n) { t.accumulate(a, n.adjoint); });
}

Var Tape::cwise_mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "cwise_mul");
  return emit(value(a).cwiseProduct(value(b)), diff(a) || diff(b), [a, b](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint.cwiseProduct(t.value(b)));
    t.accumulate(b, n.adjoint.cwiseProduct(t.value(a)));
  });
}

Var Tape::cwise_mul_const(Var a, const Eigen::MatrixXd& c) {
  check_same_shape(value(a), c, "cwise_mul_const");
  Eigen::MatrixXd cc = c;
  return emit(value(a).cwiseProduct(c), diff(a), [a, cc = std::move(cc)](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint.cwiseProduct(cc));
  });
}

Var Tape::exp(Var a) {
  return emit(value(a).array().exp().matrix(), diff(a), [a](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint.cwiseProduct(n.value));
  });
}

Var Tape::clamp_nonneg(Var a) {
  return emit(value(a).cwiseMax(0.0), diff(a), [a](Tape& t, Node& n) {
    const Eigen::MatrixXd mask = (t.value(a).array() > 0.0).cast<double>().matrix();
    t.accumulate(a, n.adjoint.cwiseProduct(mask));
  });
}

Var Tape::sqrt_clamped(Var a) {
  return emit(value(a).cwiseMax(0.0).cwiseSqrt(), diff(a), [a](Tape& t, Node& n) {
    const Eigen::ArrayXXd av = t.value(a).array();
    Eigen::ArrayXXd g = Eigen::ArrayXXd::Zero(av.rows(), av.cols());
    g = (av > 0.0).select(n.adjoint.array() / (2.0 * n.value.array()), g);
    t.accumulate(a, g.matrix());
  });
}

Var Tape::transpose(Var a) {
  return emit(value(a).transpose(), diff(a),
              [a](Tape& t, Node& n) { t.accumulate(a, n.adjoint.transpose()); });
}

Var Tape::broadcast_cols(Var column, Eigen::Index cols) {
  if (value(column).cols() != 1) throw std::invalid_argument("broadcast_cols: expected a column");
  return emit(value(column).replicate(1, cols), diff(column), [column](Tape& t, Node& n) {
    t.accumulate(column, n.adjoint.rowwise().sum());
  });
}

Var Tape::mul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw std::invalid_argument("mul: inner dimension mismatch");
  return emit(value(a) * value(b), diff(a) || diff(b), [a, b](Tape& t, Node& n) {
    t.accumulate(a, n.adjoint * t.value(b).transpose());
    t.accumulate(b, t.value(a).transpose() * n.adjoint);
  });
}

Var Tape::mul_scalar(Var a, Var s) {
  if (value(s).size() != 1) throw std::invalid_argument("mul_scalar: s must be 1x1");
  const double sv = scalar(s);
  return emit(sv * value(a), diff(a) || diff(s), [a, s, sv](Tape& t, Node& n) {
    t.accumulate(a, sv * n.adjoint);
    t.accumulate(s, Eigen::MatrixXd::Constant(1, 1, n.adjoint.cwiseProduct(t.value(a)).sum()));
  });
}

Var Tape::sum(Var a) {
  return emit(Eigen::MatrixXd::Constant(1, 1, value(a).sum()), diff(a), [a](Tape& t, Node& n) {
    const double g = n.adjoint(0, 0);
    t.accumulate(a, Eigen::MatrixXd::Constant(t.value(a).rows(), t.value(a).cols(), g));
  });
}

Var Tape::dot(Var a, Var b) {
  check_same_shape(value(a), value(b), "dot");
  return emit(Eigen::MatrixXd::Constant(1, 1, value(a).cwiseProduct(value(b)).sum()),
              diff(a) || diff(b), [a, b](Tape& t, Node& n) {
                const double g = n.adjoint(0, 0);
                t.accumulate(a, g * t.value(b));
                t.accumulate(b, g * t.value(a));
              });
}

Var Tape::colwise_sumsq(Var a) {
  Eigen::MatrixXd out = value(a).colwise().squaredNorm().transpose();
  return emit(std::move(out), diff(a), [a](Tape& t, Node& n) {
    // v_j = sum_i a_ij^2  =>  abar_ij += 2 a_ij vbar_j
    const Eigen::MatrixXd& av = t.value(a);
    Eigen::MatrixXd g = 2.0 * av;
    for (Eigen::Index j = 0; j < av.cols(); ++j) g.col(j) *= n.adjoint(j, 0);
    t.accumulate(a, g);
  });
}

Var Tape::sum_log_diag(Var a) {
  if (value(a).rows() != value(a).cols())
    throw std::invalid_argument("sum_log_diag: matrix must be square");
  const double v = value(a).diagonal().array().log().sum();
  return emit(Eigen::MatrixXd::Constant(1, 1, v), diff(a), [a](Tape& t, Node& n) {
    const Eigen::MatrixXd& av = t.value(a);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(av.rows(), av.cols());
    g.diagonal() = n.adjoint(0, 0) * av.diagonal().cwiseInverse();
    t.accumulate(a, g);
  });
}

Var Tape::cholesky_psd(Var a, double base_jitter) {
  CholFactor f = dgps::chol_psd(value(a), base_jitter);
  last_jitter_ = f.jitter_used;
  return emit(std::move(f.lower), diff(a), [a](Tape& t, Node& n) {
    // Cholesky pullback: Abar = 1/2 L^{-T} (Phi(L^T Lbar) + Phi(L^T Lbar)^T) L^{-1}
    const Eigen::MatrixXd& l = n.value;
    Eigen::MatrixXd p = phi(l.transpose() * n.adjoint);
    Eigen::MatrixXd sym = p + p.transpose();
    Eigen::MatrixXd half = l.transpose().triangularView<Eigen::Upper>().solve(sym);
    Eigen::MatrixXd abar =
        0.5 * l.transpose().triangularView<Eigen::Upper>().solve(half.transpose()).transpose();
    t.accumulate(a, abar);
  });
}

Var Tape::tri_solve_lower(Var l, Var b) {
  if (value(l).rows() != value(b).rows())
    throw std::invalid_argument("tri_solve_lower: shape mismatch");
  Eigen::MatrixXd x = value(l).triangularView<Eigen::Lower>().solve(value(b));
  return emit(std::move(x), diff(l) || diff(b), [l, b](Tape& t, Node& n) {
    // x = L^{-1} b:  bbar = L^{-T} xbar,  Lbar = -tril(bbar x^T)
    const Eigen::MatrixXd bbar =
        t.value(l).transpose().triangularView<Eigen::Upper>().solve(n.adjoint);
    t.accumulate(b, bbar);
    if (t.diff(l)) {
      Eigen::MatrixXd lbar = -(bbar * n.value.transpose());
      t.accumulate(l, lbar.triangularView<Eigen::Lower>());
    }
  });
}

Var Tape::gram_se(Var x, Var z, Var log_ls, Var log_sv) {
  const Eigen::MatrixXd& xv = value(x);
  const Eigen::MatrixXd& zv = value(z);
  if (value(log_ls).cols() != 1) throw std::invalid_argument("gram_se: log_ls must be a column");
  if (xv.cols() != value(log_ls).rows() || zv.cols() != value(log_ls).rows())
    throw std::invalid_argument("gram_se: point dimension does not match lengthscale count");

  const Eigen::VectorXd inv_ls2 = (-2.0 * value(log_ls).array()).exp();
  const double sv = std::exp(scalar(log_sv));

  Eigen::MatrixXd k(xv.rows(), zv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    for (Eigen::Index j = 0; j < zv.rows(); ++j) {
      double q = 0.0;
      for (Eigen::Index d = 0; d < xv.cols(); ++d) {
        const double r = xv(i, d) - zv(j, d);
        q += r * r * inv_ls2(d);
      }
      k(i, j) = sv * std::exp(-0.5 * q);
    }
  }

  const bool any_diff = diff(x) || diff(z) || diff(log_ls) || diff(log_sv);
  return emit(std::move(k), any_diff, [x, z, log_ls, log_sv, inv_ls2](Tape& t, Node& n) {
    const Eigen::MatrixXd& xv = t.value(x);
    const Eigen::MatrixXd& zv = t.value(z);
    const Eigen::MatrixXd w = n.adjoint.cwiseProduct(n.value);  // kbar_ij * k_ij

    if (t.diff(log_sv))
      t.accumulate(log_sv, Eigen::MatrixXd::Constant(1, 1, w.sum()));

    const bool need_x = t.diff(x);
    const bool need_z = t.diff(z);
    const bool need_ls = t.diff(log_ls);
    if (!need_x && !need_z && !need_ls) return;

    Eigen::MatrixXd gx = need_x ? Eigen::MatrixXd::Zero(xv.rows(), xv.cols()) : Eigen::MatrixXd();
    Eigen::MatrixXd gz = need_z ? Eigen::MatrixXd::Zero(zv.rows(), zv.cols()) : Eigen::MatrixXd();
    Eigen::VectorXd gls = Eigen::VectorXd::Zero(xv.cols());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      for (Eigen::Index j = 0; j < zv.rows(); ++j) {
        const double wij = w(i, j);
        if (wij == 0.0) continue;
        for (Eigen::Index d = 0; d < xv.cols(); ++d) {
          const double r = xv(i, d) - zv(j, d);
          const double q = r * inv_ls2(d);
          if (need_ls) gls(d) += wij * r * q;  // d/dlog l_d = +r^2 / l_d^2
          if (need_x) gx(i, d) -= wij * q;
          if (need_z) gz(j, d) += wij * q;
        }
      }
    }
    if (need_x) t.accumulate(x, gx);
    if (need_z) t.accumulate(z, gz);
    if (need_ls) t.accumulate(log_ls, gls);
  });
}

Var Tape::se_prior_diag(Eigen::Index n, Var log_sv) {
  const double sv = std::exp(scalar(log_sv));
  return emit(Eigen::MatrixXd::Constant(n, 1, sv), diff(log_sv), [log_sv, sv](Tape& t, Node& nd) {
    t.accumulate(log_sv, Eigen::MatrixXd::Constant(1, 1, sv * nd.adjoint.sum()));
  });
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) throw std::invalid_argument("backward: root must be 1x1");
  for (Node& n : nodes_) {
    n.seen = false;
    n.adjoint.resize(0, 0);
  }
  accumulate(root, Eigen::MatrixXd::Constant(1, 1, 1.0));
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.differentiable || !n.seen || !n.back) continue;
    n.back(*this, n);
  }
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (!n.seen) return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

}  // namespace dgps::ad
