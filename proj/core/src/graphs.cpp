#include "graphs.hpp"

#include <cmath>
#include <numbers>

#include "dgps/numerics.hpp"

namespace dgps::detail {

namespace {

using ad::Tape;
using ad::Var;

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

// Checks the pre-clamp variance values and returns max(var, 0).
Var checked_clamp(Tape& tape, Var var) {
  const Eigen::MatrixXd& v = tape.value(var);
  if ((v.array() < kVarianceRoundoff).any())
    throw NumericalError("conditional variance is negative beyond round-off");
  return tape.clamp_nonneg(var);
}

Var apply_mean_fn(Tape& tape, const MeanFnSpec& mf, Var x, Var mean_gp) {
  switch (mf.kind) {
    case MeanFnSpec::Kind::kZero:
      return mean_gp;
    case MeanFnSpec::Kind::kIdentity:
      return tape.add(mean_gp, x);
    case MeanFnSpec::Kind::kProjection:
      return tape.add(mean_gp, tape.mul(x, tape.constant(mf.projection)));
  }
  throw std::invalid_argument("apply_mean_fn: unknown kind");
}

// f = mean + sqrt(max(var, 0)) .* eps, with var broadcast across columns.
Var sample_from_moments(Tape& tape, Var mean, Var var_col, const Eigen::MatrixXd& eps) {
  Var sd = tape.sqrt_clamped(var_col);
  Var sd_b = tape.broadcast_cols(sd, eps.cols());
  return tape.add(mean, tape.cwise_mul_const(sd_b, eps));
}

// (scale) * sum_ij log N(y_ij; f_ij, sigma^2)
Var scaled_loglik_graph(Tape& tape, Var f, const Eigen::MatrixXd& y, Var log_noise, double scale) {
  const double np = static_cast<double>(y.size());
  Var resid = tape.add_const(tape.scale(f, -1.0), y);
  Var ss = tape.dot(resid, resid);
  Var inv_nv = tape.exp(tape.scale(log_noise, -1.0));
  Var quad = tape.scale(tape.mul_scalar(ss, inv_nv), -0.5);
  Var logdet_term = tape.scale(log_noise, -0.5 * np);
  Var loglik = tape.add(tape.add(quad, logdet_term),
                        tape.scalar_constant(-0.5 * np * kLog2Pi));
  return tape.scale(loglik, scale);
}

struct JointLayerOut {
  Var f;      // sampled outputs
  Var prior;  // log N(u; 0, K_zz) summed over columns
};

// One layer of the joint graph: conditional moments from u, a pathwise
// sample, and the layer's prior term (which reuses the same factor).
JointLayerOut joint_layer(Tape& tape, Var x, const HyperVars& hv, Var u, const MeanFnSpec& mf,
                          const Eigen::MatrixXd& eps) {
  const Eigen::Index m_rows = tape.value(u).rows();
  const Eigen::Index d_out = tape.value(u).cols();

  Var kzz = tape.gram_se(hv.z, hv.z, hv.log_ls, hv.log_sv);
  Var l = tape.cholesky_psd(kzz, kGraphJitter);
  Var kzx = tape.gram_se(hv.z, x, hv.log_ls, hv.log_sv);
  Var a = tape.tri_solve_lower(l, kzx);
  Var w = tape.tri_solve_lower(l, u);
  Var mean_gp = tape.mul(tape.transpose(a), w);
  Var mean = apply_mean_fn(tape, mf, x, mean_gp);
  Var var = checked_clamp(
      tape, tape.sub(tape.se_prior_diag(tape.value(x).rows(), hv.log_sv), tape.colwise_sumsq(a)));

  JointLayerOut out;
  out.f = sample_from_moments(tape, mean, var, eps);
  Var quad = tape.scale(tape.dot(w, w), -0.5);
  Var logdet = tape.scale(tape.sum_log_diag(l), -static_cast<double>(d_out));
  out.prior = tape.add(tape.add(quad, logdet),
                       tape.scalar_constant(-0.5 * static_cast<double>(m_rows * d_out) * kLog2Pi));
  return out;
}

HyperVars make_hyper_vars(Tape& tape, const LayerState& layer, bool diff) {
  HyperVars hv;
  hv.z = diff ? tape.input(layer.z) : tape.constant(layer.z);
  hv.log_ls = diff ? tape.input(layer.kernel.log_lengthscales)
                   : tape.constant(layer.kernel.log_lengthscales);
  hv.log_sv = diff ? tape.scalar_input(layer.kernel.log_signal_variance)
                   : tape.scalar_constant(layer.kernel.log_signal_variance);
  return hv;
}

}  // namespace

double batch_scale(const DGPModel& model, Eigen::Index batch_rows) {
  if (model.n_total <= 0) return 1.0;
  return static_cast<double>(model.n_total) / static_cast<double>(batch_rows);
}

JointGraph build_log_joint_graph(const DGPModel& model, const FlatLatent& latent,
                                 const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                                 RngStream& rng, bool diff_latent, bool diff_hypers) {
  if (x_batch.rows() == 0) throw std::invalid_argument("log_joint: batch must be nonempty");
  const std::vector<Eigen::MatrixXd> us = unpack_latent(latent);
  if (static_cast<int>(us.size()) != model.depth())
    throw std::invalid_argument("log_joint: latent layout does not match model depth");

  JointGraph g;
  g.log_noise = diff_hypers ? g.tape.scalar_input(model.log_noise_variance)
                            : g.tape.scalar_constant(model.log_noise_variance);

  Var x = g.tape.constant(x_batch);
  Var prior_total = g.tape.scalar_constant(0.0);
  for (int l = 0; l < model.depth(); ++l) {
    const LayerState& layer = model.layers[l];
    g.hyper.push_back(make_hyper_vars(g.tape, layer, diff_hypers));
    g.u.push_back(diff_latent ? g.tape.input(us[l]) : g.tape.constant(us[l]));
    const Eigen::MatrixXd eps = rng.normal_matrix(x_batch.rows(), layer.d_out());
    JointLayerOut out = joint_layer(g.tape, x, g.hyper.back(), g.u.back(), layer.mean_fn, eps);
    prior_total = g.tape.add(prior_total, out.prior);
    x = out.f;
  }

  Var loglik = scaled_loglik_graph(g.tape, x, y_batch, g.log_noise,
                                   batch_scale(model, x_batch.rows()));
  g.root = g.tape.add(loglik, prior_total);
  return g;
}

Eigen::VectorXd collect_hyper_grads(const ad::Tape& tape, const std::vector<HyperVars>& hyper,
                                    ad::Var log_noise, const DGPModel& model) {
  Eigen::VectorXd out(hyper_dim(model));
  Eigen::Index at = 0;
  for (int l = 0; l < model.depth(); ++l) {
    const Eigen::MatrixXd gls = tape.grad(hyper[l].log_ls);
    out.segment(at, gls.size()) = Eigen::Map<const Eigen::VectorXd>(gls.data(), gls.size());
    at += gls.size();
    out(at++) = tape.grad(hyper[l].log_sv)(0, 0);
    const Eigen::MatrixXd gz = tape.grad(hyper[l].z);
    out.segment(at, gz.size()) = Eigen::Map<const Eigen::VectorXd>(gz.data(), gz.size());
    at += gz.size();
  }
  out(at++) = tape.grad(log_noise)(0, 0);
  return out;
}

CoupledElboGraph build_coupled_elbo_graph(const DGPModel& model, const CoupledVarParams& vp,
                                          const Eigen::MatrixXd& x_batch,
                                          const Eigen::MatrixXd& y_batch, RngStream& rng,
                                          bool diff_var, bool diff_hypers) {
  if (x_batch.rows() == 0) throw std::invalid_argument("elbo: batch must be nonempty");
  if (static_cast<int>(vp.m.size()) != model.depth())
    throw std::invalid_argument("elbo: variational parameters do not match model depth");

  CoupledElboGraph g;
  g.log_noise = diff_hypers ? g.tape.scalar_input(model.log_noise_variance)
                            : g.tape.scalar_constant(model.log_noise_variance);
  Var x = g.tape.constant(x_batch);
  g.kl_total = g.tape.scalar_constant(0.0);

  for (int l = 0; l < model.depth(); ++l) {
    const LayerState& layer = model.layers[l];
    const Eigen::Index m_rows = layer.z.rows();
    const double d_out = static_cast<double>(layer.d_out());
    g.hyper.push_back(make_hyper_vars(g.tape, layer, diff_hypers));
    g.m.push_back(diff_var ? g.tape.input(vp.m[l]) : g.tape.constant(vp.m[l]));
    g.s_chol.push_back(diff_var ? g.tape.input(vp.s_chol[l]) : g.tape.constant(vp.s_chol[l]));
    const HyperVars& hv = g.hyper.back();

    Var kzz = g.tape.gram_se(hv.z, hv.z, hv.log_ls, hv.log_sv);
    Var lz = g.tape.cholesky_psd(kzz, kGraphJitter);
    Var kzx = g.tape.gram_se(hv.z, x, hv.log_ls, hv.log_sv);
    Var a = g.tape.tri_solve_lower(lz, kzx);
    Var wm = g.tape.tri_solve_lower(lz, g.m.back());
    Var mean = apply_mean_fn(g.tape, layer.mean_fn, x, g.tape.mul(g.tape.transpose(a), wm));

    Var gs = g.tape.tri_solve_lower(lz, g.s_chol.back());   // L^{-1} Sc
    Var h = g.tape.mul(g.tape.transpose(gs), a);            // M x N
    Var var = checked_clamp(
        g.tape, g.tape.add(g.tape.sub(g.tape.se_prior_diag(x_batch.rows(), hv.log_sv),
                                      g.tape.colwise_sumsq(a)),
                           g.tape.colwise_sumsq(h)));

    // KL = D * ( 1/2 tr(K^{-1}S) - M/2 + 1/2 log|K| - 1/2 log|S| ) + 1/2 m^T K^{-1} m
    Var trace_term = g.tape.scale(g.tape.dot(gs, gs), 0.5);
    Var logdet_k = g.tape.sum_log_diag(lz);
    Var logdet_s = g.tape.sum_log_diag(g.s_chol.back());
    Var kl_shared = g.tape.add(trace_term,
                               g.tape.add(g.tape.sub(logdet_k, logdet_s),
                                          g.tape.scalar_constant(-0.5 * static_cast<double>(m_rows))));
    Var kl = g.tape.add(g.tape.scale(kl_shared, d_out),
                        g.tape.scale(g.tape.dot(wm, wm), 0.5));
    g.kl_total = g.tape.add(g.kl_total, kl);

    const Eigen::MatrixXd eps = rng.normal_matrix(x_batch.rows(), layer.d_out());
    x = sample_from_moments(g.tape, mean, var, eps);
  }

  Var loglik = scaled_loglik_graph(g.tape, x, y_batch, g.log_noise,
                                   batch_scale(model, x_batch.rows()));
  g.root = g.tape.sub(loglik, g.kl_total);
  return g;
}

DecoupledElboGraph build_decoupled_elbo_graph(const DGPModel& model, const DecoupledVarParams& vp,
                                              MeanParameterization kind,
                                              const Eigen::MatrixXd& x_batch,
                                              const Eigen::MatrixXd& y_batch, RngStream& rng,
                                              bool diff_var, bool diff_hypers) {
  if (x_batch.rows() == 0) throw std::invalid_argument("elbo: batch must be nonempty");
  if (static_cast<int>(vp.layers.size()) != model.depth())
    throw std::invalid_argument("elbo: variational parameters do not match model depth");

  DecoupledElboGraph g;
  g.log_noise = diff_hypers ? g.tape.scalar_input(model.log_noise_variance)
                            : g.tape.scalar_constant(model.log_noise_variance);
  Var x = g.tape.constant(x_batch);
  g.kl_total = g.tape.scalar_constant(0.0);

  for (int l = 0; l < model.depth(); ++l) {
    const LayerState& layer = model.layers[l];
    const DecoupledLayerParams& dl = vp.layers[l];
    const Eigen::Index m_b = dl.z_b.rows();
    const double d_out = static_cast<double>(layer.d_out());
    g.hyper.push_back(make_hyper_vars(g.tape, layer, diff_hypers));
    g.hyper.back().z = ad::Var{};  // coupled Z unused here
    const HyperVars& hv = g.hyper.back();
    g.mean_param.push_back(diff_var ? g.tape.input(dl.mean_param) : g.tape.constant(dl.mean_param));
    g.b_chol.push_back(diff_var ? g.tape.input(dl.b_chol) : g.tape.constant(dl.b_chol));
    g.z_a.push_back(diff_var ? g.tape.input(dl.z_a) : g.tape.constant(dl.z_a));
    g.z_b.push_back(diff_var ? g.tape.input(dl.z_b) : g.tape.constant(dl.z_b));
    Var za = g.z_a.back(), zb = g.z_b.back(), mp = g.mean_param.back(), cb = g.b_chol.back();

    // Mean path and the KL quadratic term, per parameterization.
    Var kza_x = g.tape.gram_se(za, x, hv.log_ls, hv.log_sv);
    Var mean_gp, kl_quad;
    if (kind == MeanParameterization::kCB) {
      mean_gp = g.tape.mul(g.tape.transpose(kza_x), mp);
      Var kzaza = g.tape.gram_se(za, za, hv.log_ls, hv.log_sv);
      kl_quad = g.tape.scale(g.tape.dot(mp, g.tape.mul(kzaza, mp)), 0.5);
    } else {
      Var kzaza = g.tape.gram_se(za, za, hv.log_ls, hv.log_sv);
      Var la = g.tape.cholesky_psd(kzaza, kGraphJitter);
      Var aa = g.tape.tri_solve_lower(la, kza_x);
      if (kind == MeanParameterization::kGP) {
        Var wa = g.tape.tri_solve_lower(la, mp);
        mean_gp = g.tape.mul(g.tape.transpose(aa), wa);
        kl_quad = g.tape.scale(g.tape.dot(wa, wa), 0.5);
      } else {  // kGPcent
        mean_gp = g.tape.mul(g.tape.transpose(aa), mp);
        kl_quad = g.tape.scale(g.tape.dot(mp, mp), 0.5);
      }
    }
    Var mean = apply_mean_fn(g.tape, layer.mean_fn, x, mean_gp);

    // Variance through (B^{-1} + K)^{-1} = Cb (I + Cb^T K Cb)^{-1} Cb^T.
    Var kzbzb = g.tape.gram_se(zb, zb, hv.log_ls, hv.log_sv);
    Var kzb_x = g.tape.gram_se(zb, x, hv.log_ls, hv.log_sv);
    Var t = g.tape.add_const(g.tape.mul(g.tape.transpose(cb), g.tape.mul(kzbzb, cb)),
                             Eigen::MatrixXd::Identity(m_b, m_b));
    Var lt = g.tape.cholesky_psd(t, 0.0);
    Var hb = g.tape.tri_solve_lower(lt, g.tape.mul(g.tape.transpose(cb), kzb_x));
    Var var = checked_clamp(
        g.tape, g.tape.sub(g.tape.se_prior_diag(x_batch.rows(), hv.log_sv),
                           g.tape.colwise_sumsq(hb)));

    // KL = D * ( 1/2 log|I + K B| - 1/2 tr(K (B^{-1}+K)^{-1}) ) + 1/2 a^T K_ZaZa a
    //    = D * ( sum log diag Lt - 1/2 (M_b - ||Lt^{-1}||_F^2) ) + quad.
    Var tinv = g.tape.tri_solve_lower(lt, g.tape.constant(Eigen::MatrixXd::Identity(m_b, m_b)));
    Var kl_shared = g.tape.add(
        g.tape.add(g.tape.sum_log_diag(lt), g.tape.scale(g.tape.dot(tinv, tinv), 0.5)),
        g.tape.scalar_constant(-0.5 * static_cast<double>(m_b)));
    g.kl_total = g.tape.add(g.kl_total, g.tape.add(g.tape.scale(kl_shared, d_out), kl_quad));

    const Eigen::MatrixXd eps = rng.normal_matrix(x_batch.rows(), layer.d_out());
    x = sample_from_moments(g.tape, mean, var, eps);
  }

  Var loglik = scaled_loglik_graph(g.tape, x, y_batch, g.log_noise,
                                   batch_scale(model, x_batch.rows()));
  g.root = g.tape.sub(loglik, g.kl_total);
  return g;
}

}  // namespace dgps::detail
