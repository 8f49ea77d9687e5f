#include "dgps/dsvi.hpp"

#include <cmath>
#include <stdexcept>

#include "dgps/errors.hpp"
#include "dgps/linalg.hpp"
#include "dgps/mcem.hpp"
#include "dgps/numerics.hpp"
#include "dgps/targets.hpp"
#include "graphs.hpp"

namespace dgps {

namespace {

// Exact-first factorization for the analysis-level operations below; the
// algebraic identities they are tested against do not survive a jitter
// offset, so jitter only enters if the factorization actually fails.
CholFactor chol_exact_first(const Eigen::MatrixXd& a) { return chol_psd(a, 0.0); }

}  // namespace

ConditionalMoments variational_marginal(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                        const Eigen::MatrixXd& m, const Eigen::MatrixXd& s_chol,
                                        const KernelParams& kernel, const MeanFnSpec& mean_fn) {
  if (x.cols() != z.cols()) throw std::invalid_argument("variational_marginal: width mismatch");
  if (m.rows() != z.rows() || s_chol.rows() != z.rows() || s_chol.cols() != z.rows())
    throw std::invalid_argument("variational_marginal: parameter shape mismatch");

  const CholFactor lz = chol_exact_first(gram(z, z, kernel));
  const Eigen::MatrixXd a = tri_solve(lz, gram(z, x, kernel), TriMode::kForward);
  const Eigen::MatrixXd wm = tri_solve(lz, m, TriMode::kForward);
  const Eigen::MatrixXd g = tri_solve(lz, s_chol, TriMode::kForward);
  const Eigen::MatrixXd h = g.transpose() * a;

  ConditionalMoments out;
  out.mean = mean_fn.apply(x, m.cols()) + a.transpose() * wm;
  Eigen::VectorXd var = Eigen::VectorXd::Constant(x.rows(), kernel.signal_variance()) -
                        a.colwise().squaredNorm().transpose() +
                        h.colwise().squaredNorm().transpose();
  clamp_variances(var);
  out.var_diag = var.replicate(1, m.cols());
  return out;
}

double kl_coupled(const Eigen::MatrixXd& m, const Eigen::MatrixXd& s_chol,
                  const Eigen::MatrixXd& k_zz) {
  const Eigen::Index mm = k_zz.rows();
  if (m.rows() != mm || s_chol.rows() != mm || s_chol.cols() != mm)
    throw std::invalid_argument("kl_coupled: shape mismatch");

  const CholFactor lz = chol_exact_first(k_zz);
  const Eigen::MatrixXd g = tri_solve(lz, s_chol, TriMode::kForward);
  const Eigen::MatrixXd wm = tri_solve(lz, m, TriMode::kForward);
  const double d = static_cast<double>(m.cols());
  const double logdet_k_half = lz.lower.diagonal().array().log().sum();
  const double logdet_s_half = s_chol.diagonal().array().log().sum();
  return d * (0.5 * g.squaredNorm() - 0.5 * static_cast<double>(mm) + logdet_k_half -
              logdet_s_half) +
         0.5 * wm.squaredNorm();
}

ConditionalMoments decoupled_marginal(const Eigen::MatrixXd& x, const DecoupledLayerParams& dec,
                                      const KernelParams& kernel, MeanParameterization kind,
                                      const MeanFnSpec& mean_fn) {
  if (x.cols() != dec.z_a.cols() || x.cols() != dec.z_b.cols())
    throw std::invalid_argument("decoupled_marginal: width mismatch");
  const Eigen::Index m_b = dec.z_b.rows();
  if (dec.b_chol.rows() != m_b || dec.b_chol.cols() != m_b)
    throw std::invalid_argument("decoupled_marginal: b_chol shape mismatch");
  if (dec.mean_param.rows() != dec.z_a.rows())
    throw std::invalid_argument("decoupled_marginal: mean_param shape mismatch");

  const Eigen::Index d_out = dec.mean_param.cols();
  const Eigen::MatrixXd kza_x = gram(dec.z_a, x, kernel);

  Eigen::MatrixXd mean_gp;
  switch (kind) {
    case MeanParameterization::kCB:
      mean_gp = kza_x.transpose() * dec.mean_param;
      break;
    case MeanParameterization::kGP: {
      const CholFactor la = chol_exact_first(gram(dec.z_a, dec.z_a, kernel));
      mean_gp = tri_solve(la, kza_x, TriMode::kForward).transpose() *
                tri_solve(la, dec.mean_param, TriMode::kForward);
      break;
    }
    case MeanParameterization::kGPcent: {
      const CholFactor la = chol_exact_first(gram(dec.z_a, dec.z_a, kernel));
      mean_gp = tri_solve(la, kza_x, TriMode::kForward).transpose() * dec.mean_param;
      break;
    }
  }

  // (B^{-1} + K)^{-1} = Cb (I + Cb^T K Cb)^{-1} Cb^T, evaluated through Cb.
  const Eigen::MatrixXd kzbzb = gram(dec.z_b, dec.z_b, kernel);
  const Eigen::MatrixXd t = dec.b_chol.transpose() * kzbzb * dec.b_chol +
                            Eigen::MatrixXd::Identity(m_b, m_b);
  const CholFactor lt = chol_psd(t, 0.0);
  const Eigen::MatrixXd hb =
      tri_solve(lt, dec.b_chol.transpose() * gram(dec.z_b, x, kernel), TriMode::kForward);

  ConditionalMoments out;
  out.mean = mean_fn.apply(x, d_out) + mean_gp;
  Eigen::VectorXd var = Eigen::VectorXd::Constant(x.rows(), kernel.signal_variance()) -
                        hb.colwise().squaredNorm().transpose();
  clamp_variances(var);
  out.var_diag = var.replicate(1, d_out);
  return out;
}

double kl_decoupled(const DecoupledLayerParams& dec, const KernelParams& kernel,
                    MeanParameterization kind) {
  const Eigen::Index m_b = dec.z_b.rows();
  const double d_out = static_cast<double>(dec.mean_param.cols());

  double quad = 0.0;
  switch (kind) {
    case MeanParameterization::kCB: {
      const Eigen::MatrixXd kzaza = gram(dec.z_a, dec.z_a, kernel);
      quad = 0.5 * (dec.mean_param.transpose() * kzaza * dec.mean_param).trace();
      break;
    }
    case MeanParameterization::kGP: {
      const CholFactor la = chol_exact_first(gram(dec.z_a, dec.z_a, kernel));
      quad = 0.5 * tri_solve(la, dec.mean_param, TriMode::kForward).squaredNorm();
      break;
    }
    case MeanParameterization::kGPcent:
      quad = 0.5 * dec.mean_param.squaredNorm();
      break;
  }

  const Eigen::MatrixXd kzbzb = gram(dec.z_b, dec.z_b, kernel);
  const Eigen::MatrixXd t = dec.b_chol.transpose() * kzbzb * dec.b_chol +
                            Eigen::MatrixXd::Identity(m_b, m_b);
  const CholFactor lt = chol_psd(t, 0.0);
  const double half_logdet = lt.lower.diagonal().array().log().sum();
  const double tr_tinv =
      tri_solve(lt, Eigen::MatrixXd::Identity(m_b, m_b), TriMode::kForward).squaredNorm();
  return d_out * (half_logdet - 0.5 * (static_cast<double>(m_b) - tr_tinv)) + quad;
}

double elbo_estimate(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                     const DGPModel& model, const CoupledVarParams& vp, RngStream& rng) {
  detail::CoupledElboGraph g =
      detail::build_coupled_elbo_graph(model, vp, x_batch, y_batch, rng, false, false);
  return g.value();
}

double elbo_estimate(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                     const DGPModel& model, const DecoupledVarParams& vp,
                     MeanParameterization kind, RngStream& rng) {
  detail::DecoupledElboGraph g =
      detail::build_decoupled_elbo_graph(model, vp, kind, x_batch, y_batch, rng, false, false);
  return g.value();
}

CoupledElboGrads elbo_grads(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                            const DGPModel& model, const CoupledVarParams& vp, RngStream& rng) {
  detail::CoupledElboGraph g =
      detail::build_coupled_elbo_graph(model, vp, x_batch, y_batch, rng, true, true);
  g.tape.backward(g.root);
  CoupledElboGrads out;
  out.value = g.value();
  out.kl_total = g.tape.scalar(g.kl_total);
  for (int l = 0; l < model.depth(); ++l) {
    out.d_m.push_back(g.tape.grad(g.m[l]));
    out.d_s_chol.push_back(g.tape.grad(g.s_chol[l]));
  }
  out.d_hypers = detail::collect_hyper_grads(g.tape, g.hyper, g.log_noise, model);
  return out;
}

DecoupledElboGrads elbo_grads(const Eigen::MatrixXd& x_batch, const Eigen::MatrixXd& y_batch,
                              const DGPModel& model, const DecoupledVarParams& vp,
                              MeanParameterization kind, RngStream& rng) {
  detail::DecoupledElboGraph g =
      detail::build_decoupled_elbo_graph(model, vp, kind, x_batch, y_batch, rng, true, true);
  g.tape.backward(g.root);
  DecoupledElboGrads out;
  out.value = g.value();
  out.kl_total = g.tape.scalar(g.kl_total);
  for (int l = 0; l < model.depth(); ++l) {
    out.d_mean_param.push_back(g.tape.grad(g.mean_param[l]));
    out.d_b_chol.push_back(g.tape.grad(g.b_chol[l]));
    out.d_z_a.push_back(g.tape.grad(g.z_a[l]));
    out.d_z_b.push_back(g.tape.grad(g.z_b[l]));
    out.d_log_lengthscales.push_back(g.tape.grad(g.hyper[l].log_ls));
    out.d_log_signal_variance.push_back(g.tape.grad(g.hyper[l].log_sv)(0, 0));
  }
  out.d_log_noise = g.tape.grad(g.log_noise)(0, 0);
  return out;
}

CoupledVarParams make_coupled_varparams(const DGPModel& model) {
  CoupledVarParams vp;
  for (const LayerState& layer : model.layers) {
    vp.m.push_back(Eigen::MatrixXd::Zero(layer.m(), layer.d_out()));
    const CholFactor lz = chol_psd(gram(layer.z, layer.z, layer.kernel), kGraphJitter);
    vp.s_chol.push_back(std::sqrt(1e-5) * lz.lower);
  }
  return vp;
}

DecoupledVarParams make_decoupled_varparams(const DGPModel& model, int m_a, int m_b,
                                            RngStream& rng) {
  DecoupledVarParams vp;
  for (const LayerState& layer : model.layers) {
    DecoupledLayerParams dl;
    const Eigen::Index m0 = layer.z.rows();
    dl.z_a.resize(m_a, layer.d_in());
    for (int i = 0; i < m_a; ++i)
      dl.z_a.row(i) = layer.z.row(i % m0) + 0.05 * rng.normal_vector(layer.d_in()).transpose();
    dl.z_b.resize(m_b, layer.d_in());
    for (int i = 0; i < m_b; ++i)
      dl.z_b.row(i) = layer.z.row(i % m0) + 0.05 * rng.normal_vector(layer.d_in()).transpose();
    dl.mean_param = Eigen::MatrixXd::Zero(m_a, layer.d_out());
    dl.b_chol = std::sqrt(1e-4) * Eigen::MatrixXd::Identity(m_b, m_b);
    vp.layers.push_back(std::move(dl));
  }
  return vp;
}

namespace {

// Lower-triangular matrix <-> free vector, diagonal in log space so positivity
// survives unconstrained steps. Order per column: log diag, then the strict
// lower part.
struct TriPack {
  static Eigen::Index dim(Eigen::Index m) { return m * (m + 1) / 2; }

  static void pack(const Eigen::MatrixXd& l, Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      out(k++) = std::log(l(j, j));
      for (Eigen::Index i = j + 1; i < l.rows(); ++i) out(k++) = l(i, j);
    }
  }

  static Eigen::MatrixXd unpack(const Eigen::Ref<const Eigen::VectorXd>& in, Eigen::Index m) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      l(j, j) = std::exp(in(k++));
      for (Eigen::Index i = j + 1; i < m; ++i) l(i, j) = in(k++);
    }
    return l;
  }

  // Chains a full-matrix adjoint into the free parameterization.
  static void pack_grad(const Eigen::MatrixXd& l, const Eigen::MatrixXd& grad,
                        Eigen::Ref<Eigen::VectorXd> out) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < l.cols(); ++j) {
      out(k++) = grad(j, j) * l(j, j);
      for (Eigen::Index i = j + 1; i < l.rows(); ++i) out(k++) = grad(i, j);
    }
  }
};

Eigen::Index coupled_var_dim(const DGPModel& model) {
  Eigen::Index n = 0;
  for (const LayerState& layer : model.layers)
    n += layer.m() * layer.d_out() + TriPack::dim(layer.m());
  return n;
}

Eigen::VectorXd pack_coupled(const DGPModel& model, const CoupledVarParams& vp,
                             bool with_hypers) {
  Eigen::VectorXd out(coupled_var_dim(model) + (with_hypers ? hyper_dim(model) : 0));
  Eigen::Index at = 0;
  for (int l = 0; l < model.depth(); ++l) {
    const Eigen::MatrixXd& m = vp.m[l];
    out.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
    TriPack::pack(vp.s_chol[l], out.segment(at, TriPack::dim(m.rows())));
    at += TriPack::dim(m.rows());
  }
  if (with_hypers) out.segment(at, hyper_dim(model)) = pack_hypers(model);
  return out;
}

void unpack_coupled(const Eigen::VectorXd& flat, DGPModel& model, CoupledVarParams& vp,
                    bool with_hypers) {
  Eigen::Index at = 0;
  for (int l = 0; l < model.depth(); ++l) {
    Eigen::MatrixXd& m = vp.m[l];
    m = Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, m.rows(), m.cols());
    at += m.size();
    vp.s_chol[l] = TriPack::unpack(flat.segment(at, TriPack::dim(m.rows())), m.rows());
    at += TriPack::dim(m.rows());
  }
  if (with_hypers) unpack_hypers(flat.segment(at, hyper_dim(model)), model);
}

Eigen::Index decoupled_var_dim(const DecoupledVarParams& vp) {
  Eigen::Index n = 0;
  for (const DecoupledLayerParams& dl : vp.layers)
    n += dl.mean_param.size() + TriPack::dim(dl.b_chol.rows()) + dl.z_a.size() + dl.z_b.size();
  return n;
}

// Decoupled layout per layer: [vec(mean_param); tri(b_chol); vec(z_a); vec(z_b)],
// then per layer [log_ls; log_sv] and log_noise when hypers are trained.
Eigen::Index decoupled_hyper_dim(const DGPModel& model) {
  Eigen::Index n = 1;
  for (const LayerState& layer : model.layers) n += layer.d_in() + 1;
  return n;
}

Eigen::VectorXd pack_decoupled(const DGPModel& model, const DecoupledVarParams& vp,
                               bool with_hypers) {
  Eigen::VectorXd out(decoupled_var_dim(vp) + (with_hypers ? decoupled_hyper_dim(model) : 0));
  Eigen::Index at = 0;
  for (const DecoupledLayerParams& dl : vp.layers) {
    out.segment(at, dl.mean_param.size()) =
        Eigen::Map<const Eigen::VectorXd>(dl.mean_param.data(), dl.mean_param.size());
    at += dl.mean_param.size();
    TriPack::pack(dl.b_chol, out.segment(at, TriPack::dim(dl.b_chol.rows())));
    at += TriPack::dim(dl.b_chol.rows());
    out.segment(at, dl.z_a.size()) = Eigen::Map<const Eigen::VectorXd>(dl.z_a.data(), dl.z_a.size());
    at += dl.z_a.size();
    out.segment(at, dl.z_b.size()) = Eigen::Map<const Eigen::VectorXd>(dl.z_b.data(), dl.z_b.size());
    at += dl.z_b.size();
  }
  if (with_hypers) {
    for (const LayerState& layer : model.layers) {
      out.segment(at, layer.d_in()) = layer.kernel.log_lengthscales;
      at += layer.d_in();
      out(at++) = layer.kernel.log_signal_variance;
    }
    out(at++) = model.log_noise_variance;
  }
  return out;
}

void unpack_decoupled(const Eigen::VectorXd& flat, DGPModel& model, DecoupledVarParams& vp,
                      bool with_hypers) {
  Eigen::Index at = 0;
  for (DecoupledLayerParams& dl : vp.layers) {
    dl.mean_param = Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, dl.mean_param.rows(),
                                                      dl.mean_param.cols());
    at += dl.mean_param.size();
    dl.b_chol = TriPack::unpack(flat.segment(at, TriPack::dim(dl.b_chol.rows())), dl.b_chol.rows());
    at += TriPack::dim(dl.b_chol.rows());
    dl.z_a = Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, dl.z_a.rows(), dl.z_a.cols());
    at += dl.z_a.size();
    dl.z_b = Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, dl.z_b.rows(), dl.z_b.cols());
    at += dl.z_b.size();
  }
  if (with_hypers) {
    for (LayerState& layer : model.layers) {
      layer.kernel.log_lengthscales = flat.segment(at, layer.d_in());
      at += layer.d_in();
      layer.kernel.log_signal_variance = flat(at++);
    }
    model.log_noise_variance = flat(at++);
  }
}

struct Batch {
  Eigen::MatrixXd x, y;
};

Batch draw_minibatch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index size,
                     RngStream& rng) {
  if (size >= x.rows()) return {x, y};
  const std::vector<Eigen::Index> rows = draw_batch_indices(x.rows(), size, rng);
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  b.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    b.y.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
  }
  return b;
}

}  // namespace

void dsvi_train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, DGPModel& model,
                CoupledVarParams& vp, const DsviTrainConfig& config, RngStream& rng,
                const DiagnosticsSink& sink) {
  model.validate();
  if (config.iterations < 0) throw std::invalid_argument("dsvi_train: negative iteration count");

  const bool with_hypers = config.optimize_hypers;
  Eigen::VectorXd flat = pack_coupled(model, vp, with_hypers);
  OptimizerState opt = OptimizerState::create(flat.size(), config.learning_rate);
  WallClock clock;

  for (long iter = 0; iter < config.iterations; ++iter) {
    const Batch b = draw_minibatch(x, y, config.minibatch_size, rng);
    detail::CoupledElboGraph g =
        detail::build_coupled_elbo_graph(model, vp, b.x, b.y, rng, true, with_hypers);
    g.tape.backward(g.root);

    Eigen::VectorXd grad(flat.size());
    Eigen::Index at = 0;
    for (int l = 0; l < model.depth(); ++l) {
      const Eigen::MatrixXd gm = g.tape.grad(g.m[l]);
      grad.segment(at, gm.size()) = Eigen::Map<const Eigen::VectorXd>(gm.data(), gm.size());
      at += gm.size();
      TriPack::pack_grad(vp.s_chol[l], g.tape.grad(g.s_chol[l]),
                         grad.segment(at, TriPack::dim(vp.s_chol[l].rows())));
      at += TriPack::dim(vp.s_chol[l].rows());
    }
    if (with_hypers) {
      grad.segment(at, hyper_dim(model)) =
          detail::collect_hyper_grads(g.tape, g.hyper, g.log_noise, model);
      if (config.fix_noise) grad(grad.size() - 1) = 0.0;
    }

    flat += adaptive_step(opt, grad);
    unpack_coupled(flat, model, vp, with_hypers);

    if (sink && (iter % config.report_every == 0 || iter + 1 == config.iterations)) {
      const double t = clock.seconds();
      sink({config.method_label, iter, t, "elbo", g.value()});
      sink({config.method_label, iter, t, "kl_total", g.tape.scalar(g.kl_total)});
    }
  }
}

void dsvi_train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, DGPModel& model,
                DecoupledVarParams& vp, MeanParameterization kind,
                const DsviTrainConfig& config, RngStream& rng, const DiagnosticsSink& sink) {
  model.validate();
  if (config.iterations < 0) throw std::invalid_argument("dsvi_train: negative iteration count");

  const bool with_hypers = config.optimize_hypers;
  Eigen::VectorXd flat = pack_decoupled(model, vp, with_hypers);
  OptimizerState opt = OptimizerState::create(flat.size(), config.learning_rate);
  WallClock clock;

  for (long iter = 0; iter < config.iterations; ++iter) {
    const Batch b = draw_minibatch(x, y, config.minibatch_size, rng);
    detail::DecoupledElboGraph g =
        detail::build_decoupled_elbo_graph(model, vp, kind, b.x, b.y, rng, true, with_hypers);
    g.tape.backward(g.root);

    Eigen::VectorXd grad(flat.size());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < vp.layers.size(); ++l) {
      const DecoupledLayerParams& dl = vp.layers[l];
      const Eigen::MatrixXd gm = g.tape.grad(g.mean_param[l]);
      grad.segment(at, gm.size()) = Eigen::Map<const Eigen::VectorXd>(gm.data(), gm.size());
      at += gm.size();
      TriPack::pack_grad(dl.b_chol, g.tape.grad(g.b_chol[l]),
                         grad.segment(at, TriPack::dim(dl.b_chol.rows())));
      at += TriPack::dim(dl.b_chol.rows());
      const Eigen::MatrixXd gza = g.tape.grad(g.z_a[l]);
      grad.segment(at, gza.size()) = Eigen::Map<const Eigen::VectorXd>(gza.data(), gza.size());
      at += gza.size();
      const Eigen::MatrixXd gzb = g.tape.grad(g.z_b[l]);
      grad.segment(at, gzb.size()) = Eigen::Map<const Eigen::VectorXd>(gzb.data(), gzb.size());
      at += gzb.size();
    }
    if (with_hypers) {
      for (std::size_t l = 0; l < vp.layers.size(); ++l) {
        const Eigen::MatrixXd gls = g.tape.grad(g.hyper[l].log_ls);
        grad.segment(at, gls.size()) = Eigen::Map<const Eigen::VectorXd>(gls.data(), gls.size());
        at += gls.size();
        grad(at++) = g.tape.grad(g.hyper[l].log_sv)(0, 0);
      }
      grad(at++) = config.fix_noise ? 0.0 : g.tape.grad(g.log_noise)(0, 0);
    }

    flat += adaptive_step(opt, grad);
    unpack_decoupled(flat, model, vp, with_hypers);

    if (sink && (iter % config.report_every == 0 || iter + 1 == config.iterations)) {
      const double t = clock.seconds();
      sink({config.method_label, iter, t, "elbo", g.value()});
      sink({config.method_label, iter, t, "kl_total", g.tape.scalar(g.kl_total)});
    }
  }
}

namespace {

template <typename MomentsFn>
PredictiveMixture predict_by_seeds(const Eigen::MatrixXd& x_star, const DGPModel& model,
                                   int n_seeds, RngStream& rng, const MomentsFn& layer_moments) {
  if (n_seeds < 1) throw std::invalid_argument("dsvi_predict: need at least one seed");
  const double nv = model.noise_variance();
  PredictiveMixture mix;
  mix.components.reserve(n_seeds);
  for (int s = 0; s < n_seeds; ++s) {
    Eigen::MatrixXd current = x_star;
    for (int l = 0; l < model.depth(); ++l) {
      const ConditionalMoments cm = layer_moments(l, current);
      if (l + 1 < model.depth()) {
        current = sample_layer(cm, rng);
      } else {
        PredictiveMixture::Component c;
        c.mean = cm.mean;
        c.var = cm.var_diag.array() + nv;
        mix.components.push_back(std::move(c));
      }
    }
  }
  return mix;
}

}  // namespace

PredictiveMixture dsvi_predict(const Eigen::MatrixXd& x_star, const DGPModel& model,
                               const CoupledVarParams& vp, int n_seeds, RngStream& rng) {
  return predict_by_seeds(x_star, model, n_seeds, rng,
                          [&](int l, const Eigen::MatrixXd& current) {
                            const LayerState& layer = model.layers[l];
                            return variational_marginal(current, layer.z, vp.m[l], vp.s_chol[l],
                                                        layer.kernel, layer.mean_fn);
                          });
}

PredictiveMixture dsvi_predict(const Eigen::MatrixXd& x_star, const DGPModel& model,
                               const DecoupledVarParams& vp, MeanParameterization kind,
                               int n_seeds, RngStream& rng) {
  return predict_by_seeds(x_star, model, n_seeds, rng,
                          [&](int l, const Eigen::MatrixXd& current) {
                            const LayerState& layer = model.layers[l];
                            return decoupled_marginal(current, vp.layers[l], layer.kernel, kind,
                                                      layer.mean_fn);
                          });
}

Eigen::VectorXd sample_variational_latent(const DGPModel& model, const CoupledVarParams& vp,
                                          RngStream& rng) {
  std::vector<Eigen::MatrixXd> us;
  us.reserve(model.layers.size());
  for (int l = 0; l < model.depth(); ++l) {
    const Eigen::MatrixXd eps = rng.normal_matrix(vp.m[l].rows(), vp.m[l].cols());
    us.push_back(vp.m[l] + vp.s_chol[l] * eps);
  }
  return pack_latent(us).values;
}

}  // namespace dgps
