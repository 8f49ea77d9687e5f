#include "dgps/dgp.hpp"

#include <cmath>
#include <numbers>

#include "dgps/errors.hpp"
#include "dgps/linalg.hpp"
#include "dgps/numerics.hpp"
#include "graphs.hpp"

namespace dgps {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void DGPModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("DGPModel: at least one layer required");
  for (const LayerState& l : layers) l.validate();
  for (int l = 0; l + 1 < depth(); ++l)
    if (layers[l].d_out() != layers[l + 1].d_in())
      throw std::invalid_argument("DGPModel: layer output width must match next input width");
}

LatentLayout latent_layout(const DGPModel& model) {
  LatentLayout layout;
  for (const LayerState& l : model.layers)
    layout.blocks.push_back({l.u.rows(), l.u.cols()});
  return layout;
}

FlatLatent latent_from_model(const DGPModel& model) {
  std::vector<Eigen::MatrixXd> us;
  us.reserve(model.layers.size());
  for (const LayerState& l : model.layers) us.push_back(l.u);
  return pack_latent(us);
}

void set_model_latent(DGPModel& model, const FlatLatent& latent) {
  std::vector<Eigen::MatrixXd> us = unpack_latent(latent);
  if (us.size() != model.layers.size())
    throw std::invalid_argument("set_model_latent: layout does not match model");
  for (std::size_t l = 0; l < us.size(); ++l) {
    if (us[l].rows() != model.layers[l].u.rows() || us[l].cols() != model.layers[l].u.cols())
      throw std::invalid_argument("set_model_latent: block shape does not match layer");
    model.layers[l].u = std::move(us[l]);
  }
}

FlatLatent pack_latent(const std::vector<Eigen::MatrixXd>& u) {
  FlatLatent out;
  for (const Eigen::MatrixXd& m : u) out.layout.blocks.push_back({m.rows(), m.cols()});
  out.values.resize(out.layout.total());
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd& m : u) {
    out.values.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  }
  return out;
}

std::vector<Eigen::MatrixXd> unpack_latent(const Eigen::VectorXd& values,
                                           const LatentLayout& layout) {
  if (values.size() != layout.total())
    throw std::invalid_argument("unpack_latent: value length does not match layout");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(layout.blocks.size());
  Eigen::Index at = 0;
  for (const LatentLayout::Block& b : layout.blocks) {
    out.push_back(Eigen::Map<const Eigen::MatrixXd>(values.data() + at, b.rows, b.cols));
    at += b.rows * b.cols;
  }
  return out;
}

std::vector<Eigen::MatrixXd> unpack_latent(const FlatLatent& latent) {
  return unpack_latent(latent.values, latent.layout);
}

Eigen::Index hyper_dim(const DGPModel& model) {
  Eigen::Index n = 1;  // log_noise_variance
  for (const LayerState& l : model.layers) n += l.d_in() + 1 + l.z.size();
  return n;
}

Eigen::VectorXd pack_hypers(const DGPModel& model) {
  Eigen::VectorXd theta(hyper_dim(model));
  Eigen::Index at = 0;
  for (const LayerState& l : model.layers) {
    theta.segment(at, l.d_in()) = l.kernel.log_lengthscales;
    at += l.d_in();
    theta(at++) = l.kernel.log_signal_variance;
    theta.segment(at, l.z.size()) = Eigen::Map<const Eigen::VectorXd>(l.z.data(), l.z.size());
    at += l.z.size();
  }
  theta(at++) = model.log_noise_variance;
  return theta;
}

void unpack_hypers(const Eigen::VectorXd& theta, DGPModel& model) {
  if (theta.size() != hyper_dim(model))
    throw std::invalid_argument("unpack_hypers: length does not match model");
  Eigen::Index at = 0;
  for (LayerState& l : model.layers) {
    l.kernel.log_lengthscales = theta.segment(at, l.d_in());
    at += l.d_in();
    l.kernel.log_signal_variance = theta(at++);
    l.z = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, l.z.rows(), l.z.cols());
    at += l.z.size();
  }
  model.log_noise_variance = theta(at++);
}

std::vector<Eigen::MatrixXd> propagate(const Eigen::MatrixXd& x, const FlatLatent& latent,
                                       const DGPModel& model, RngStream& rng) {
  const std::vector<Eigen::MatrixXd> us = unpack_latent(latent);
  if (static_cast<int>(us.size()) != model.depth())
    throw std::invalid_argument("propagate: latent layout does not match model depth");
  std::vector<Eigen::MatrixXd> fs;
  fs.reserve(model.depth());
  const Eigen::MatrixXd* current = &x;
  for (int l = 0; l < model.depth(); ++l) {
    LayerState layer = model.layers[l];
    layer.u = us[l];
    fs.push_back(sample_layer(conditional(*current, layer), rng));
    current = &fs.back();
  }
  return fs;
}

double log_prior(const FlatLatent& latent, const DGPModel& model) {
  const std::vector<Eigen::MatrixXd> us = unpack_latent(latent);
  double total = 0.0;
  for (int l = 0; l < model.depth(); ++l) {
    const LayerState& layer = model.layers[l];
    const Eigen::MatrixXd& u = us[l];
    const CholFactor f = chol_psd(gram(layer.z, layer.z, layer.kernel), kGraphJitter);
    const Eigen::MatrixXd w = tri_solve(f, u, TriMode::kForward);
    const double logdet_half = f.lower.diagonal().array().log().sum();
    const double d = static_cast<double>(u.cols());
    const double m = static_cast<double>(u.rows());
    total += -0.5 * w.squaredNorm() - d * logdet_half - 0.5 * m * d * kLog2Pi;
  }
  return total;
}

double gaussian_loglik(const Eigen::MatrixXd& y, const Eigen::MatrixXd& f,
                       double log_noise_variance) {
  if (y.rows() != f.rows() || y.cols() != f.cols())
    throw std::invalid_argument("gaussian_loglik: shape mismatch");
  const double nv = std::exp(log_noise_variance);
  const double np = static_cast<double>(y.size());
  return -0.5 * (y - f).squaredNorm() / nv - 0.5 * np * (kLog2Pi + log_noise_variance);
}

double log_joint_estimate(const FlatLatent& latent, const Eigen::MatrixXd& x_batch,
                          const Eigen::MatrixXd& y_batch, const DGPModel& model, RngStream& rng) {
  if (x_batch.rows() == 0) throw std::invalid_argument("log_joint_estimate: batch must be nonempty");
  const std::vector<Eigen::MatrixXd> fs = propagate(x_batch, latent, model, rng);
  const double scale = detail::batch_scale(model, x_batch.rows());
  return scale * gaussian_loglik(y_batch, fs.back(), model.log_noise_variance) +
         log_prior(latent, model);
}

LogJointGrads grad_log_joint(const FlatLatent& latent, const Eigen::MatrixXd& x_batch,
                             const Eigen::MatrixXd& y_batch, const DGPModel& model,
                             RngStream& rng, GradWrt wrt) {
  const bool want_latent = wrt != GradWrt::kHypers;
  const bool want_hypers = wrt != GradWrt::kLatent;
  detail::JointGraph g =
      detail::build_log_joint_graph(model, latent, x_batch, y_batch, rng, want_latent, want_hypers);
  g.tape.backward(g.root);

  LogJointGrads out;
  out.value = g.value();
  if (want_latent) {
    out.latent.resize(latent.values.size());
    Eigen::Index at = 0;
    for (int l = 0; l < model.depth(); ++l) {
      const Eigen::MatrixXd gu = g.tape.grad(g.u[l]);
      out.latent.segment(at, gu.size()) = Eigen::Map<const Eigen::VectorXd>(gu.data(), gu.size());
      at += gu.size();
    }
  }
  if (want_hypers) out.hypers = detail::collect_hyper_grads(g.tape, g.hyper, g.log_noise, model);
  return out;
}

Eigen::MatrixXd PredictiveMixture::mean() const {
  if (components.empty()) throw InvalidStateError("PredictiveMixture: no components");
  Eigen::MatrixXd m = components.front().mean;
  for (std::size_t s = 1; s < components.size(); ++s) m += components[s].mean;
  return m / static_cast<double>(components.size());
}

PredictiveMixture predict_mixture(const Eigen::MatrixXd& x_star, const SampleWindow& window,
                                  const DGPModel& model, RngStream& rng) {
  if (window.empty()) throw InvalidStateError("predict_mixture: sample window is empty");
  const LatentLayout layout = latent_layout(model);
  const double nv = model.noise_variance();

  PredictiveMixture mix;
  mix.components.reserve(window.size());
  for (int s = 0; s < window.size(); ++s) {
    const std::vector<Eigen::MatrixXd> us = unpack_latent(window.at(s), layout);
    Eigen::MatrixXd current = x_star;
    for (int l = 0; l < model.depth(); ++l) {
      LayerState layer = model.layers[l];
      layer.u = us[l];
      const ConditionalMoments cm = conditional(current, layer);
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

double mixture_mll(const PredictiveMixture& mixture, const Eigen::MatrixXd& y_star) {
  if (mixture.components.empty()) throw InvalidStateError("mixture_mll: no components");
  const Eigen::Index n = y_star.rows();
  const Eigen::Index p = y_star.cols();
  const std::size_t s_count = mixture.components.size();
  for (const PredictiveMixture::Component& c : mixture.components)
    if (c.mean.rows() != n || c.mean.cols() != p)
      throw std::invalid_argument("mixture_mll: component shape does not match targets");

  double total = 0.0;
  std::vector<double> logp(s_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < s_count; ++s) {
      const PredictiveMixture::Component& c = mixture.components[s];
      double lp = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        const double v = c.var(i, j);
        const double r = y_star(i, j) - c.mean(i, j);
        lp += -0.5 * (r * r / v + std::log(v) + kLog2Pi);
      }
      logp[s] = lp;
      max_lp = std::max(max_lp, lp);
    }
    double acc = 0.0;
    for (double lp : logp) acc += std::exp(lp - max_lp);
    total += max_lp + std::log(acc / static_cast<double>(s_count));
  }
  return total / static_cast<double>(n);
}

}  // namespace dgps
