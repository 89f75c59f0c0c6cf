#include "sirep/network.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sirep {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::scaled_tanh: return "scaled_tanh_1_5";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "scaled_tanh_1_5") return Activation::scaled_tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

double activation_lipschitz(Activation a) {
  switch (a) {
    case Activation::relu: return 1.0;
    case Activation::sigmoid: return 0.25;
    case Activation::scaled_tanh: return 1.5;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

namespace {

constexpr double kTanhScale = 1.5;

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::sigmoid: return (1.0 + (-pre.array()).exp()).inverse().matrix();
    case Activation::scaled_tanh: return (kTanhScale * pre.array().tanh()).matrix();
    case Activation::linear: return pre;
  }
  return pre;
}

// Elementwise derivative, expressed through pre- and post-activation values.
Eigen::MatrixXd derivative(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post) {
  switch (a) {
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (post.array() * (1.0 - post.array())).matrix();
    case Activation::scaled_tanh: {
      const Eigen::ArrayXXd t = post.array() / kTanhScale;
      return (kTanhScale * (1.0 - t.square())).matrix();
    }
    case Activation::linear: return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

Eigen::VectorXd derivative_vec(Activation a, const Eigen::VectorXd& pre) {
  const Eigen::MatrixXd pre_m = pre;
  return derivative(a, pre_m, activate(a, pre_m));
}

}  // namespace

std::size_t Network::input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }

std::size_t Network::output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({l.in_dim(), l.out_dim(), l.activation});
  return out;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& batch) const {
  if (static_cast<std::size_t>(batch.rows()) != input_dim()) {
    throw std::invalid_argument("network input has " + std::to_string(batch.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  }
  Eigen::MatrixXd h = batch;
  for (const auto& l : layers) {
    Eigen::MatrixXd pre = l.weight * h;
    pre.colwise() += l.bias;
    h = activate(l.activation, pre);
  }
  return h;
}

Eigen::VectorXd Network::forward(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd out = forward(Eigen::MatrixXd(x));
  return out.col(0);
}

Network xavier_init(std::span<const LayerSpec> spec, std::uint64_t seed) {
  Network net;
  Rng rng = make_rng(seed, 0x5eed);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& s = spec[i];
    if (s.in_dim == 0 || s.out_dim == 0) throw std::invalid_argument("layer dimensions must be >= 1");
    if (i > 0 && spec[i - 1].out_dim != s.in_dim) {
      throw std::invalid_argument("layer " + std::to_string(i) + " input does not match previous output");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    DenseLayer layer;
    layer.activation = s.activation;
    layer.weight.resize(static_cast<Eigen::Index>(s.out_dim), static_cast<Eigen::Index>(s.in_dim));
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, j) = bound * (2.0 * uniform01(rng) - 1.0);
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.out_dim));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd forward(const Network& net, const Eigen::MatrixXd& batch, ForwardTrace& trace) {
  if (static_cast<std::size_t>(batch.rows()) != net.input_dim()) {
    throw std::invalid_argument("network input has " + std::to_string(batch.rows()) +
                                " rows, expected " + std::to_string(net.input_dim()));
  }
  trace.pre.clear();
  trace.post.clear();
  trace.post.push_back(batch);
  for (const auto& l : net.layers) {
    Eigen::MatrixXd pre = l.weight * trace.post.back();
    pre.colwise() += l.bias;
    trace.post.push_back(activate(l.activation, pre));
    trace.pre.push_back(std::move(pre));
  }
  return trace.post.back();
}

NetworkGrad zero_grad(const Network& net) {
  NetworkGrad g;
  g.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                 Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Eigen::MatrixXd backward(const Network& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& d_output, NetworkGrad& grads) {
  Eigen::MatrixXd delta = d_output;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    delta = delta.cwiseProduct(derivative(l.activation, trace.pre[i], trace.post[i + 1]));
    grads[i].weight.noalias() += delta * trace.post[i].transpose();
    grads[i].bias += delta.rowwise().sum();
    delta = l.weight.transpose() * delta;
  }
  return delta;
}

std::vector<std::span<double>> parameter_blocks(Network& net) {
  std::vector<std::span<double>> out;
  for (auto& l : net.layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> parameter_blocks(const Network& net) {
  std::vector<std::span<const double>> out;
  for (const auto& l : net.layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> gradient_blocks(const NetworkGrad& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& g : grads) {
    out.emplace_back(g.weight.data(), static_cast<std::size_t>(g.weight.size()));
    out.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
  }
  return out;
}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, double lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient block count mismatch");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw std::invalid_argument("adam: state block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size()) {
      throw std::invalid_argument("adam: block " + std::to_string(b) + " shape mismatch");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    const auto& g = grads[b];
    auto& p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

double lr_schedule(int epoch, double lr0, double decay) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return lr0 * std::pow(decay, epoch);
}

// --- Encoder Jacobian -------------------------------------------------------

namespace {

struct JacobianParts {
  std::vector<Eigen::VectorXd> masks;  // activation derivative per layer
  std::vector<Eigen::MatrixXd> left;   // A_k: latent x out_k
  Eigen::MatrixXd jacobian;            // latent x input
};

// J = A_k W_k B_k for every k, where A_k collects everything above layer k
// (including its own derivative mask) and B_k everything below it.
JacobianParts jacobian_parts(const Network& encoder, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != encoder.input_dim()) {
    throw std::invalid_argument("encoder input dimension mismatch");
  }
  const std::size_t n = encoder.layers.size();
  JacobianParts parts;
  parts.masks.resize(n);
  Eigen::VectorXd h = x;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& l = encoder.layers[k];
    Eigen::VectorXd pre = l.weight * h + l.bias;
    parts.masks[k] = derivative_vec(l.activation, pre);
    h = activate(l.activation, Eigen::MatrixXd(pre)).col(0);
  }
  parts.left.resize(n);
  parts.left[n - 1] = parts.masks[n - 1].asDiagonal();
  for (std::size_t k = n - 1; k-- > 0;) {
    parts.left[k] = (parts.left[k + 1] * encoder.layers[k + 1].weight) * parts.masks[k].asDiagonal();
  }
  parts.jacobian = parts.left[0] * encoder.layers[0].weight;
  return parts;
}

}  // namespace

Eigen::MatrixXd encoder_jacobian(const Network& encoder, const Eigen::VectorXd& x) {
  return jacobian_parts(encoder, x).jacobian;
}

double encoder_jacobian_frobenius_sq(const Network& encoder, const Eigen::VectorXd& x) {
  return jacobian_parts(encoder, x).jacobian.squaredNorm();
}

double accumulate_jacobian_penalty_grad(const Network& encoder, const Eigen::VectorXd& x,
                                        double scale, NetworkGrad& grads) {
  for (const auto& l : encoder.layers) {
    if (l.activation != Activation::relu && l.activation != Activation::linear) {
      throw std::invalid_argument("contractive penalty gradient requires relu/linear encoder layers");
    }
  }
  const JacobianParts parts = jacobian_parts(encoder, x);
  // C_0 = J; C_{k+1} = C_k W_k^T diag(mask_k); dP/dW_k = 2 A_k^T C_k.
  Eigen::MatrixXd carry = parts.jacobian;
  for (std::size_t k = 0; k < encoder.layers.size(); ++k) {
    grads[k].weight.noalias() += (2.0 * scale) * (parts.left[k].transpose() * carry);
    if (k + 1 < encoder.layers.size()) {
      carry = (carry * encoder.layers[k].weight.transpose()) * parts.masks[k].asDiagonal();
    }
  }
  return parts.jacobian.squaredNorm();
}

double accumulate_jacobian_penalty_grad_batch(const Network& encoder, const Eigen::MatrixXd& batch, double scale,
                                              NetworkGrad& grads) {
  for (const auto& l : encoder.layers) {
    if (l.activation != Activation::relu && l.activation != Activation::linear) {
      throw std::invalid_argument("contractive penalty gradient requires relu/linear encoder layers");
    }
  }
  const std::size_t n_layers = encoder.layers.size();
  const Eigen::Index n = batch.cols();
  const auto latent = static_cast<Eigen::Index>(encoder.output_dim());
  if (n == 0) return 0.0;
  ForwardTrace trace;
  forward(encoder, batch, trace);
  std::vector<Eigen::MatrixXd> masks(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    masks[k] = derivative(encoder.layers[k].activation, trace.pre[k], trace.post[k + 1]);
  }
  // Per-sample blocks of `latent` rows, stacked over the batch.
  auto scale_blocks = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& mask) {
    for (Eigen::Index s = 0; s < n; ++s) {
      m.middleRows(s * latent, latent).array().rowwise() *= mask.col(s).transpose().array();
    }
  };
  std::vector<Eigen::MatrixXd> left(n_layers);
  left[n_layers - 1] = Eigen::MatrixXd::Zero(n * latent, latent);
  for (Eigen::Index s = 0; s < n; ++s) {
    left[n_layers - 1].block(s * latent, 0, latent, latent) = masks[n_layers - 1].col(s).asDiagonal();
  }
  for (std::size_t k = n_layers - 1; k-- > 0;) {
    left[k].noalias() = left[k + 1] * encoder.layers[k + 1].weight;
    scale_blocks(left[k], masks[k]);
  }
  Eigen::MatrixXd carry = left[0] * encoder.layers[0].weight;
  const double penalty = carry.squaredNorm();
  for (std::size_t k = 0; k < n_layers; ++k) {
    grads[k].weight.noalias() += (2.0 * scale) * (left[k].transpose() * carry);
    if (k + 1 < n_layers) {
      Eigen::MatrixXd next = carry * encoder.layers[k].weight.transpose();
      scale_blocks(next, masks[k]);
      carry = std::move(next);
    }
  }
  return penalty;
}

// --- Bundle -----------------------------------------------------------------

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::proposed: return "proposed";
    case Regime::baseline1: return "baseline1";
    case Regime::baseline2: return "baseline2";
    case Regime::invalid_only: return "invalid_only";
  }
  return "unknown";
}

Regime regime_from_string(std::string_view s) {
  if (s == "proposed") return Regime::proposed;
  if (s == "baseline1") return Regime::baseline1;
  if (s == "baseline2") return Regime::baseline2;
  if (s == "invalid_only") return Regime::invalid_only;
  throw ConfigError("unknown regime '" + std::string(s) + "'");
}

void ModelBundle::validate() const {
  if (encoder.empty() || decoder.empty()) throw ModelError("bundle needs an encoder and a decoder");
  if (decoder.input_dim() != encoder.output_dim()) throw ModelError("decoder input must equal latent dimension");
  if (decoder.output_dim() != encoder.input_dim()) throw ModelError("decoder output must equal encoder input");
  if (!classifier.empty()) {
    if (classifier.input_dim() != encoder.output_dim()) throw ModelError("classifier input must equal latent dimension");
    if (classifier.output_dim() != 1) throw ModelError("classifier must produce one probability");
  }
  if (regime != Regime::baseline1 && classifier.empty()) {
    throw ModelError(std::string("regime ") + std::string(to_string(regime)) + " requires a classifier");
  }
}

Architecture paper_architecture() {
  return {{100, 512, 256, 128, 64, 11}, {11, 64, 128, 256, 512, 100}, true};
}

ModelBundle make_bundle(const Architecture& arch, Regime regime, std::uint64_t seed) {
  if (arch.encoder_dims.size() < 2 || arch.decoder_dims.size() < 2) {
    throw std::invalid_argument("architecture needs at least one encoder and one decoder layer");
  }
  std::vector<LayerSpec> enc, dec;
  for (std::size_t i = 0; i + 1 < arch.encoder_dims.size(); ++i) {
    enc.push_back({arch.encoder_dims[i], arch.encoder_dims[i + 1], Activation::relu});
  }
  for (std::size_t i = 0; i + 1 < arch.decoder_dims.size(); ++i) {
    const bool last = i + 2 == arch.decoder_dims.size();
    dec.push_back({arch.decoder_dims[i], arch.decoder_dims[i + 1], last ? Activation::scaled_tanh : Activation::relu});
  }
  ModelBundle b;
  b.regime = regime;
  b.encoder = xavier_init(enc, derive_seed(seed, 1));
  b.decoder = xavier_init(dec, derive_seed(seed, 2));
  if (arch.with_classifier && regime != Regime::baseline1) {
    const LayerSpec cls{arch.encoder_dims.back(), 1, Activation::sigmoid};
    b.classifier = xavier_init(std::span(&cls, 1), derive_seed(seed, 3));
  }
  b.validate();
  return b;
}

ForwardResult forward(const ModelBundle& bundle, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != bundle.input_dim()) {
    throw std::invalid_argument("input has length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(bundle.input_dim()));
  }
  ForwardResult r;
  r.z = bundle.encoder.forward(x);
  r.x_hat = bundle.decoder.forward(r.z);
  if (bundle.has_classifier()) r.y_hat = bundle.classifier.forward(r.z)(0);
  return r;
}

Eigen::MatrixXd encode_rows(const Network& encoder, const Eigen::MatrixXd& batch) {
  return encoder.forward(batch).transpose();
}

BundleGrad zero_grad(const ModelBundle& bundle) {
  return {zero_grad(bundle.encoder), zero_grad(bundle.decoder), zero_grad(bundle.classifier)};
}

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

bool clamp_active(double p) { return p <= kProbabilityClamp || p >= 1.0 - kProbabilityClamp; }

// Which cross-entropy terms each regime keeps.
bool uses_positive_term(Regime r) { return r == Regime::proposed || r == Regime::baseline2; }
bool uses_negative_term(Regime r) { return r == Regime::baseline2 || r == Regime::invalid_only; }

LossBreakdown run_loss(const ModelBundle& bundle, const Eigen::MatrixXd& batch,
                       std::span<const int> labels, const LossSpec& spec, BundleGrad* grads) {
  const Eigen::Index n = batch.cols();
  if (n == 0) throw std::invalid_argument("empty batch");
  if (static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("label count mismatch");
  if (static_cast<std::size_t>(batch.rows()) != bundle.input_dim()) throw std::invalid_argument("input dimension mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);

  ForwardTrace enc_trace, dec_trace;
  const Eigen::MatrixXd z = forward(bundle.encoder, batch, enc_trace);
  const Eigen::MatrixXd x_hat = forward(bundle.decoder, z, dec_trace);
  const Eigen::MatrixXd diff = x_hat - batch;

  LossBreakdown out;
  out.reconstruction = diff.squaredNorm() * inv_n;

  Eigen::MatrixXd d_z;
  if (grads) d_z = backward(bundle.decoder, dec_trace, (2.0 * inv_n) * diff, grads->decoder);

  const bool classify = spec.regime != Regime::baseline1;
  if (classify) {
    if (!bundle.has_classifier()) throw ModelError("regime requires a classifier");
    ForwardTrace cls_trace;
    const Eigen::MatrixXd y_hat = forward(bundle.classifier, z, cls_trace);
    Eigen::MatrixXd d_yhat = Eigen::MatrixXd::Zero(1, n);
    bool any_active = false;
    double cls_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      const double p = y_hat(0, i);
      const double pc = clamp_probability(p);
      if (y == 1 && uses_positive_term(spec.regime)) {
        cls_sum -= std::log(pc);
        if (!clamp_active(p)) {
          d_yhat(0, i) = -inv_n / pc;
          any_active = true;
        }
      } else if (y == 0 && uses_negative_term(spec.regime)) {
        cls_sum -= std::log(1.0 - pc);
        if (!clamp_active(p)) {
          d_yhat(0, i) = inv_n / (1.0 - pc);
          any_active = true;
        }
      }
    }
    out.classification = cls_sum * inv_n;
    // Samples excluded by the regime contribute nothing, not even a zero-valued
    // pass through the classifier.
    if (grads && any_active) d_z += backward(bundle.classifier, cls_trace, d_yhat, grads->classifier);
  }

  if (spec.regime == Regime::baseline1 && spec.lambda_contractive != 0.0) {
    double penalty = 0.0;
    if (grads) {
      penalty = accumulate_jacobian_penalty_grad_batch(bundle.encoder, batch, spec.lambda_contractive * inv_n,
                                                       grads->encoder);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) penalty += encoder_jacobian_frobenius_sq(bundle.encoder, batch.col(i));
    }
    out.contractive = spec.lambda_contractive * penalty * inv_n;
  }

  if (grads) backward(bundle.encoder, enc_trace, d_z, grads->encoder);
  out.total = out.reconstruction + out.classification + out.contractive;
  return out;
}

}  // namespace

LossBreakdown evaluate_loss(const ModelBundle& bundle, const Eigen::MatrixXd& batch,
                            std::span<const int> labels, const LossSpec& spec) {
  return run_loss(bundle, batch, labels, spec, nullptr);
}

LossBreakdown backward(const ModelBundle& bundle, const Eigen::MatrixXd& batch,
                       std::span<const int> labels, const LossSpec& spec, BundleGrad& grads) {
  return run_loss(bundle, batch, labels, spec, &grads);
}

std::vector<std::span<double>> parameter_blocks(ModelBundle& bundle) {
  auto out = parameter_blocks(bundle.encoder);
  for (auto s : parameter_blocks(bundle.decoder)) out.push_back(s);
  for (auto s : parameter_blocks(bundle.classifier)) out.push_back(s);
  return out;
}

std::vector<std::span<const double>> gradient_blocks(const BundleGrad& grads) {
  auto out = gradient_blocks(grads.encoder);
  for (auto s : gradient_blocks(grads.decoder)) out.push_back(s);
  for (auto s : gradient_blocks(grads.classifier)) out.push_back(s);
  return out;
}

}  // namespace sirep
