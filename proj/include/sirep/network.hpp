#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sirep {

enum class Activation { relu, sigmoid, scaled_tanh, linear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Lipschitz constant of the activation (relu 1, sigmoid 1/4, 1.5*tanh 1.5).
double activation_lipschitz(Activation a);

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out_dim x in_dim
  Eigen::VectorXd bias;    // out_dim
  Activation activation = Activation::relu;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// A plain feed-forward stack. Batches are column-major: one sample per column.
struct Network {
  std::vector<DenseLayer> layers;

  bool empty() const { return layers.empty(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  std::vector<LayerSpec> specs() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& batch) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
};

/// Xavier-uniform weights in +-sqrt(6/(in+out)), zero biases.
Network xavier_init(std::span<const LayerSpec> spec, std::uint64_t seed);

/// Pre- and post-activation values kept for the reverse pass.
/// post[0] is the network input, post[i+1] is the output of layer i.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

Eigen::MatrixXd forward(const Network& net, const Eigen::MatrixXd& batch, ForwardTrace& trace);

struct LayerGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

using NetworkGrad = std::vector<LayerGrad>;

NetworkGrad zero_grad(const Network& net);

/// Reverse pass: accumulates parameter gradients into `grads` and returns the
/// gradient with respect to the network input.
Eigen::MatrixXd backward(const Network& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& d_output, NetworkGrad& grads);

// --- Parameter views ----------------------------------------------------

std::vector<std::span<double>> parameter_blocks(Network& net);
std::vector<std::span<const double>> parameter_blocks(const Network& net);
std::vector<std::span<const double>> gradient_blocks(const NetworkGrad& grads);

// --- Adam ---------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Bias-corrected Adam update. Moment buffers are allocated on the first call
/// and must keep matching the block shapes afterwards.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, double lr);

/// lr0 * decay^epoch.
double lr_schedule(int epoch, double lr0 = 0.05, double decay = 0.75);

// --- Encoder Jacobian -----------------------------------------------------

/// Full d z / d x matrix (latent_dim x input_dim) at x.
Eigen::MatrixXd encoder_jacobian(const Network& encoder, const Eigen::VectorXd& x);

/// ||J_e(x)||_F^2 computed from masked weight products.
double encoder_jacobian_frobenius_sq(const Network& encoder, const Eigen::VectorXd& x);

/// Adds scale * d||J_e(x)||_F^2 / d(params) into grads. Only piecewise-linear
/// activations (relu, linear) are supported; their derivative masks are locally
/// constant so bias gradients vanish.
double accumulate_jacobian_penalty_grad(const Network& encoder, const Eigen::VectorXd& x,
                                        double scale, NetworkGrad& grads);

/// Batched form of the above over the columns of `batch`; returns the summed
/// penalty. The per-sample products are stacked into single matrix products.
double accumulate_jacobian_penalty_grad_batch(const Network& encoder, const Eigen::MatrixXd& batch, double scale,
                                              NetworkGrad& grads);

// --- Model bundle -------------------------------------------------------------

enum class Regime { proposed, baseline1, baseline2, invalid_only };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

struct TrainingMeta {
  int epochs = 0;
  int batch_size = 0;
  double lr0 = 0.0;
  double decay = 0.0;
  int decay_every_epochs = 1;
  double lambda_contractive = 0.0;
  std::uint64_t seed = 0;
};

struct AnchorInfo {
  std::vector<double> point;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ModelBundle {
  Network encoder;
  Network decoder;
  Network classifier;  // empty for baseline1
  Regime regime = Regime::proposed;
  TrainingMeta meta;
  std::optional<AnchorInfo> anchor;

  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t latent_dim() const { return encoder.output_dim(); }
  bool has_classifier() const { return !classifier.empty(); }

  /// Throws ModelError when the encoder/decoder/classifier dimensions disagree.
  void validate() const;
};

struct Architecture {
  std::vector<std::size_t> encoder_dims;  // input .. latent
  std::vector<std::size_t> decoder_dims;  // latent .. input
  bool with_classifier = true;
};

/// 100-512-256-128-64-11 encoder, mirrored decoder with 1.5*tanh output,
/// 11-1 sigmoid classifier.
Architecture paper_architecture();

ModelBundle make_bundle(const Architecture& arch, Regime regime, std::uint64_t seed);

struct ForwardResult {
  Eigen::VectorXd z;
  Eigen::VectorXd x_hat;
  double y_hat = 0.5;  // 0.5 when the bundle has no classifier
};

ForwardResult forward(const ModelBundle& bundle, const Eigen::VectorXd& x);

/// Encodes a batch (columns are samples) and returns latents as rows.
Eigen::MatrixXd encode_rows(const Network& encoder, const Eigen::MatrixXd& batch);

// --- Losses and gradients -------------------------------------------------------

inline constexpr double kProbabilityClamp = 1e-12;

struct LossSpec {
  Regime regime = Regime::proposed;
  double lambda_contractive = 1e-4;
};

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;
  double classification = 0.0;
  double contractive = 0.0;
};

struct BundleGrad {
  NetworkGrad encoder;
  NetworkGrad decoder;
  NetworkGrad classifier;
};

BundleGrad zero_grad(const ModelBundle& bundle);

/// Batch-mean loss of the regime. `labels` holds 0/1 per column of `batch`.
LossBreakdown evaluate_loss(const ModelBundle& bundle, const Eigen::MatrixXd& batch,
                            std::span<const int> labels, const LossSpec& spec);

/// Same loss plus exact reverse-mode gradients (accumulated into `grads`).
LossBreakdown backward(const ModelBundle& bundle, const Eigen::MatrixXd& batch,
                       std::span<const int> labels, const LossSpec& spec, BundleGrad& grads);

std::vector<std::span<double>> parameter_blocks(ModelBundle& bundle);
std::vector<std::span<const double>> gradient_blocks(const BundleGrad& grads);

// --- Persistence --------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Writes the binary container at `path` and the JSON sidecar at
/// `path + ".json"`.
void save_model(const ModelBundle& bundle, const std::string& path);

/// Throws CorruptModelError or ModelVersionError on a bad container.
ModelBundle load_model(const std::string& path);

}  // namespace sirep
