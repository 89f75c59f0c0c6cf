#pragma once

#include "sirep/network.hpp"
#include "sirep/waveform.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sirep {

struct TrainingConfig {
  Regime regime = Regime::proposed;
  int epochs = 100;
  int batch_size = 100;
  double lr0 = 0.003;
  double decay = 0.75;
  int decay_every_epochs = 1;  // lr = lr0 * decay^(epoch / decay_every_epochs)
  double lambda_contractive = 1e-4;
  std::uint64_t seed = 1;
  Architecture architecture = paper_architecture();

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

TrainingConfig training_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainingConfig& c);

// Per-sample scalar losses. Probabilities go through the same clamp as training.

double reconstruction_error(std::span<const double> x, std::span<const double> x_hat);
double loss_proposed(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat);
double loss_baseline1(std::span<const double> x, std::span<const double> x_hat, double jacobian_fro_sq,
                      double lambda);
double loss_baseline2(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat);
double loss_invalid_only(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double reconstruction = 0.0;
  double classification = 0.0;
  double contractive = 0.0;
};

struct TrainingResult {
  ModelBundle bundle;
  std::vector<EpochLog> log;
};

/// Samples as matrix columns.
Eigen::MatrixXd segment_matrix(std::span<const SegmentSample> samples);
std::vector<int> segment_labels(std::span<const SegmentSample> samples);

/// Fisher-Yates permutation of 0..n-1 seeded by seed ^ epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// One Adam update on a batch; gradients are recomputed from zero.
LossBreakdown train_step(ModelBundle& bundle, AdamState& adam, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, const LossSpec& spec, double lr);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains a freshly initialized bundle. Throws DataError on an empty set or
/// when the regime's classifier term has no samples to learn from.
TrainingResult train(std::span<const SegmentSample> samples, const TrainingConfig& config,
                     const EpochCallback& on_epoch = {});

/// Continues training an existing bundle (used by tests and the ablation).
std::vector<EpochLog> train_bundle(ModelBundle& bundle, const Eigen::MatrixXd& data, std::span<const int> labels,
                                   const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// CSV: epoch, lr, mean_total_loss, mean_recon_loss, mean_cls_loss.
void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace sirep
