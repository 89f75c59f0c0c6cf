#include "sirep/training.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace sirep {

void TrainingConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (decay_every_epochs < 1) throw ConfigError("decay_every_epochs must be >= 1");
  if (!(lambda_contractive >= 0.0)) throw ConfigError("lambda_contractive must be >= 0");
  const auto& a = architecture;
  if (a.encoder_dims.size() < 2 || a.decoder_dims.size() < 2) throw ConfigError("architecture needs >= 1 layer per network");
  if (a.encoder_dims.front() != a.decoder_dims.back() || a.encoder_dims.back() != a.decoder_dims.front()) {
    throw ConfigError("decoder dims must mirror the encoder's input and latent sizes");
  }
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    if (j.contains("regime")) c.regime = regime_from_string(j.at("regime").get<std::string>());
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr0 = j.value("lr0", c.lr0);
    c.decay = j.value("decay", c.decay);
    c.decay_every_epochs = j.value("decay_every_epochs", c.decay_every_epochs);
    c.lambda_contractive = j.value("lambda_contractive", c.lambda_contractive);
    c.seed = j.value("seed", c.seed);
    if (j.contains("architecture")) {
      const auto& a = j.at("architecture");
      c.architecture.encoder_dims = a.at("encoder").get<std::vector<std::size_t>>();
      c.architecture.decoder_dims = a.at("decoder").get<std::vector<std::size_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"regime", std::string(to_string(c.regime))},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr0", c.lr0},
          {"decay", c.decay},
          {"decay_every_epochs", c.decay_every_epochs},
          {"lambda_contractive", c.lambda_contractive},
          {"seed", c.seed},
          {"architecture", {{"encoder", c.architecture.encoder_dims}, {"decoder", c.architecture.decoder_dims}}}};
}

// --- Scalar losses --------------------------------------------------------------

namespace {

double clamped(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

}  // namespace

double reconstruction_error(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) throw std::invalid_argument("x and x_hat differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
  return s;
}

double loss_proposed(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat) {
  const double r = reconstruction_error(x, x_hat);
  return y == 1 ? r - std::log(clamped(y_hat)) : r;
}

double loss_baseline1(std::span<const double> x, std::span<const double> x_hat, double jacobian_fro_sq,
                      double lambda) {
  return reconstruction_error(x, x_hat) + lambda * jacobian_fro_sq;
}

double loss_baseline2(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat) {
  const double r = reconstruction_error(x, x_hat);
  return y == 1 ? r - std::log(clamped(y_hat)) : r - std::log(1.0 - clamped(y_hat));
}

double loss_invalid_only(std::span<const double> x, std::span<const double> x_hat, int y, double y_hat) {
  const double r = reconstruction_error(x, x_hat);
  return y == 0 ? r - std::log(1.0 - clamped(y_hat)) : r;
}

// --- Training loop --------------------------------------------------------------

Eigen::MatrixXd segment_matrix(std::span<const SegmentSample> samples) {
  if (samples.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(samples.front().x.size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].x.size()) != dim) throw DataError("segments differ in length");
    m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(samples[i].x.data(), dim);
  }
  return m;
}

std::vector<int> segment_labels(std::span<const SegmentSample> samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.y);
  return y;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed ^ static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

LossBreakdown train_step(ModelBundle& bundle, AdamState& adam, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, const LossSpec& spec, double lr) {
  BundleGrad grads = zero_grad(bundle);
  const LossBreakdown loss = backward(bundle, batch, labels, spec, grads);
  const auto params = parameter_blocks(bundle);
  const auto g = gradient_blocks(grads);
  adam_step(adam, params, g, lr);
  return loss;
}

std::vector<EpochLog> train_bundle(ModelBundle& bundle, const Eigen::MatrixXd& data, std::span<const int> labels,
                                   const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto n = static_cast<std::size_t>(data.cols());
  if (n == 0) throw DataError("training set is empty");
  if (labels.size() != n) throw DataError("label count does not match the training set");
  const auto valid = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (config.regime == Regime::proposed && valid == 0) throw DataError("proposed regime needs valid samples");
  if (config.regime == Regime::invalid_only && valid == n) throw DataError("invalid_only regime needs invalid samples");

  const LossSpec spec{config.regime, config.lambda_contractive};
  AdamState adam;
  std::vector<EpochLog> log;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  Eigen::MatrixXd batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch / config.decay_every_epochs, config.lr0, config.decay);
    const auto perm = epoch_permutation(n, config.seed, epoch);
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = lr;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      batch.resize(data.rows(), static_cast<Eigen::Index>(m));
      batch_labels.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        batch.col(static_cast<Eigen::Index>(i)) = data.col(static_cast<Eigen::Index>(perm[start + i]));
        batch_labels[i] = labels[perm[start + i]];
      }
      const LossBreakdown loss = train_step(bundle, adam, batch, batch_labels, spec, lr);
      const auto w = static_cast<double>(m);
      entry.total += loss.total * w;
      entry.reconstruction += loss.reconstruction * w;
      entry.classification += loss.classification * w;
      entry.contractive += loss.contractive * w;
    }
    const double inv = 1.0 / static_cast<double>(n);
    entry.total *= inv;
    entry.reconstruction *= inv;
    entry.classification *= inv;
    entry.contractive *= inv;
    if (!std::isfinite(entry.total)) throw ModelError("training diverged at epoch " + std::to_string(epoch));
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  bundle.meta = {config.epochs,       config.batch_size,         config.lr0,
                 config.decay,        config.decay_every_epochs, config.lambda_contractive,
                 config.seed};
  return log;
}

TrainingResult train(std::span<const SegmentSample> samples, const TrainingConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (samples.empty()) throw DataError("training set is empty");
  TrainingResult r;
  r.bundle = make_bundle(config.architecture, config.regime, config.seed);
  const Eigen::MatrixXd data = segment_matrix(samples);
  if (static_cast<std::size_t>(data.rows()) != r.bundle.input_dim()) {
    throw DataError("segment length does not match the encoder input");
  }
  const auto labels = segment_labels(samples);
  r.log = train_bundle(r.bundle, data, labels, config, on_epoch);
  return r;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write training log '" + path + "'");
  out << "epoch,lr,mean_total_loss,mean_recon_loss,mean_cls_loss\n";
  out.precision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.lr << ',' << e.total << ',' << e.reconstruction << ',' << e.classification << '\n';
  }
}

}  // namespace sirep
