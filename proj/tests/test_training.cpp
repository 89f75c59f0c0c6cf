#include <doctest.h>

#include "sirep/errors.hpp"
#include "sirep/training.hpp"
#include "toy.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace sirep;

namespace {

std::vector<double> constant(double v, std::size_t n = 100) { return std::vector<double>(n, v); }

// smooth random-phase sines so an autoencoder has something to learn
Eigen::MatrixXd sine_data(std::size_t dim, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 5);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double phase = 6.283185307179586 * uniform01(rng);
    const double amp = 0.3 + 0.4 * uniform01(rng);
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = amp * std::sin(phase + 0.4 * static_cast<double>(r));
  }
  return x;
}

std::vector<double> flatten(ModelBundle& b) {
  std::vector<double> out;
  for (auto blk : parameter_blocks(b)) out.insert(out.end(), blk.begin(), blk.end());
  return out;
}

std::vector<double> flatten(const Network& n) {
  std::vector<double> out;
  for (const auto& l : n.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TrainingConfig toy_config(Regime r, int epochs, std::size_t dim = 20) {
  TrainingConfig c;
  c.regime = r;
  c.epochs = epochs;
  c.batch_size = 25;
  c.lr0 = 0.003;
  c.seed = 11;
  c.architecture = {{dim, 16, 8, 4}, {4, 8, 16, dim}, true};
  return c;
}

}  // namespace

TEST_CASE("scalar loss examples") {
  const auto x = constant(0.0);
  auto off = constant(0.0);
  off[0] = 1.0;
  off[1] = 1.0;  // squared error 2
  CHECK(loss_proposed(x, off, 1, 0.5) == doctest::Approx(2.0 + std::log(2.0)).epsilon(1e-12));
  CHECK(loss_proposed(x, off, 1, 0.5) == doctest::Approx(2.6931).epsilon(1e-4));
  CHECK(loss_proposed(x, x, 1, 1.0 - 1e-12) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(loss_proposed(x, x, 1, 1.0 - 1e-12) < 1e-11);
  CHECK(loss_proposed(x, x, 0, 0.123) == 0.0);
  CHECK(loss_proposed(x, x, 0, 1.0) == 0.0);

  auto one = constant(0.0);
  one[5] = 1.0;
  CHECK(loss_baseline1(x, x, 0.0, 1e-4) == 0.0);
  CHECK(loss_baseline1(x, one, 100.0, 1e-4) == doctest::Approx(1.01).epsilon(1e-12));
  CHECK(loss_baseline1(x, one, 100.0, 0.0) == reconstruction_error(x, one));

  CHECK(loss_baseline2(x, x, 0, 0.5) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(loss_baseline2(x, off, 1, 0.37) == loss_proposed(x, off, 1, 0.37));
  CHECK(loss_baseline2(x, off, 0, 1e-15) == doctest::Approx(2.0).epsilon(1e-11));
  CHECK(std::isfinite(loss_baseline2(x, x, 0, 1.0)));

  CHECK(loss_invalid_only(x, off, 1, 0.01) == 2.0);
  CHECK(loss_invalid_only(x, x, 0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss_invalid_only(x, off, 0, 1e-15) == doctest::Approx(2.0).epsilon(1e-11));
}

TEST_CASE("batch loss agrees with the scalar losses") {
  const ModelBundle b = toy::bundle(Regime::baseline2, 2);
  const Eigen::MatrixXd x = toy::batch(8, 4, 3);
  const std::vector<int> y{1, 0, 0, 1};
  for (Regime r : {Regime::proposed, Regime::baseline2, Regime::invalid_only}) {
    double expect = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const ForwardResult f = forward(b, Eigen::VectorXd(x.col(i)));
      const Eigen::VectorXd xi = x.col(i);
      const std::span<const double> a(xi.data(), 8), h(f.x_hat.data(), 8);
      const int yi = y[static_cast<std::size_t>(i)];
      expect += r == Regime::proposed    ? loss_proposed(a, h, yi, f.y_hat)
                : r == Regime::baseline2 ? loss_baseline2(a, h, yi, f.y_hat)
                                         : loss_invalid_only(a, h, yi, f.y_hat);
    }
    CHECK(evaluate_loss(b, x, y, {r, 1e-4}).total == doctest::Approx(expect / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("gradient masking: all-invalid proposed step equals a reconstruction-only step") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ModelBundle start = make_bundle(paper_architecture(), Regime::proposed, seed);
    const Eigen::MatrixXd x = 0.5 * toy::batch(100, 100, seed + 10);
    const std::vector<int> y(100, 0);

    ModelBundle a = start;
    AdamState sa;
    const std::vector<double> cls_before = flatten(a.classifier);
    train_step(a, sa, x, y, {Regime::proposed, 1e-4}, 0.05);
    CHECK(bitwise_equal(flatten(a.classifier), cls_before));

    ModelBundle b = start;
    AdamState sb;
    train_step(b, sb, x, y, {Regime::baseline1, 0.0}, 0.05);
    CHECK(bitwise_equal(flatten(a.encoder), flatten(b.encoder)));
    CHECK(bitwise_equal(flatten(a.decoder), flatten(b.decoder)));
    CHECK_FALSE(bitwise_equal(flatten(a.encoder), flatten(start.encoder)));
  }
}

TEST_CASE("baseline2 and proposed coincide on all-valid data") {
  const Eigen::MatrixXd x = sine_data(20, 100, 4);
  const std::vector<int> y(100, 1);
  TrainingConfig cp = toy_config(Regime::proposed, 4);
  TrainingConfig cb = cp;
  cb.regime = Regime::baseline2;
  ModelBundle p = make_bundle(cp.architecture, Regime::proposed, cp.seed);
  ModelBundle b = make_bundle(cb.architecture, Regime::baseline2, cb.seed);
  REQUIRE(bitwise_equal(flatten(p), flatten(b)));
  const auto lp = train_bundle(p, x, y, cp);
  const auto lb = train_bundle(b, x, y, cb);
  CHECK(bitwise_equal(flatten(p), flatten(b)));
  for (std::size_t e = 0; e < lp.size(); ++e) CHECK(lp[e].total == lb[e].total);
}

TEST_CASE("reconstruction loss falls on a 200-sample toy set") {
  const Eigen::MatrixXd x = sine_data(20, 200, 7);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0 ? 0 : 1;
  TrainingConfig c = toy_config(Regime::proposed, 10);
  ModelBundle b = make_bundle(c.architecture, c.regime, c.seed);
  const auto log = train_bundle(b, x, y, c);
  REQUIRE(log.size() == 10);
  CHECK(log.back().reconstruction < log.front().reconstruction);
  CHECK(log[1].lr == doctest::Approx(0.003 * 0.75));
}

TEST_CASE("contractive penalty lowers the encoder Jacobian") {
  const Eigen::MatrixXd x = sine_data(20, 200, 8);
  const Eigen::MatrixXd probe = sine_data(20, 50, 9);
  const std::vector<int> y(200, 1);
  auto mean_jac = [&](double lambda) {
    TrainingConfig c = toy_config(Regime::baseline1, 15);
    c.lambda_contractive = lambda;
    ModelBundle b = make_bundle(c.architecture, c.regime, c.seed);
    train_bundle(b, x, y, c);
    double s = 0.0;
    for (Eigen::Index i = 0; i < probe.cols(); ++i) s += encoder_jacobian_frobenius_sq(b.encoder, probe.col(i));
    return s / static_cast<double>(probe.cols());
  };
  const double plain = mean_jac(0.0);
  const double contracted = mean_jac(1e-4);
  MESSAGE("mean ||J||^2: lambda 0 -> ", plain, ", lambda 1e-4 -> ", contracted);
  CHECK(contracted < plain);
}

TEST_CASE("training is deterministic per seed") {
  const Eigen::MatrixXd x = sine_data(20, 120, 2);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 4 == 0 ? 0 : 1;
  for (Regime r : {Regime::proposed, Regime::baseline1}) {
    TrainingConfig c = toy_config(r, 3);
    ModelBundle a = make_bundle(c.architecture, r, c.seed);
    ModelBundle b = make_bundle(c.architecture, r, c.seed);
    train_bundle(a, x, y, c);
    train_bundle(b, x, y, c);
    CHECK(bitwise_equal(flatten(a), flatten(b)));
  }
}

TEST_CASE("epoch permutation") {
  const auto p = epoch_permutation(500, 3, 0);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  CHECK(p == epoch_permutation(500, 3, 0));
  CHECK(p != epoch_permutation(500, 3, 1));
  CHECK(p != epoch_permutation(500, 4, 0));
}

TEST_CASE("training preconditions") {
  const Eigen::MatrixXd x = sine_data(20, 10, 1);
  const std::vector<int> invalid(10, 0), valid(10, 1);
  TrainingConfig c = toy_config(Regime::proposed, 1);
  ModelBundle b = make_bundle(c.architecture, c.regime, c.seed);
  CHECK_THROWS_AS(train_bundle(b, x, invalid, c), DataError);
  CHECK_THROWS_AS(train_bundle(b, Eigen::MatrixXd(20, 0), std::vector<int>{}, c), DataError);
  CHECK_THROWS_AS(train_bundle(b, x, std::vector<int>(3, 1), c), DataError);
  c.regime = Regime::invalid_only;
  CHECK_THROWS_AS(train_bundle(b, x, valid, c), DataError);
  c.regime = Regime::baseline1;
  CHECK_NOTHROW(train_bundle(b, x, valid, c));
  CHECK_THROWS_AS(train(std::vector<SegmentSample>{}, c), DataError);

  TrainingConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.lambda_contractive = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training config JSON round trip and log CSV") {
  TrainingConfig c = toy_config(Regime::baseline2, 7);
  c.decay_every_epochs = 3;
  const TrainingConfig d = training_config_from_json(to_json(c));
  CHECK(d.regime == Regime::baseline2);
  CHECK(d.epochs == 7);
  CHECK(d.batch_size == 25);
  CHECK(d.decay_every_epochs == 3);
  CHECK(d.architecture.encoder_dims == c.architecture.encoder_dims);
  CHECK_THROWS_AS(training_config_from_json(nlohmann::json{{"epochs", "many"}}), ConfigError);

  const std::string path = (std::filesystem::temp_directory_path() / "sirep_log_test.csv").string();
  write_training_log({{0, 0.05, 3.0, 2.0, 1.0, 0.0}, {1, 0.0375, 2.5, 1.8, 0.7, 0.0}}, path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "epoch,lr,mean_total_loss,mean_recon_loss,mean_cls_loss");
  CHECK(row.rfind("0,", 0) == 0);
  std::filesystem::remove(path);
}
