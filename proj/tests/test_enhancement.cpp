#include <doctest.h>

#include "sirep/enhancement.hpp"
#include "sirep/errors.hpp"
#include "sirep/rng.hpp"
#include "toy.hpp"

#include <cmath>

using namespace sirep;

namespace {

// Encoder that ignores its input and emits `z` (zero weights, bias z).
Network constant_encoder(const Eigen::VectorXd& z, std::size_t in = 100) {
  Network n;
  n.layers.push_back({Eigen::MatrixXd::Zero(z.size(), static_cast<Eigen::Index>(in)), z, Activation::relu});
  return n;
}

Network linear_decoder(const Eigen::MatrixXd& w) {
  Network n;
  n.layers.push_back({w, Eigen::VectorXd::Zero(w.rows()), Activation::linear});
  return n;
}

SignalEnhancement with_pct(double pct) {
  SignalEnhancement s;
  s.has_pct = true;
  s.pct_improvement = pct;
  return s;
}

}  // namespace

TEST_CASE("dissimilarity examples") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(100, -0.5, 0.5);
  CHECK(dissimilarity(x, x) == 0.0);
  CHECK(dissimilarity(x, (x.array() + 0.3).matrix()) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(dissimilarity(x, (x.array() - 0.7).matrix()) == doctest::Approx(0.7).epsilon(1e-12));
  Eigen::VectorXd y = x;
  y(17) += 1.0;
  CHECK(dissimilarity(x, y) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(dissimilarity(x, Eigen::VectorXd::Zero(99)), DataError);
}

TEST_CASE("SI metric") {
  Eigen::VectorXd z(11);
  z << 0.1, 0.2, 0.0, 0.4, 0.5, 0.0, 0.7, 0.8, 0.9, 1.0, 1.1;
  const Network e = constant_encoder(z);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(100);
  CHECK(si_metric(e, x, z) == 0.0);
  const ModelBundle b = make_bundle(paper_architecture(), Regime::proposed, 2);
  const Eigen::MatrixXd xs = toy::batch(100, 20, 4);
  for (Eigen::Index i = 0; i < xs.cols(); ++i) CHECK(si_metric(b.encoder, xs.col(i), z) >= 0.0);
  CHECK_THROWS_AS(si_metric(e, Eigen::VectorXd::Zero(90), z), DataError);
}

TEST_CASE("decoder Lipschitz estimate") {
  const Eigen::MatrixXd w = toy::batch(100, 11, 3);
  const Network lin = linear_decoder(w);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  CHECK(decoder_lipschitz_estimate(lin) == doctest::Approx(svd.singularValues()(0) / 10.0).epsilon(1e-12));

  const ModelBundle b = make_bundle(paper_architecture(), Regime::proposed, 5);
  const double l = decoder_lipschitz_estimate(b.decoder);
  Network doubled = b.decoder;
  doubled.layers[1].weight *= 2.0;
  CHECK(decoder_lipschitz_estimate(doubled) == doctest::Approx(2.0 * l).epsilon(1e-12));

  Rng rng = make_rng(8, 0);
  Eigen::MatrixXd z1(11, 10000), z2(11, 10000);
  for (Eigen::Index i = 0; i < z1.size(); ++i) {
    z1(i) = uniform01(rng);
    z2(i) = uniform01(rng);
  }
  const Eigen::MatrixXd d1 = b.decoder.forward(z1), d2 = b.decoder.forward(z2);
  int violations = 0;
  for (Eigen::Index i = 0; i < z1.cols(); ++i) {
    if (dissimilarity(d1.col(i), d2.col(i)) > l * (z1.col(i) - z2.col(i)).norm()) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("interpolation step count") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(11);
  z(0) = 1.0;
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(11);
  const Network e = constant_encoder(z);
  const Network d = linear_decoder(Eigen::MatrixXd::Zero(100, 11));
  const EnhancementResult r = enhance(Eigen::VectorXd::Zero(100), c, e, d, 0.05, 10.0);
  CHECK(r.m == 200);
  CHECK(r.steps_taken == 201);  // every interpolant decodes to 0
  CHECK(r.sigma_after == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.sigma_before == 1.0);

  // latent already at the anchor
  const EnhancementResult same = enhance(Eigen::VectorXd::Zero(100), z, e, d, 0.05, 10.0);
  CHECK(same.m == 1);
  CHECK(same.sigma_after == 0.0);
  CHECK_FALSE(same.unchanged);
  const EnhancementResult rejected = enhance(Eigen::VectorXd::Constant(100, 0.2), z, e, d, 0.05, 10.0);
  CHECK(rejected.unchanged);
  CHECK(rejected.x_enhanced == Eigen::VectorXd::Constant(100, 0.2));

  CHECK_THROWS_AS(enhance(Eigen::VectorXd::Zero(100), c, e, d, 0.0, 10.0), ConfigError);
}

TEST_CASE("alpha from the training RMSE") {
  CHECK(alpha_from_rmse(0.0428) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(alpha_from_rmse(0.012) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(alpha_from_rmse(0.05) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(alpha_from_rmse(0.0500001) == doctest::Approx(0.06).epsilon(1e-12));
  CHECK_THROWS_AS(alpha_from_rmse(-1.0), DataError);

  const Eigen::VectorXd z = Eigen::VectorXd::Zero(11);
  const Network e = constant_encoder(z);
  const Network d = linear_decoder(Eigen::MatrixXd::Zero(100, 11));
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(100, 3);
  data(0, 1) = 0.428;  // RMSE 0.0428
  CHECK(max_reconstruction_rmse(e, d, data) == doctest::Approx(0.0428).epsilon(1e-12));
  CHECK(choose_alpha(e, d, data) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("enhancement invariants on an untrained bundle") {
  const ModelBundle b = make_bundle(paper_architecture(), Regime::proposed, 6);
  const double l = decoder_lipschitz_estimate(b.decoder);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(11);
  c(2) = 0.3;
  const Eigen::MatrixXd xs = 0.5 * toy::batch(100, 40, 9);
  int changed = 0;
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    const Eigen::VectorXd x = xs.col(i);
    for (double alpha : {0.3, 0.6}) {
      const EnhancementResult r = enhance(x, c, b.encoder, b.decoder, alpha, l);
      CHECK(r.sigma_after <= r.sigma_before + 1e-12);
      if (r.unchanged) {
        CHECK(r.x_enhanced == x);
        continue;
      }
      ++changed;
      CHECK(dissimilarity(x, r.x_enhanced) < alpha);
      const double t = static_cast<double>(r.steps_taken - 1) / static_cast<double>(r.m);
      CHECK(std::abs(r.sigma_after - (1.0 - t) * r.sigma_before) < 1e-9);

      const EnhancementResult again = enhance(r.x_enhanced, c, b.encoder, b.decoder, alpha, l);
      if (!again.unchanged) CHECK(dissimilarity(r.x_enhanced, again.x_enhanced) < alpha);
    }
  }
  CHECK(changed > 0);
}

TEST_CASE("signal-level enhancement and summary statistics") {
  const ModelBundle b = make_bundle(paper_architecture(), Regime::proposed, 7);
  const auto bits = prbs_generate(15, 0x2A, 103);
  const Waveform w = synthesize_waveform(bits, preset_by_name("case2"), 3);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(11, 0.1);
  std::vector<EnhancementResult> segs;
  const SignalEnhancement s = enhance_waveform(w, c, b.encoder, b.decoder, 0.5, decoder_lipschitz_estimate(b.decoder), &segs);
  CHECK(segs.size() == 100);
  CHECK(s.enhanced.samples.size() == w.samples.size());
  CHECK(s.max_d < 0.5);
  CHECK(s.has_pct == (s.window_before.area_mvps() > 0.0));

  std::vector<SignalEnhancement> sig{with_pct(10.0), with_pct(-2.0), with_pct(4.0), with_pct(8.0), SignalEnhancement{}};
  const ImprovementSummary sum = summarize_improvement(sig);
  CHECK(sum.n_signals == 5);
  CHECK(sum.n_with_pct == 4);
  CHECK(sum.mean == doctest::Approx(5.0));
  CHECK(sum.median == doctest::Approx(6.0));
  CHECK(sum.min == -2.0);
  CHECK(sum.max == 10.0);
  CHECK(sum.std == doctest::Approx(std::sqrt((25.0 + 49.0 + 1.0 + 9.0) / 3.0)));
  for (const char* k : {"mean", "std", "max", "min", "median"}) CHECK(to_json(sum).contains(k));
}

TEST_CASE("least-squares line") {
  const std::vector<double> s{1.0, 2.0}, w{2.0, 1.0};
  const LineFit f = least_squares_line(s, w);
  CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));
  const std::vector<double> x{0.0, 1.0, 2.0, 5.0}, flat(4, 7.0);
  CHECK(least_squares_line(x, flat).slope == 0.0);
  CHECK(least_squares_line(x, flat).intercept == doctest::Approx(7.0));
  CHECK_THROWS_AS(least_squares_line(flat, x), DataError);

  const ModelBundle b = make_bundle(paper_architecture(), Regime::proposed, 1);
  std::vector<Waveform> few(3);
  CHECK_THROWS_AS(si_slope_analysis(b.encoder, Eigen::VectorXd::Zero(11), few), DataError);
}
