#include <doctest.h>

#include "sirep/anchor.hpp"
#include "sirep/errors.hpp"
#include "sirep/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace sirep;

namespace {

Eigen::MatrixXd random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double spread = 1.0) {
  Rng rng = make_rng(seed, 21);
  Eigen::MatrixXd p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = spread * standard_normal(rng);
  return p;
}

}  // namespace

TEST_CASE("equilateral triangle gives its centroid") {
  Eigen::MatrixXd p(3, 2);
  p << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
  const AnchorResult r = fermat_weber(p, 1e-12);
  CHECK(r.c(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.c(1) == doctest::Approx(std::sqrt(3.0) / 6.0).epsilon(1e-9));
  CHECK(r.converged);
}

TEST_CASE("collinear points give the middle one") {
  Eigen::MatrixXd p(3, 1);
  p << 0.0, 1.0, 10.0;
  const AnchorResult r = fermat_weber(p, 1e-12);
  CHECK(r.c(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.objective == doctest::Approx(10.0).epsilon(1e-6));

  Eigen::MatrixXd q(3, 3);
  q << 0.0, 0.0, 0.0, 1.0, 2.0, -1.0, 10.0, 20.0, -10.0;
  const AnchorResult s = fermat_weber(q, 1e-12);
  CHECK((s.c - q.row(1).transpose()).norm() < 1e-6);
}

TEST_CASE("Weiszfeld matches a coordinate-descent oracle on random 11-dim sets") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Eigen::MatrixXd p = random_points(50, 11, seed);
    const AnchorResult r = fermat_weber(p, 1e-12);
    const double best = oracle::coordinate_descent_minimum(p);
    CHECK(r.objective <= best + 1e-6);
    CHECK(r.objective >= best - 1e-6);
    CHECK(r.objective == doctest::Approx(sum_of_distances(p, r.c)).epsilon(1e-12));
  }
}

TEST_CASE("Weiszfeld properties: monotone objective, optimality, equivariance") {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    const Eigen::MatrixXd p = random_points(80, 11, seed, 2.0);
    const AnchorResult r = fermat_weber(p, 1e-10);
    CHECK(r.objective >= 0.0);
    REQUIRE(r.history.size() >= 2);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] + 1e-12);
    CHECK(r.history.front() == doctest::Approx(sum_of_distances(p, mean_anchor(p))).epsilon(1e-12));

    // zero subgradient at an interior optimum
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const Eigen::VectorXd diff = r.c - p.row(i).transpose();
      g += diff / diff.norm();
    }
    CHECK(g.norm() < 1e-5);  // sum of 80 unit vectors

    Eigen::RowVectorXd shift = Eigen::RowVectorXd::LinSpaced(p.cols(), -3.0, 4.0);
    const AnchorResult t = fermat_weber(p.rowwise() + shift, 1e-10);
    CHECK((t.c - r.c - shift.transpose()).norm() < 1e-6);
  }
}

TEST_CASE("iterate on a data point takes the Vardi-Zhang step") {
  // centroid lands exactly on the middle point, which is not optimal
  Eigen::MatrixXd p(5, 2);
  p << 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0;
  const AnchorResult sym = fermat_weber(p, 1e-12);
  CHECK(sym.c.norm() < 1e-9);
  CHECK(std::isfinite(sym.objective));

  Eigen::MatrixXd q(4, 2);
  q << 0.0, 0.0, 3.0, 0.0, 3.0, 0.1, 3.0, -0.1;  // centroid not a data point
  Eigen::MatrixXd onto(4, 2);
  onto << 1.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0;  // centroid (1, 0) is a data point
  const AnchorResult a = fermat_weber(onto, 1e-12);
  CHECK(std::isfinite(a.objective));
  CHECK(a.objective <= sum_of_distances(onto, Eigen::Vector2d(1.0, 0.0)) + 1e-12);
  CHECK(a.c.allFinite());
  const AnchorResult b = fermat_weber(q, 1e-12);
  CHECK(b.c.allFinite());
}

TEST_CASE("errors and degenerate inputs") {
  CHECK_THROWS_AS(fermat_weber(Eigen::MatrixXd(0, 3)), DataError);
  CHECK_THROWS_AS(mean_anchor(Eigen::MatrixXd(0, 3)), DataError);
  CHECK_THROWS_AS(fermat_weber(random_points(4, 2, 1), 0.0), ConfigError);
  Eigen::MatrixXd one(1, 3);
  one << 1.0, 2.0, 3.0;
  CHECK(fermat_weber(one).c == one.row(0).transpose());
  CHECK(fermat_weber(one).objective == 0.0);
}

TEST_CASE("mean anchor") {
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 0.0, 2.0, 2.0;
  CHECK(mean_anchor(p) == Eigen::Vector2d(1.0, 1.0));
  CHECK(mean_anchor(p.topRows(1)) == Eigen::Vector2d(0.0, 0.0));
  Eigen::MatrixXd sym(4, 2);
  sym << 3.0, 1.0, 5.0, 1.0, 4.0, 0.0, 4.0, 2.0;
  CHECK((mean_anchor(sym) - Eigen::Vector2d(4.0, 1.0)).norm() < 1e-15);
}

TEST_CASE("robustness: far outliers drag the mean, not the Fermat-Weber point") {
  const Eigen::MatrixXd p = random_points(100, 11, 9, 0.3);
  const RobustnessReport r = anchor_robustness_report(p, 0.05, 3, 100.0);
  CHECK(r.n_outliers == 5);
  CHECK(r.mean_displacement > r.fermat_weber_displacement);
  CHECK(r.mean_displacement > 10.0 * r.fermat_weber_displacement);

  const RobustnessReport z = anchor_robustness_report(p, 0.0);
  CHECK(z.n_outliers == 0);
  CHECK(z.mean_displacement == 0.0);
  CHECK(z.fermat_weber_displacement == 0.0);

  CHECK_THROWS_AS(anchor_robustness_report(p, 0.5), ConfigError);
}

TEST_CASE("symmetric outlier pairs leave both anchors in place") {
  // cloud symmetric about the origin, outliers as +-v pairs
  const Eigen::MatrixXd half = random_points(40, 4, 12);
  Eigen::MatrixXd cloud(80, 4);
  cloud << half, -half;
  Eigen::MatrixXd out(4, 4);
  out << 50.0, 0.0, 0.0, 0.0, -50.0, 0.0, 0.0, 0.0, 0.0, 30.0, 40.0, 0.0, 0.0, -30.0, -40.0, 0.0;
  const RobustnessReport r = anchor_robustness(cloud, out);
  CHECK(r.mean_displacement < 1e-12);
  CHECK(r.fermat_weber_displacement < 1e-7);
}
