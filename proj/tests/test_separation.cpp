#include <doctest.h>

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"
#include "sirep/separation.hpp"

#include <cmath>

using namespace sirep;

namespace {

Eigen::MatrixXd normal_set(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double mean = 0.0, double sigma = 1.0) {
  Rng rng = make_rng(seed, 41);
  Eigen::MatrixXd p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = mean + sigma * standard_normal(rng);
  return p;
}

Eigen::MatrixXd random_rotation(Eigen::Index d, std::uint64_t seed) {
  const Eigen::MatrixXd g = normal_set(d, d, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ();
}

}  // namespace

TEST_CASE("Bhattacharyya: identical sets, 1-D closed form, symmetry") {
  const Eigen::MatrixXd a = normal_set(200, 11, 1);
  CHECK(std::abs(bhattacharyya_distance(a, a)) < 1e-9);

  const Eigen::MatrixXd u = normal_set(100000, 1, 2, 0.0);
  const Eigen::MatrixXd v = normal_set(100000, 1, 3, 2.0);
  CHECK(bhattacharyya_distance(u, v) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(bhattacharyya_distance(u, v) - 0.5) < 0.05);

  // different variances: (1/2) ln((s1^2 + s2^2) / (2 s1 s2)) with s1 = 1, s2 = 2
  const Eigen::MatrixXd w = normal_set(100000, 1, 4, 0.0, 2.0);
  CHECK(std::abs(bhattacharyya_distance(u, w) - 0.5 * std::log(5.0 / 4.0)) < 0.01);

  const Eigen::MatrixXd b = normal_set(150, 11, 5, 0.7);
  CHECK(bhattacharyya_distance(a, b) == bhattacharyya_distance(b, a));
  CHECK(bhattacharyya_distance(a, b) > 0.0);

  CHECK_THROWS_AS(bhattacharyya_distance(normal_set(12, 11, 1), b), DataError);
  CHECK_THROWS_AS(bhattacharyya_distance(a, normal_set(50, 3, 1)), DataError);
}

TEST_CASE("overlap percentage") {
  const Eigen::MatrixXd a = normal_set(300, 11, 6, 0.0, 0.1);
  const Eigen::MatrixXd b = normal_set(300, 11, 7, 5.0, 0.1);
  CHECK(overlap_percentage(a, b) == 0.0);

  const Eigen::MatrixXd c = normal_set(1000, 11, 8);
  const Eigen::MatrixXd d = normal_set(1000, 11, 9);
  const double same = overlap_percentage(c, d);
  CHECK(same >= 45.0);
  CHECK(same <= 50.0);
  CHECK(overlap_percentage(c, d, 3) == overlap_percentage(c, d, 3));
  CHECK_THROWS_AS(overlap_percentage(Eigen::MatrixXd(0, 11), d), DataError);
}

TEST_CASE("k-means picks the best restart") {
  Eigen::MatrixXd p(400, 2);
  p << normal_set(200, 2, 10, -4.0, 0.5), normal_set(200, 2, 11, 4.0, 0.5);
  const KMeansResult r = kmeans(p, 2, 1);
  CHECK(r.centers.rows() == 2);
  CHECK(r.assignment.size() == 400);
  for (int i = 1; i < 200; ++i) CHECK(r.assignment[static_cast<std::size_t>(i)] == r.assignment[0]);
  for (int i = 201; i < 400; ++i) CHECK(r.assignment[static_cast<std::size_t>(i)] == r.assignment[200]);
  CHECK(r.assignment[0] != r.assignment[200]);
  CHECK(kmeans(p, 2, 1, 10).inertia <= kmeans(p, 2, 1, 1).inertia);
  CHECK_THROWS_AS(kmeans(p.topRows(1), 2, 1), DataError);
}

TEST_CASE("centroid distance") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 2.0, 4.0;
  b << 6.0, 8.0;
  CHECK(centroid_distance(a, b) == 4.0);
  CHECK(centroid_distance(a, a) == 0.0);
  const Eigen::MatrixXd p = normal_set(50, 3, 12), q = normal_set(60, 3, 13, 1.0);
  const Eigen::RowVector3d v(0.5, -2.0, 1.0);
  const Eigen::MatrixXd qs = q.rowwise() + v;
  const Eigen::VectorXd expect = p.colwise().mean() - qs.colwise().mean();
  CHECK(centroid_distance(p, qs) == doctest::Approx(expect.norm()).epsilon(1e-12));
  CHECK(centroid_distance(p, qs) ==
        doctest::Approx((p.colwise().mean() - q.colwise().mean() - v).norm()).epsilon(1e-12));
}

TEST_CASE("rigid motions leave all three metrics unchanged") {
  const Eigen::MatrixXd a = normal_set(200, 11, 14, 0.0, 0.8);
  const Eigen::MatrixXd b = normal_set(150, 11, 15, 1.0, 1.2);
  const Eigen::MatrixXd rot = random_rotation(11, 16);
  const Eigen::RowVectorXd shift = Eigen::RowVectorXd::LinSpaced(11, -5.0, 5.0);
  const Eigen::MatrixXd ra = (a * rot.transpose()).rowwise() + shift;
  const Eigen::MatrixXd rb = (b * rot.transpose()).rowwise() + shift;
  const SeparationReport r0 = separation_report(a, b);
  const SeparationReport r1 = separation_report(ra, rb);
  CHECK(std::abs(r0.bhattacharyya - r1.bhattacharyya) < 1e-9);
  CHECK(std::abs(r0.centroid_distance - r1.centroid_distance) < 1e-9);
  CHECK(r0.overlap_percent == r1.overlap_percent);
  CHECK(r0.n_valid == 200);
  CHECK(r0.n_invalid == 150);
  CHECK(r0.overlap_percent <= 100.0);
  const auto j = to_json(r0);
  CHECK(j.contains("bhattacharyya"));
}
