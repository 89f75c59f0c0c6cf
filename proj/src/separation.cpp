#include "sirep/separation.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <cmath>
#include <limits>

namespace sirep {

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  cov.diagonal().array() += kCovarianceRidge;
  return cov;
}

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  return ldlt.vectorD().array().abs().log().sum();
}

}  // namespace

double bhattacharyya_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index d = a.cols();
  if (b.cols() != d) throw DataError("point sets differ in dimension");
  if (a.rows() < d + 2 || b.rows() < d + 2) {
    throw DataError("Bhattacharyya distance needs at least d + 2 = " + std::to_string(d + 2) + " points per set");
  }
  const Eigen::VectorXd mu_a = a.colwise().mean().transpose();
  const Eigen::VectorXd mu_b = b.colwise().mean().transpose();
  const Eigen::MatrixXd cov_a = sample_covariance(a, mu_a);
  const Eigen::MatrixXd cov_b = sample_covariance(b, mu_b);
  const Eigen::MatrixXd cov = 0.5 * (cov_a + cov_b);
  const Eigen::VectorXd diff = mu_a - mu_b;
  const Eigen::VectorXd sol = cov.ldlt().solve(diff);
  const double mahal = diff.dot(sol);
  const double log_term = log_det_spd(cov) - 0.5 * (log_det_spd(cov_a) + log_det_spd(cov_b));
  return 0.125 * mahal + 0.5 * log_term;
}

namespace {

double sq_dist(const Eigen::MatrixXd& p, Eigen::Index i, const Eigen::MatrixXd& c, Eigen::Index j) {
  return (p.row(i) - c.row(j)).squaredNorm();
}

KMeansResult lloyd(const Eigen::MatrixXd& pts, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = pts.rows();
  KMeansResult r;
  r.centers.resize(k, pts.cols());
  // k-means++ seeding
  r.centers.row(0) = pts.row(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n)));
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      best[static_cast<std::size_t>(i)] = std::min(best[static_cast<std::size_t>(i)], sq_dist(pts, i, r.centers, c - 1));
      total += best[static_cast<std::size_t>(i)];
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= best[static_cast<std::size_t>(i)];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
    }
    r.centers.row(c) = pts.row(pick);
  }

  r.assignment.assign(static_cast<std::size_t>(n), -1);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double dmin = sq_dist(pts, i, r.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(pts, i, r.centers, c);
        if (d < dmin) {
          dmin = d;
          arg = c;
        }
      }
      if (r.assignment[static_cast<std::size_t>(i)] != arg) {
        r.assignment[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += pts.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Reseed an empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        double dmax = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = sq_dist(pts, i, r.centers, r.assignment[static_cast<std::size_t>(i)]);
          if (d > dmax) {
            dmax = d;
            far = i;
          }
        }
        r.centers.row(c) = pts.row(far);
      }
    }
  }
  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) r.inertia += sq_dist(pts, i, r.centers, r.assignment[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1 || points.rows() < k) throw DataError("k-means needs at least k points");
  if (restarts < 1 || max_iter < 1) throw ConfigError("k-means restarts and max_iter must be >= 1");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = make_rng(seed, 100 + static_cast<std::uint64_t>(r));
    KMeansResult cur = lloyd(points, k, rng, max_iter);
    if (r == 0 || cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

double overlap_percentage(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("overlap needs two non-empty sets");
  if (a.cols() != b.cols()) throw DataError("point sets differ in dimension");
  Eigen::MatrixXd all(a.rows() + b.rows(), a.cols());
  all << a, b;
  const KMeansResult km = kmeans(all, 2, seed);
  std::size_t count[2][2] = {{0, 0}, {0, 0}};  // [cluster][class], class 0 = a
  for (Eigen::Index i = 0; i < all.rows(); ++i) ++count[km.assignment[static_cast<std::size_t>(i)]][i < a.rows() ? 0 : 1];
  std::size_t wrong = 0;
  for (int c = 0; c < 2; ++c) wrong += count[c][0] >= count[c][1] ? count[c][1] : count[c][0];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(all.rows());
}

double centroid_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("centroid distance needs two non-empty sets");
  if (a.cols() != b.cols()) throw DataError("point sets differ in dimension");
  return (a.colwise().mean() - b.colwise().mean()).norm();
}

SeparationReport separation_report(const Eigen::MatrixXd& valid, const Eigen::MatrixXd& invalid, std::uint64_t seed) {
  SeparationReport r;
  r.bhattacharyya = bhattacharyya_distance(valid, invalid);
  r.overlap_percent = overlap_percentage(valid, invalid, seed);
  r.centroid_distance = centroid_distance(valid, invalid);
  r.n_valid = static_cast<std::size_t>(valid.rows());
  r.n_invalid = static_cast<std::size_t>(invalid.rows());
  return r;
}

nlohmann::json to_json(const SeparationReport& r) {
  return {{"bhattacharyya", r.bhattacharyya},
          {"overlap_percent", r.overlap_percent},
          {"centroid_distance", r.centroid_distance},
          {"n_valid", r.n_valid},
          {"n_invalid", r.n_invalid}};
}

}  // namespace sirep
