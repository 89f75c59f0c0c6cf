#include "sirep/anchor.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <cmath>

namespace sirep {

AnchorInfo AnchorResult::info() const {
  AnchorInfo a;
  a.point.assign(c.data(), c.data() + c.size());
  a.objective = objective;
  a.iterations = iterations;
  a.converged = converged;
  return a;
}

double sum_of_distances(const Eigen::MatrixXd& points, const Eigen::VectorXd& c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) s += (points.row(i).transpose() - c).norm();
  return s;
}

Eigen::VectorXd mean_anchor(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) throw DataError("mean anchor of an empty point set");
  return points.colwise().mean().transpose();
}

namespace {

constexpr double kCoincide = 1e-12;

// One Weiszfeld step; returns false when y is already optimal.
bool weiszfeld_step(const Eigen::MatrixXd& points, const Eigen::VectorXd& y, Eigen::VectorXd& next) {
  const Eigen::Index d = points.cols();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
  double den = 0.0;
  double eta = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd diff = points.row(i).transpose() - y;
    const double dist = diff.norm();
    if (dist < kCoincide) {
      eta += 1.0;
      continue;
    }
    num += points.row(i).transpose() / dist;
    r += diff / dist;
    den += 1.0 / dist;
  }
  if (den == 0.0) return false;  // every point sits on y
  const Eigen::VectorXd t = num / den;
  if (eta == 0.0) {
    next = t;
    return true;
  }
  const double rn = r.norm();
  if (rn <= eta) return false;  // subgradient condition holds at the data point
  const double w = eta / rn;
  next = (1.0 - w) * t + w * y;
  return true;
}

}  // namespace

AnchorResult fermat_weber(const Eigen::MatrixXd& points, double tol, int max_iter) {
  if (points.rows() == 0) throw DataError("Fermat-Weber point of an empty point set");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  AnchorResult r;
  r.c = mean_anchor(points);
  r.objective = sum_of_distances(points, r.c);
  r.history.push_back(r.objective);
  Eigen::VectorXd next;
  while (r.iterations < max_iter) {
    if (!weiszfeld_step(points, r.c, next)) {
      r.converged = true;
      break;
    }
    const double f = sum_of_distances(points, next);
    if (f > r.objective) {
      r.converged = true;
      break;
    }
    const double step = (next - r.c).norm();
    r.c = next;
    r.objective = f;
    ++r.iterations;
    r.history.push_back(f);
    if (step < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

RobustnessReport anchor_robustness(const Eigen::MatrixXd& points, const Eigen::MatrixXd& outliers) {
  if (points.rows() == 0) throw DataError("robustness report needs points");
  RobustnessReport rep;
  rep.n_points = static_cast<std::size_t>(points.rows());
  rep.n_outliers = static_cast<std::size_t>(outliers.rows());
  if (outliers.rows() == 0) return rep;
  if (outliers.cols() != points.cols()) throw DataError("outliers differ in dimension from the points");
  Eigen::MatrixXd all(points.rows() + outliers.rows(), points.cols());
  all << points, outliers;
  rep.fermat_weber_displacement = (fermat_weber(all).c - fermat_weber(points).c).norm();
  rep.mean_displacement = (mean_anchor(all) - mean_anchor(points)).norm();
  return rep;
}

Eigen::MatrixXd far_outliers(const Eigen::MatrixXd& points, double fraction, double scale, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 0.5)) throw ConfigError("outlier fraction must lie in [0, 0.5)");
  const Eigen::VectorXd center = mean_anchor(points);
  double radius = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) radius = std::max(radius, (points.row(i).transpose() - center).norm());
  if (radius == 0.0) radius = 1.0;
  const auto n = static_cast<Eigen::Index>(std::lround(fraction * static_cast<double>(points.rows())));
  Eigen::MatrixXd out(n, points.cols());
  Rng rng = make_rng(seed, 0x07);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd dir(points.cols());
    do {
      for (Eigen::Index j = 0; j < dir.size(); ++j) dir(j) = standard_normal(rng);
    } while (dir.norm() == 0.0);
    out.row(i) = (center + scale * radius * dir.normalized()).transpose();
  }
  return out;
}

RobustnessReport anchor_robustness_report(const Eigen::MatrixXd& points, double outlier_fraction, std::uint64_t seed,
                                          double scale) {
  return anchor_robustness(points, far_outliers(points, outlier_fraction, scale, seed));
}

}  // namespace sirep
