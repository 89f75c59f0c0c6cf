#pragma once

#include "sirep/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace sirep {

struct AnchorResult {
  Eigen::VectorXd c;
  double objective = 0.0;  // sum of distances to the points
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective before the first step and after each step

  AnchorInfo info() const;
};

/// Geometric median of the rows of `points` by Weiszfeld iteration from the
/// centroid. Iterates landing on a data point take the Vardi-Zhang step. The
/// loop also stops (converged) when rounding would make the objective rise.
AnchorResult fermat_weber(const Eigen::MatrixXd& points, double tol = 1e-9, int max_iter = 10000);

double sum_of_distances(const Eigen::MatrixXd& points, const Eigen::VectorXd& c);

Eigen::VectorXd mean_anchor(const Eigen::MatrixXd& points);

struct RobustnessReport {
  std::size_t n_points = 0;
  std::size_t n_outliers = 0;
  double fermat_weber_displacement = 0.0;
  double mean_displacement = 0.0;
};

/// Anchors of `points` versus anchors of `points` stacked with `outliers`.
RobustnessReport anchor_robustness(const Eigen::MatrixXd& points, const Eigen::MatrixXd& outliers);

/// round(fraction * n) outliers placed at `scale` times the cluster radius
/// (largest distance from the centroid) in random directions.
Eigen::MatrixXd far_outliers(const Eigen::MatrixXd& points, double fraction, double scale, std::uint64_t seed);

/// far_outliers followed by anchor_robustness. fraction must lie in [0, 0.5).
RobustnessReport anchor_robustness_report(const Eigen::MatrixXd& points, double outlier_fraction,
                                          std::uint64_t seed = 1, double scale = 100.0);

}  // namespace sirep
