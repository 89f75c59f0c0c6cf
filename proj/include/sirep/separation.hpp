#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>

namespace sirep {

// Point sets hold one point per row.

inline constexpr double kCovarianceRidge = 1e-6;

/// Gaussian-fit Bhattacharyya distance with sample covariances plus
/// kCovarianceRidge * I. Each set needs at least d + 2 points.
double bhattacharyya_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct KMeansResult {
  Eigen::MatrixXd centers;
  std::vector<int> assignment;
  double inertia = 0.0;
  int iterations = 0;
};

/// Lloyd iterations from a k-means++ start; best inertia over `restarts`
/// (ties keep the earliest restart).
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10, int max_iter = 300);

/// 2-means on the union; each cluster takes the class of its majority (ties go
/// to `a`); returns the misassigned share in percent.
double overlap_percentage(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed = 1);

double centroid_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct SeparationReport {
  double bhattacharyya = 0.0;
  double overlap_percent = 0.0;
  double centroid_distance = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_invalid = 0;
};

SeparationReport separation_report(const Eigen::MatrixXd& valid, const Eigen::MatrixXd& invalid,
                                   std::uint64_t seed = 1);

nlohmann::json to_json(const SeparationReport& r);

}  // namespace sirep
