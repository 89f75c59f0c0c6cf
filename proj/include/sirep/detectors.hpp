#pragma once

#include "sirep/network.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sirep {

// Point sets are matrices with one point per row.

double euclidean(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j);

// --- Local Outlier Factor -----------------------------------------------------

struct LofModel {
  Eigen::MatrixXd train;
  int k = 20;
  std::vector<double> k_distance;  // per training point
  std::vector<double> lrd;         // per training point
};

/// Neighborhoods include every point tied with the k-th distance.
LofModel lof_fit(const Eigen::MatrixXd& train, int k);
std::vector<double> lof_score(const LofModel& model, const Eigen::MatrixXd& queries);

/// lof_fit followed by lof_score.
std::vector<double> lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& queries, int k);

// --- Least-squares anomaly detector -------------------------------------------

struct LsaConfig {
  int centers = 500;
  double gamma = 0.0;  // 0: 1 / median squared distance between centers
  double rho = 0.1;
  double ridge = 1e-3;
  std::uint64_t seed = 1;
};

struct LsaModel {
  Eigen::MatrixXd centers;
  Eigen::VectorXd theta;
  double gamma = 1.0;
  double rho = 0.1;
};

/// Kernel least-squares fit of the inlier class on valid latents only.
LsaModel lsa_fit(const Eigen::MatrixXd& train, const LsaConfig& config = {});
/// Anomaly probability rho / (max(0, theta' phi(z)) + rho).
double lsa_score(const LsaModel& model, const Eigen::VectorXd& z);
std::vector<double> lsa_scores(const LsaModel& model, const Eigen::MatrixXd& queries);

// --- Supervised network -------------------------------------------------------

struct NnDetectorConfig {
  std::vector<std::size_t> hidden{32, 16};
  int epochs = 60;
  int batch_size = 100;
  double lr0 = 0.01;
  double decay = 0.95;
  std::uint64_t seed = 1;
};

struct NnDetector {
  Network net;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

/// Binary cross-entropy on standardized latents. Throws DataError when only
/// one class is present.
NnDetector nn_detector_train(const Eigen::MatrixXd& latents, std::span<const int> labels,
                             const NnDetectorConfig& config = {});
/// Probability that z is valid.
double nn_detector_predict(const NnDetector& model, const Eigen::VectorXd& z);
std::vector<double> nn_detector_predict(const NnDetector& model, const Eigen::MatrixXd& latents);

// --- Evaluation -----------------------------------------------------------------

enum class DetectorKind { lof, lsa, nn };

std::string_view to_string(DetectorKind k);

struct Confusion {
  std::size_t true_valid = 0;     // valid predicted valid
  std::size_t false_invalid = 0;  // valid predicted invalid
  std::size_t true_invalid = 0;   // invalid predicted invalid
  std::size_t false_valid = 0;    // invalid predicted valid

  std::size_t total() const { return true_valid + false_invalid + true_invalid + false_valid; }
};

struct DetectionReport {
  DetectorKind detector = DetectorKind::lof;
  double accuracy = 0.0;  // percent
  double tnr = 0.0;       // percent of invalid samples flagged invalid
  double threshold = 0.0;
  Confusion confusion;
  std::vector<double> scores;  // anomaly scores, higher = more anomalous
  std::vector<int> labels;
  std::vector<int> predictions;  // 1 valid, 0 invalid
};

/// A sample is predicted invalid when its anomaly score exceeds the threshold.
DetectionReport evaluate_scores(DetectorKind kind, std::span<const double> anomaly_scores,
                                std::span<const int> labels, double threshold);

/// Threshold maximizing accuracy of the rule "score > t means invalid".
/// Candidates are midpoints between distinct sorted scores plus both ends;
/// ties keep the lowest threshold.
double tune_threshold(std::span<const double> anomaly_scores, std::span<const int> labels);

nlohmann::json to_json(const DetectionReport& r);
/// sample_id, score, label, prediction
void write_scores_csv(const DetectionReport& r, const std::string& path);

struct DetectorSuiteConfig {
  int lof_k = 20;
  LsaConfig lsa;
  NnDetectorConfig nn;
  double fit_fraction = 0.8;  // share of training valids used to fit LOF/LSA
  std::uint64_t seed = 1;
};

DetectorSuiteConfig detector_suite_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DetectorSuiteConfig& c);

/// Fits all three detectors on training latents and scores the test latents.
/// LOF and LSA see only a share of the training valids; their thresholds are
/// tuned on the remaining valids plus all training invalids. The network uses
/// every training latent and a 0.5 threshold.
std::vector<DetectionReport> run_detectors(const Eigen::MatrixXd& train_latents, std::span<const int> train_labels,
                                           const Eigen::MatrixXd& test_latents, std::span<const int> test_labels,
                                           const DetectorSuiteConfig& config = {});

}  // namespace sirep
