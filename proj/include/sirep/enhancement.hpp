#pragma once

#include "sirep/eye.hpp"
#include "sirep/network.hpp"
#include "sirep/waveform.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace sirep {

/// ||E(x) - c||.
double si_metric(const Network& encoder, const Eigen::VectorXd& x, const Eigen::VectorXd& c);

/// Root-mean-square difference.
double dissimilarity(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat);

/// Product of layer spectral norms and activation Lipschitz constants, divided
/// by sqrt(output dim) so that it bounds RMS output change per unit latent move.
double decoder_lipschitz_estimate(const Network& decoder);

struct EnhancementResult {
  Eigen::VectorXd x_original;
  Eigen::VectorXd x_enhanced;
  double sigma_before = 0.0;
  double sigma_after = 0.0;            // ||z_t - c|| of the accepted interpolant
  double sigma_after_reencoded = 0.0;  // ||E(x_enhanced) - c||
  double d_final = 0.0;                // d(x_original, x_enhanced)
  int m = 0;
  int steps_taken = 0;  // accepted interpolants; 0 leaves x unchanged
  bool unchanged = false;
};

/// The interpolation loop t = 0..m with m = max(1, ceil(||z - c|| L_D / alpha)).
/// Interpolants are decoded in blocks; the first one with d >= alpha stops it.
EnhancementResult enhance(const Eigen::VectorXd& x, const Eigen::VectorXd& c, const Network& encoder,
                          const Network& decoder, double alpha, double lipschitz);

/// Largest training RMSE of the autoencoder rounded up to a multiple of 0.01.
double max_reconstruction_rmse(const Network& encoder, const Network& decoder, const Eigen::MatrixXd& data);
double alpha_from_rmse(double max_rmse);
double choose_alpha(const Network& encoder, const Network& decoder, const Eigen::MatrixXd& data);

struct SignalEnhancement {
  std::uint32_t source_id = 0;
  int label = 1;
  double sigma_before = 0.0;  // mean over segments
  double sigma_after = 0.0;
  WindowFit window_before;
  WindowFit window_after;
  double pct_improvement = 0.0;  // 0 when area_before is 0
  bool has_pct = false;
  int steps = 0;  // total accepted interpolants over the segments
  int unchanged_segments = 0;
  double max_d = 0.0;
  Waveform enhanced;
};

/// Enhances every segment of one waveform and measures both eyes.
SignalEnhancement enhance_waveform(const Waveform& w, const Eigen::VectorXd& c, const Network& encoder,
                                   const Network& decoder, double alpha, double lipschitz,
                                   std::vector<EnhancementResult>* segments = nullptr);

struct ImprovementSummary {
  std::size_t n_signals = 0;
  std::size_t n_with_pct = 0;  // signals with a nonzero area before
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double min = 0.0;
  double median = 0.0;
};

ImprovementSummary summarize_improvement(std::span<const SignalEnhancement> signals);
nlohmann::json to_json(const ImprovementSummary& s);

/// signal_id, sigma_before, sigma_after, area_before_mVps, area_after_mVps, pct_improvement, steps
void write_enhancement_csv(std::span<const SignalEnhancement> signals, const std::string& path);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of y on x. Throws DataError when x is constant.
LineFit least_squares_line(std::span<const double> x, std::span<const double> y);

/// Window area (mV ps) against per-signal mean segment sigma.
LineFit si_slope_analysis(const Network& encoder, const Eigen::VectorXd& c, std::span<const Waveform> waveforms);

}  // namespace sirep
