#pragma once

#include "sirep/network.hpp"
#include "sirep/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace toy {

inline sirep::Architecture small_arch(std::size_t in = 8, std::size_t hidden = 6, std::size_t latent = 3) {
  return {{in, hidden, latent}, {latent, hidden, in}, true};
}

/// Toy bundle with small random biases so no unit sits exactly at a kink.
inline sirep::ModelBundle bundle(sirep::Regime regime, std::uint64_t seed, const sirep::Architecture& arch = small_arch()) {
  sirep::ModelBundle b = sirep::make_bundle(arch, regime, seed);
  sirep::Rng rng = sirep::make_rng(seed, 99);
  for (auto* net : {&b.encoder, &b.decoder, &b.classifier})
    for (auto& l : net->layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.2 * (sirep::uniform01(rng) - 0.3);
  return b;
}

inline Eigen::MatrixXd batch(std::size_t dim, std::size_t n, std::uint64_t seed) {
  sirep::Rng rng = sirep::make_rng(seed, 98);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = 2.0 * sirep::uniform01(rng) - 1.0;
  return x;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
};

/// Central differences (h = 1e-5) against backward(); relative error over
/// parameters with |g| > 1e-8.
inline GradCheck finite_difference_check(sirep::ModelBundle b, const Eigen::MatrixXd& x, const std::vector<int>& y,
                                         const sirep::LossSpec& spec, double rel_tol = 1e-4, double h = 1e-5) {
  sirep::BundleGrad g = sirep::zero_grad(b);
  sirep::backward(b, x, y, spec, g);
  const auto grads = sirep::gradient_blocks(g);
  auto params = sirep::parameter_blocks(b);
  GradCheck out;
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    for (std::size_t i = 0; i < params[blk].size(); ++i) {
      double& p = params[blk][i];
      const double saved = p;
      p = saved + h;
      const double up = sirep::evaluate_loss(b, x, y, spec).total;
      p = saved - h;
      const double down = sirep::evaluate_loss(b, x, y, spec).total;
      p = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[blk][i];
      if (std::abs(analytic) <= 1e-8 && std::abs(numeric) <= 1e-8) continue;
      ++out.checked;
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
      out.worst = std::max(out.worst, rel);
      if (rel > rel_tol) ++out.failed;
    }
  }
  return out;
}

}  // namespace toy
