#include "sirep/enhancement.hpp"

#include "sirep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace sirep {

double si_metric(const Network& encoder, const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
  if (static_cast<std::size_t>(x.size()) != encoder.input_dim()) throw DataError("signal length does not match the encoder");
  if (static_cast<std::size_t>(c.size()) != encoder.output_dim()) throw DataError("anchor dimension does not match the latent space");
  return (encoder.forward(x) - c).norm();
}

double dissimilarity(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat) {
  if (x.size() != x_hat.size() || x.size() == 0) throw DataError("dissimilarity needs two vectors of equal, nonzero length");
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (x(i) - x_hat(i)) * (x(i) - x_hat(i));
  return std::sqrt(s / static_cast<double>(x.size()));
}

double decoder_lipschitz_estimate(const Network& decoder) {
  if (decoder.empty()) throw ModelError("decoder has no layers");
  double l = 1.0;
  for (const auto& layer : decoder.layers) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(layer.weight);
    l *= svd.singularValues()(0) * activation_lipschitz(layer.activation);
  }
  return l / std::sqrt(static_cast<double>(decoder.output_dim()));
}

EnhancementResult enhance(const Eigen::VectorXd& x, const Eigen::VectorXd& c, const Network& encoder,
                          const Network& decoder, double alpha, double lipschitz) {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(lipschitz > 0.0)) throw ModelError("decoder Lipschitz estimate must be positive");
  EnhancementResult r;
  r.x_original = x;
  r.x_enhanced = x;
  const Eigen::VectorXd z = encoder.forward(x);
  if (z.size() != c.size()) throw DataError("anchor dimension does not match the latent space");
  const double dist = (z - c).norm();
  r.sigma_before = dist;
  const double m_real = std::ceil(dist * lipschitz / alpha);
  if (!(m_real < 1e8)) throw ModelError("interpolation step count overflows; check alpha and the decoder bound");
  r.m = std::max(1, static_cast<int>(m_real));
  const double m = static_cast<double>(r.m);

  int accepted = -1;
  int block = 16;
  bool stop = false;
  for (int t0 = 0; t0 <= r.m && !stop; t0 += block, block = std::min(block * 2, 1024)) {
    const int count = std::min(block, r.m - t0 + 1);
    Eigen::MatrixXd zs(z.size(), count);
    for (int j = 0; j < count; ++j) {
      const double f = static_cast<double>(t0 + j) / m;
      zs.col(j) = (1.0 - f) * z + f * c;
    }
    const Eigen::MatrixXd xs = decoder.forward(zs);
    for (int j = 0; j < count; ++j) {
      const Eigen::VectorXd cand = xs.col(j);
      if (dissimilarity(x, cand) < alpha) {
        r.x_enhanced = cand;
        accepted = t0 + j;
      } else {
        stop = true;
        break;
      }
    }
  }
  if (accepted < 0) {
    r.unchanged = true;
    r.sigma_after = dist;
    r.sigma_after_reencoded = dist;
    r.d_final = 0.0;
    r.steps_taken = 0;
    return r;
  }
  r.steps_taken = accepted + 1;
  const double f = static_cast<double>(accepted) / m;
  r.sigma_after = ((1.0 - f) * z + f * c - c).norm();
  r.sigma_after_reencoded = (encoder.forward(r.x_enhanced) - c).norm();
  r.d_final = dissimilarity(x, r.x_enhanced);
  return r;
}

double max_reconstruction_rmse(const Network& encoder, const Network& decoder, const Eigen::MatrixXd& data) {
  if (data.cols() == 0) throw DataError("no training samples for alpha selection");
  const Eigen::MatrixXd rec = decoder.forward(encoder.forward(data));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < data.cols(); ++i) {
    worst = std::max(worst, dissimilarity(data.col(i), rec.col(i)));
  }
  return worst;
}

double alpha_from_rmse(double max_rmse) {
  if (!(max_rmse >= 0.0)) throw DataError("RMSE must be non-negative");
  return std::max(0.01, std::ceil(max_rmse * 100.0 - 1e-9) / 100.0);
}

double choose_alpha(const Network& encoder, const Network& decoder, const Eigen::MatrixXd& data) {
  return alpha_from_rmse(max_reconstruction_rmse(encoder, decoder, data));
}

SignalEnhancement enhance_waveform(const Waveform& w, const Eigen::VectorXd& c, const Network& encoder,
                                   const Network& decoder, double alpha, double lipschitz,
                                   std::vector<EnhancementResult>* segments) {
  const std::size_t n = encoder.input_dim();
  if (n == 0 || w.samples.size() % n != 0) throw DataError("waveform length is not a multiple of the segment length");
  SignalEnhancement s;
  s.enhanced = w;
  const std::size_t n_seg = w.samples.size() / n;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(w.samples.data() + k * n, static_cast<Eigen::Index>(n));
    EnhancementResult r = enhance(x, c, encoder, decoder, alpha, lipschitz);
    std::copy(r.x_enhanced.data(), r.x_enhanced.data() + n, s.enhanced.samples.begin() + static_cast<std::ptrdiff_t>(k * n));
    s.sigma_before += r.sigma_before;
    s.sigma_after += r.sigma_after;
    s.steps += r.steps_taken;
    s.unchanged_segments += r.unchanged;
    s.max_d = std::max(s.max_d, r.d_final);
    if (segments) segments->push_back(std::move(r));
  }
  s.sigma_before /= static_cast<double>(n_seg);
  s.sigma_after /= static_cast<double>(n_seg);
  s.window_before = max_window_area(fold_eye(w));
  s.window_after = max_window_area(fold_eye(s.enhanced));
  const double before = s.window_before.area_mvps();
  if (before > 0.0) {
    s.has_pct = true;
    s.pct_improvement = 100.0 * (s.window_after.area_mvps() - before) / before;
  }
  return s;
}

ImprovementSummary summarize_improvement(std::span<const SignalEnhancement> signals) {
  ImprovementSummary out;
  out.n_signals = signals.size();
  std::vector<double> v;
  for (const auto& s : signals)
    if (s.has_pct) v.push_back(s.pct_improvement);
  out.n_with_pct = v.size();
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  out.min = v.front();
  out.max = v.back();
  const std::size_t h = v.size() / 2;
  out.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return out;
}

nlohmann::json to_json(const ImprovementSummary& s) {
  return {{"n_signals", s.n_signals}, {"n_with_pct", s.n_with_pct}, {"mean", s.mean}, {"std", s.std},
          {"max", s.max},             {"min", s.min},               {"median", s.median}};
}

void write_enhancement_csv(std::span<const SignalEnhancement> signals, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "signal_id,sigma_before,sigma_after,area_before_mVps,area_after_mVps,pct_improvement,steps\n";
  for (const auto& s : signals) {
    out << s.source_id << ',' << s.sigma_before << ',' << s.sigma_after << ',' << s.window_before.area_mvps() << ','
        << s.window_after.area_mvps() << ',';
    if (s.has_pct) out << s.pct_improvement;
    out << ',' << s.steps << '\n';
  }
}

LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("line fit needs at least two (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("line fit is degenerate: all x values are equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

LineFit si_slope_analysis(const Network& encoder, const Eigen::VectorXd& c, std::span<const Waveform> waveforms) {
  if (waveforms.size() < 10) throw DataError("slope analysis needs at least 10 waveforms");
  const std::size_t n = encoder.input_dim();
  std::vector<double> sigma, area;
  for (const auto& w : waveforms) {
    if (n == 0 || w.samples.size() % n != 0) throw DataError("waveform length is not a multiple of the segment length");
    const Eigen::Map<const Eigen::MatrixXd> segs(w.samples.data(), static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(w.samples.size() / n));
    const Eigen::MatrixXd z = encoder.forward(Eigen::MatrixXd(segs));
    sigma.push_back((z.colwise() - c).colwise().norm().mean());
    area.push_back(max_window_area(fold_eye(w)).area_mvps());
  }
  return least_squares_line(sigma, area);
}

}  // namespace sirep
