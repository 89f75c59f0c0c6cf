#include "sirep/waveform.hpp"

#include "sirep/errors.hpp"
#include "sirep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sirep {

std::size_t Waveform::samples_per_ui() const {
  if (!(dt_ps > 0.0)) throw DataError("waveform dt must be positive");
  const double ratio = ui_ps / dt_ps;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw DataError("unit interval must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(rounded);
}

std::size_t Waveform::ui_count() const {
  const std::size_t spu = samples_per_ui();
  if (samples.size() % spu != 0) {
    throw DataError("waveform of " + std::to_string(samples.size()) + " samples is not a whole number of UIs (" +
                    std::to_string(spu) + " samples each)");
  }
  return samples.size() / spu;
}

std::string_view to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::none: return "none";
    case DistortionKind::isi: return "isi";
    case DistortionKind::amplitude: return "amplitude";
    case DistortionKind::harmonic: return "harmonic";
    case DistortionKind::crosstalk: return "crosstalk";
  }
  return "unknown";
}

DistortionKind distortion_from_string(std::string_view s) {
  if (s == "none") return DistortionKind::none;
  if (s == "isi") return DistortionKind::isi;
  if (s == "amplitude") return DistortionKind::amplitude;
  if (s == "harmonic") return DistortionKind::harmonic;
  if (s == "crosstalk") return DistortionKind::crosstalk;
  throw ConfigError("unknown distortion kind '" + std::string(s) + "'");
}

void ChannelPreset::validate() const {
  if (isi_taps.empty() || !(isi_taps.front() > 0.0)) {
    throw ConfigError("preset '" + name + "': isi_taps must be non-empty with a positive first tap");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("preset '" + name + "': noise_sigma must be >= 0");
  if (!(crosstalk_gain >= 0.0 && crosstalk_gain < 1.0)) {
    throw ConfigError("preset '" + name + "': crosstalk_gain must lie in [0, 1)");
  }
  if (!(rise_time_ps > 0.0)) throw ConfigError("preset '" + name + "': rise_time must be positive");
}

std::vector<ChannelPreset> standard_presets() {
  return {
      {"identity", {1.0}, 0.0, 0.0, 30.0},
      {"case1", {1.0}, 0.008, 0.0, 30.0},
      {"case2", {0.88, 0.12}, 0.010, 0.0, 34.0},
      {"case3", {0.84, 0.22, -0.06}, 0.010, 0.0, 38.0},
      {"case4", {0.80, 0.15, 0.05}, 0.012, 0.0, 42.0},
      {"case5", {0.80, 0.15, 0.05}, 0.012, 0.06, 42.0},
  };
}

ChannelPreset preset_by_name(std::string_view name) {
  for (auto& p : standard_presets())
    if (p.name == name) return p;
  throw ConfigError("unknown channel preset '" + std::string(name) + "'");
}

std::vector<std::uint8_t> prbs_generate(int degree, std::uint32_t seed, std::size_t n_bits) {
  int tap = 0;
  switch (degree) {
    case 7: tap = 6; break;    // x^7 + x^6 + 1
    case 9: tap = 5; break;    // x^9 + x^5 + 1
    case 15: tap = 14; break;  // x^15 + x^14 + 1
    default: throw ConfigError("PRBS degree must be 7, 9 or 15, got " + std::to_string(degree));
  }
  if (n_bits == 0) throw ConfigError("PRBS length must be >= 1");
  const std::uint32_t mask = (1u << degree) - 1u;
  std::uint32_t state = seed & mask;
  if (state == 0) throw ConfigError("PRBS seed must have a nonzero low " + std::to_string(degree) + " bits");

  std::vector<std::uint8_t> bits(n_bits);
  for (auto& b : bits) {
    const std::uint32_t fb = ((state >> (degree - 1)) ^ (state >> (tap - 1))) & 1u;
    b = static_cast<std::uint8_t>(state >> (degree - 1) & 1u);
    state = ((state << 1) | fb) & mask;
  }
  return bits;
}

namespace {

// NRZ trace built as a superposition of linear ramps of duration `rise` that
// start at each UI boundary where the level changes.
class NrzEdges {
 public:
  NrzEdges(std::span<const std::uint8_t> bits, double amplitude, double ui, double rise)
      : ui_(ui), rise_(rise), span_(static_cast<std::size_t>(std::ceil(rise / ui)) + 1) {
    levels_.reserve(bits.size());
    for (auto b : bits) levels_.push_back(b ? amplitude : -amplitude);
  }

  double at(double t) const {
    if (levels_.empty()) return 0.0;
    if (t <= 0.0) return levels_.front();
    const auto k_now = std::min(static_cast<std::size_t>(t / ui_), levels_.size() - 1);
    const std::size_t k_first = k_now > span_ ? k_now - span_ : 1;
    double v = levels_[k_first - 1];
    for (std::size_t k = k_first; k <= k_now; ++k) {
      const double step = levels_[k] - levels_[k - 1];
      if (step == 0.0) continue;
      const double tau = t - static_cast<double>(k) * ui_;
      v += step * std::clamp(tau / rise_, 0.0, 1.0);
    }
    return v;
  }

  // Derivative of at(t), in volts per ps.
  double slope(double t) const {
    if (levels_.empty() || t <= 0.0) return 0.0;
    const auto k_now = std::min(static_cast<std::size_t>(t / ui_), levels_.size() - 1);
    const std::size_t k_first = k_now > span_ ? k_now - span_ : 1;
    double s = 0.0;
    for (std::size_t k = k_first; k <= k_now; ++k) {
      const double tau = t - static_cast<double>(k) * ui_;
      if (tau >= 0.0 && tau < rise_) s += (levels_[k] - levels_[k - 1]) / rise_;
    }
    return s;
  }

 private:
  std::vector<double> levels_;
  double ui_;
  double rise_;
  std::size_t span_;
};

std::uint32_t nonzero_seed(Rng& rng, int degree) {
  const std::uint32_t mask = (1u << degree) - 1u;
  std::uint32_t s = 0;
  while (s == 0) s = static_cast<std::uint32_t>(rng()) & mask;
  return s;
}

// Derivative-coupled aggressor: a pulse of height gain * swing at each
// aggressor edge. The aggressor runs 5-15% slower than the victim, so its
// edges drift through every phase of the victim UI.
void add_crosstalk(std::vector<double>& samples, double t_offset, double dt, double ui, double amplitude,
                   double rise, double gain, Rng& rng) {
  const std::size_t n_ui = static_cast<std::size_t>(std::ceil((t_offset + samples.size() * dt) / ui)) + 2;
  const auto aggressor_bits = prbs_generate(15, nonzero_seed(rng, 15), n_ui);
  const double phase = uniform01(rng) * ui;
  const double aggressor_ui = ui * (1.05 + 0.1 * uniform01(rng));
  const NrzEdges aggressor(aggressor_bits, amplitude, aggressor_ui, rise);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = t_offset + static_cast<double>(i) * dt + phase;
    samples[i] += gain * rise * aggressor.slope(t);
  }
}

}  // namespace

Waveform synthesize_waveform(std::span<const std::uint8_t> bits, const ChannelPreset& preset,
                             std::uint64_t rng_seed, const SynthesisOptions& options) {
  preset.validate();
  const std::size_t needed = options.transient_uis + options.output_uis;
  if (bits.size() < needed) {
    throw DataError("synthesize_waveform needs at least " + std::to_string(needed) + " bits, got " +
                    std::to_string(bits.size()));
  }
  Waveform w;
  w.dt_ps = options.dt_ps;
  w.ui_ps = options.ui_ps;
  const std::size_t spu = w.samples_per_ui();
  const std::size_t total = needed * spu;

  const NrzEdges ideal(bits.first(needed), options.amplitude, options.ui_ps, preset.rise_time_ps);
  std::vector<double> full(total, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    const double t = static_cast<double>(i) * options.dt_ps;
    double v = 0.0;
    for (std::size_t m = 0; m < preset.isi_taps.size(); ++m) {
      v += preset.isi_taps[m] * ideal.at(t - static_cast<double>(m) * options.ui_ps);
    }
    full[i] = v;
  }
  if (preset.crosstalk_gain > 0.0) {
    Rng xt = make_rng(rng_seed, 2);
    add_crosstalk(full, 0.0, options.dt_ps, options.ui_ps, options.amplitude, preset.rise_time_ps,
                  preset.crosstalk_gain, xt);
  }
  if (preset.noise_sigma > 0.0) {
    Rng noise = make_rng(rng_seed, 1);
    for (auto& v : full) v += preset.noise_sigma * standard_normal(noise);
  }
  const std::size_t start = options.transient_uis * spu;
  w.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(start), full.end());
  return w;
}

Waveform resample_to_uniform(std::span<const double> times, std::span<const double> values, double dt_ps,
                             double ui_ps) {
  if (times.size() != values.size()) throw DataError("times and values differ in length");
  if (times.size() < 2) throw DataError("resampling needs at least two points");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw DataError("sample times must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  if (!(dt_ps > 0.0)) throw DataError("dt must be positive");
  const double span = times.back() - times.front();
  const auto n = static_cast<std::size_t>(std::floor(span / dt_ps + 1e-9)) + 1;
  Waveform w;
  w.dt_ps = dt_ps;
  w.ui_ps = ui_ps;
  w.samples.resize(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = times.front() + static_cast<double>(i) * dt_ps;
    while (seg + 2 < times.size() && times[seg + 1] <= t) ++seg;
    const double t0 = times[seg], t1 = times[seg + 1];
    const double frac = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    w.samples[i] = (1.0 - frac) * values[seg] + frac * values[seg + 1];
  }
  return w;
}

namespace {

constexpr double kIsiMaxTauPs = 120.0;
constexpr double kIsiEchoGain = 0.4;
constexpr double kHarmonic2 = 0.65;
constexpr double kHarmonic3 = 0.45;
constexpr double kCrosstalkCoupling = 0.95;

double peak_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// One-pole low-pass with delay compensation followed by a one-UI echo.
std::vector<double> isi_distortion(const Waveform& w, double severity) {
  const auto& x = w.samples;
  const std::size_t n = x.size();
  const std::size_t spu = w.samples_per_ui();
  const double tau = severity * kIsiMaxTauPs;
  const double a = 1.0 - std::exp(-w.dt_ps / tau);
  std::vector<double> lp(n);
  double state = x.empty() ? 0.0 : x.front();
  for (std::size_t i = 0; i < n; ++i) {
    state += a * (x[i] - state);
    lp[i] = state;
  }
  const auto delay = static_cast<std::size_t>(std::lround(tau * std::numbers::ln2 / w.dt_ps));
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = lp[std::min(i + delay, n - 1)];
  const double echo = kIsiEchoGain * severity;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double past = i >= spu ? shifted[i - spu] : shifted.front();
    out[i] = (1.0 - echo) * shifted[i] + echo * past;
  }
  return out;
}

// Per-UI gain drawn in [1 - 1.1 s, 1 - 0.5 s] (floored at 0), interpolated
// between UI centers.
std::vector<double> amplitude_distortion(const Waveform& w, double severity, Rng& rng) {
  const std::size_t spu = w.samples_per_ui();
  const std::size_t n = w.samples.size();
  const std::size_t n_ui = (n + spu - 1) / spu;
  std::vector<double> gain(n_ui);
  for (auto& g : gain) g = std::max(0.0, 1.0 - severity * (0.5 + 0.6 * uniform01(rng)));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(spu) - 0.5;
    double g;
    if (pos <= 0.0) {
      g = gain.front();
    } else if (pos >= static_cast<double>(n_ui - 1)) {
      g = gain.back();
    } else {
      const auto k = static_cast<std::size_t>(pos);
      const double f = pos - static_cast<double>(k);
      g = gain[k] + f * (gain[k + 1] - gain[k]);
    }
    out[i] = g * w.samples[i];
  }
  return out;
}

// Tones at 2x and 3x a fundamental 3-10% below that of the alternating
// pattern, 1/(2 UI), so they drift through the UI instead of folding onto it.
std::vector<double> harmonic_distortion(const Waveform& w, double severity, Rng& rng) {
  const double peak = peak_abs(w.samples);
  const double f0 = 1.0 / (2.0 * w.ui_ps * (1.03 + 0.07 * uniform01(rng)));
  const double phi2 = 2.0 * std::numbers::pi * uniform01(rng);
  const double phi3 = 2.0 * std::numbers::pi * uniform01(rng);
  std::vector<double> out(w.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = static_cast<double>(i) * w.dt_ps;
    const double tone = kHarmonic2 * std::sin(2.0 * std::numbers::pi * 2.0 * f0 * t + phi2) +
                        kHarmonic3 * std::sin(2.0 * std::numbers::pi * 3.0 * f0 * t + phi3);
    out[i] = w.samples[i] + severity * peak * tone;
  }
  return out;
}

}  // namespace

Waveform inject_distortion(const Waveform& w, DistortionKind kind, double severity, std::uint64_t rng_seed) {
  if (!(severity > 0.0 && severity <= 1.0)) throw ConfigError("distortion severity must lie in (0, 1]");
  w.samples_per_ui();
  Rng rng = make_rng(rng_seed, 7);
  Waveform out = w;
  switch (kind) {
    case DistortionKind::isi: out.samples = isi_distortion(w, severity); break;
    case DistortionKind::amplitude: out.samples = amplitude_distortion(w, severity, rng); break;
    case DistortionKind::harmonic: out.samples = harmonic_distortion(w, severity, rng); break;
    case DistortionKind::crosstalk: {
      const double peak = peak_abs(w.samples);
      add_crosstalk(out.samples, 0.0, w.dt_ps, w.ui_ps, peak > 0.0 ? peak : 0.5, 30.0,
                    kCrosstalkCoupling * severity, rng);
      break;
    }
    case DistortionKind::none:
      throw ConfigError("inject_distortion needs a distortion kind other than 'none'");
  }
  return out;
}

std::vector<SegmentSample> segment_waveform(const Waveform& w, int label, std::uint32_t source_id,
                                            DistortionKind kind) {
  if (w.samples.size() != kSignalSamples || w.dt_ps != 1.0) {
    throw DataError("segment_waveform expects " + std::to_string(kSignalSamples) + " samples at dt = 1 ps, got " +
                    std::to_string(w.samples.size()));
  }
  if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
  std::vector<SegmentSample> out(kSegmentsPerSignal);
  for (std::size_t s = 0; s < kSegmentsPerSignal; ++s) {
    auto& seg = out[s];
    const auto first = w.samples.begin() + static_cast<std::ptrdiff_t>(s * kSegmentLength);
    seg.x.assign(first, first + static_cast<std::ptrdiff_t>(kSegmentLength));
    seg.y = label;
    seg.source_id = source_id;
    seg.index = static_cast<std::uint32_t>(s);
    seg.distortion = kind;
  }
  return out;
}

}  // namespace sirep
