#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sirep {

inline constexpr std::size_t kSegmentLength = 100;     // n_x
inline constexpr std::size_t kSegmentsPerSignal = 100;
inline constexpr std::size_t kSignalSamples = kSegmentLength * kSegmentsPerSignal;

/// Uniformly sampled voltage trace. Times are in picoseconds, voltages in volts.
struct Waveform {
  std::vector<double> samples;
  double dt_ps = 1.0;
  double ui_ps = 100.0;

  /// ui/dt; throws DataError unless it is a positive integer.
  std::size_t samples_per_ui() const;
  /// Number of whole UIs; throws DataError when the length is not a multiple.
  std::size_t ui_count() const;
};

enum class DistortionKind { none, isi, amplitude, harmonic, crosstalk };

std::string_view to_string(DistortionKind k);
DistortionKind distortion_from_string(std::string_view s);

struct ChannelPreset {
  std::string name;
  std::vector<double> isi_taps;  // UI-spaced FIR coefficients, main cursor first
  double noise_sigma = 0.0;      // volts
  double crosstalk_gain = 0.0;   // aggressor coupling
  double rise_time_ps = 30.0;

  void validate() const;
};

/// Channel stand-ins for the five collection cases plus an ideal channel:
/// "identity", "case1" .. "case5".
std::vector<ChannelPreset> standard_presets();
ChannelPreset preset_by_name(std::string_view name);

/// Maximal-length Fibonacci LFSR output. degree in {7, 9, 15}; the seed is
/// masked to `degree` bits and must stay nonzero.
std::vector<std::uint8_t> prbs_generate(int degree, std::uint32_t seed, std::size_t n_bits);

struct SynthesisOptions {
  double amplitude = 0.5;          // bit levels are +-amplitude volts
  double dt_ps = 1.0;
  double ui_ps = 100.0;
  std::size_t transient_uis = 3;   // dropped from the front
  std::size_t output_uis = 100;
};

/// Trapezoidal NRZ edges, UI-spaced FIR ISI, optional aggressor crosstalk and
/// additive Gaussian noise; the transient is discarded.
Waveform synthesize_waveform(std::span<const std::uint8_t> bits, const ChannelPreset& preset,
                             std::uint64_t rng_seed, const SynthesisOptions& options = {});

/// Linear interpolation of (times, values) onto a uniform grid over
/// [times.front(), times.back()].
Waveform resample_to_uniform(std::span<const double> times, std::span<const double> values,
                             double dt_ps = 1.0, double ui_ps = 100.0);

/// Distorted copy of `w`. severity in (0, 1]; severity -> 0 approaches identity.
Waveform inject_distortion(const Waveform& w, DistortionKind kind, double severity, std::uint64_t rng_seed);

struct SegmentSample {
  std::vector<double> x;  // kSegmentLength volts
  int y = 1;              // 1 valid, 0 invalid
  std::uint32_t source_id = 0;
  std::uint32_t index = 0;  // position within the source waveform
  DistortionKind distortion = DistortionKind::none;
};

/// Splits a kSignalSamples-long waveform into consecutive segments.
std::vector<SegmentSample> segment_waveform(const Waveform& w, int label, std::uint32_t source_id = 0,
                                            DistortionKind kind = DistortionKind::none);

// --- Dataset ------------------------------------------------------------------

struct DistortionSpec {
  DistortionKind kind = DistortionKind::isi;
  double severity_min = 0.5;
  double severity_max = 1.0;
};

struct GenerationConfig {
  std::uint64_t seed = 1;
  int prbs_degree = 15;
  std::vector<std::string> presets{"case1", "case2", "case3", "case4", "case5"};
  std::size_t n_valid = 50;    // waveforms
  std::size_t n_invalid = 50;  // waveforms
  std::vector<DistortionSpec> distortions{
      {DistortionKind::isi, 0.7, 1.0},
      {DistortionKind::amplitude, 0.8, 1.0},
      {DistortionKind::harmonic, 0.8, 1.0},
  };
  double train_fraction = 0.8;
  std::size_t max_attempts_per_waveform = 20;
  SynthesisOptions synthesis;
};

GenerationConfig generation_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationConfig& c);

/// Provenance of one generated waveform.
struct WaveformRecord {
  std::uint32_t source_id = 0;
  std::string preset;
  DistortionKind distortion = DistortionKind::none;
  double severity = 0.0;
  int label = 1;
  double window_width_ps = 0.0;
  bool in_train = true;
};

struct Dataset {
  std::vector<SegmentSample> train;
  std::vector<SegmentSample> test;
  std::uint64_t split_seed = 0;
  std::vector<WaveformRecord> waveforms;
  GenerationConfig config;

  std::size_t count(int label) const;
  /// Reassembles one waveform from its segments (train or test).
  Waveform waveform(std::uint32_t source_id) const;
};

/// Synthesizes, labels via eye analysis, and splits by waveform (80/20 per
/// label). Throws ConfigError when the configuration cannot yield both classes.
Dataset build_dataset(const GenerationConfig& config, std::uint64_t rng_seed);

/// Directory layout: meta.json + segments.csv.
void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace sirep
