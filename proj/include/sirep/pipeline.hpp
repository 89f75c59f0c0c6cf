#pragma once

#include "sirep/detectors.hpp"
#include "sirep/enhancement.hpp"
#include "sirep/network.hpp"
#include "sirep/separation.hpp"
#include "sirep/training.hpp"
#include "sirep/waveform.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sirep {

std::string sha256_hex(std::string_view bytes);
/// Throws DataError when the file cannot be read.
std::string sha256_file(const std::string& path);

/// Written as manifest.json next to the artifacts it lists. Output paths are
/// relative to the manifest's directory; inputs are stored as given.
struct RunManifest {
  std::string command;
  std::string tool_version = SIREP_VERSION;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object();
  std::string config_sha256;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256

  void add_input(const std::string& path);
  void add_output(const std::string& dir, const std::string& name);
};

nlohmann::json to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& dir);

struct VerifyResult {
  std::size_t checked = 0;
  std::vector<std::string> mismatched;
  std::vector<std::string> missing;
  bool ok() const { return mismatched.empty() && missing.empty(); }
};

/// Re-hashes every output (and every input still present) of a manifest.
VerifyResult verify_manifest(const std::string& manifest_path);

nlohmann::json read_json_file(const std::string& path);

// --- Commands -------------------------------------------------------------------
// Each writes its artifacts plus manifest.json into `out_dir` (created if needed).

struct GenerateOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string out_dir;
};
Dataset cmd_generate(const GenerateOptions& opt);

struct TrainOptions {
  std::string dataset_dir;
  Regime regime = Regime::proposed;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool force_anchor = false;  // post-hoc anchor for baseline1
  std::string out_dir;
};

/// model.bin (+ .json sidecar) and training_log.csv. Every regime except
/// baseline1 gets the Fermat-Weber anchor of the training valid latents.
ModelBundle cmd_train(const TrainOptions& opt);

struct EvaluateOptions {
  std::vector<std::string> model_paths;
  std::string dataset_dir;
  std::optional<std::string> config_path;  // DetectorSuiteConfig
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

struct ModelEvaluation {
  Regime regime = Regime::proposed;
  std::vector<DetectionReport> detectors;
  SeparationReport separation;
};

/// report.json keyed by regime, detectors.csv (merged table), one scores CSV
/// per model and detector.
std::vector<ModelEvaluation> cmd_evaluate(const EvaluateOptions& opt);

struct EnhanceOptions {
  std::string model_path;
  std::string dataset_dir;
  std::optional<double> alpha;
  std::string out_dir;
};

struct EnhanceReport {
  double alpha = 0.0;
  bool alpha_overridden = false;
  double max_train_rmse = 0.0;
  double lipschitz = 0.0;
  std::vector<SignalEnhancement> signals;
  ImprovementSummary summary;
  std::size_t segments = 0;
  std::size_t threshold_violations = 0;  // changed segments with d >= alpha
  LineFit slope;
};

/// enhancement.csv, summary.json and eye_before.svg / eye_after.svg for the
/// signal with the largest improvement.
EnhanceReport cmd_enhance(const EnhanceOptions& opt);

struct AblateOptions {
  std::string train_dataset_dir;  // valid + ISI invalid
  std::string test_dataset_dir;   // valid + crosstalk invalid
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string out_dir;
};

struct AblationRow {
  Regime regime = Regime::proposed;
  std::vector<DetectionReport> detectors;
};

/// Valid-gradient (proposed) against invalid-gradient training: models learn
/// on the training dataset's train split, detectors fit on those latents and
/// score the test dataset's test split. ablation.json and ablation.csv.
std::vector<AblationRow> cmd_ablate(const AblateOptions& opt);

struct ExportOptions {
  std::string model_path;
  std::string dataset_dir;
  std::string out_dir;
};

/// latents.csv: split, source_id, index, y, z_0..z_{d-1}
void cmd_export_latents(const ExportOptions& opt);

}  // namespace sirep
