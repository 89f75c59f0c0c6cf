#include "sirep/pipeline.hpp"

#include "sirep/anchor.hpp"
#include "sirep/errors.hpp"
#include "sirep/eye.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace sirep {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("an output directory is required (--out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir + "'");
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_json(const std::string& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

void add_dataset_inputs(RunManifest& m, const std::string& dir) {
  m.add_input(join(dir, "meta.json"));
  m.add_input(join(dir, "segments.csv"));
}

Eigen::MatrixXd rows_with_label(const Eigen::MatrixXd& z, std::span<const int> labels, int label) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), z.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = z.row(idx[i]);
  return out;
}

TrainingConfig load_training_config(const std::optional<std::string>& path, RunManifest& m) {
  if (!path) return {};
  const std::string text = read_file(*path);
  m.config_sha256 = sha256_hex(text);
  m.add_input(*path);
  try {
    return training_config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad training config '" + *path + "': " + e.what());
  }
}

DetectorSuiteConfig load_detector_config(const std::optional<std::string>& path, RunManifest& m) {
  if (!path) return {};
  const std::string text = read_file(*path);
  m.config_sha256 = sha256_hex(text);
  m.add_input(*path);
  try {
    return detector_suite_config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad detector config '" + *path + "': " + e.what());
  }
}

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

nlohmann::json read_json_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("file not found: '" + path + "'");
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }

void RunManifest::add_output(const std::string& dir, const std::string& name) {
  outputs.emplace_back(name, sha256_file(join(dir, name)));
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json in = nlohmann::json::array(), out = nlohmann::json::array();
  for (const auto& [p, h] : m.inputs) in.push_back({{"path", p}, {"sha256", h}});
  for (const auto& [p, h] : m.outputs) out.push_back({{"path", p}, {"sha256", h}});
  nlohmann::json j = {{"command", m.command},   {"tool_version", m.tool_version}, {"seed", m.seed},
                      {"parameters", m.parameters}, {"inputs", in},              {"outputs", out}};
  j["config_sha256"] = m.config_sha256.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.config_sha256);
  return j;
}

void write_manifest(const RunManifest& m, const std::string& dir) { write_json(join(dir, "manifest.json"), to_json(m)); }

VerifyResult verify_manifest(const std::string& manifest_path) {
  const nlohmann::json j = read_json_file(manifest_path);
  if (!j.contains("outputs") || !j.contains("inputs")) throw DataError("'" + manifest_path + "' is not a run manifest");
  const fs::path base = fs::path(manifest_path).parent_path();
  VerifyResult r;
  auto check = [&](const std::string& path, const std::string& expected, bool required) {
    if (!fs::exists(path)) {
      if (required) r.missing.push_back(path);
      return;
    }
    ++r.checked;
    if (sha256_file(path) != expected) r.mismatched.push_back(path);
  };
  for (const auto& o : j["outputs"]) check((base / o.at("path").get<std::string>()).string(), o.at("sha256"), true);
  for (const auto& i : j["inputs"]) check(i.at("path").get<std::string>(), i.at("sha256"), false);
  return r;
}

// --- generate ---------------------------------------------------------------

Dataset cmd_generate(const GenerateOptions& opt) {
  RunManifest m;
  m.command = "generate";
  GenerationConfig cfg;
  if (opt.config_path) {
    if (!fs::exists(*opt.config_path)) throw ConfigError("config file not found: '" + *opt.config_path + "'");
    const std::string text = read_file(*opt.config_path);
    m.config_sha256 = sha256_hex(text);
    m.add_input(*opt.config_path);
    try {
      cfg = generation_config_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad generation config '" + *opt.config_path + "': " + e.what());
    }
  }
  if (opt.seed) cfg.seed = *opt.seed;
  ensure_dir(opt.out_dir);
  Dataset ds = build_dataset(cfg, cfg.seed);
  save_dataset(ds, opt.out_dir);
  m.seed = cfg.seed;
  m.parameters = to_json(cfg);
  m.add_output(opt.out_dir, "meta.json");
  m.add_output(opt.out_dir, "segments.csv");
  write_manifest(m, opt.out_dir);
  return ds;
}

// --- train ------------------------------------------------------------------

ModelBundle cmd_train(const TrainOptions& opt) {
  RunManifest m;
  m.command = "train";
  TrainingConfig cfg = load_training_config(opt.config_path, m);
  cfg.regime = opt.regime;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.epochs) cfg.epochs = *opt.epochs;
  cfg.validate();
  const Dataset ds = load_dataset(opt.dataset_dir);
  add_dataset_inputs(m, opt.dataset_dir);
  ensure_dir(opt.out_dir);

  TrainingResult result = train(ds.train, cfg);
  if (cfg.regime != Regime::baseline1 || opt.force_anchor) {
    const Eigen::MatrixXd z = encode_rows(result.bundle.encoder, segment_matrix(ds.train));
    const Eigen::MatrixXd valid = rows_with_label(z, segment_labels(ds.train), 1);
    if (valid.rows() == 0) throw DataError("no valid training segments for the anchor");
    result.bundle.anchor = fermat_weber(valid).info();
  }
  save_model(result.bundle, join(opt.out_dir, "model.bin"));
  write_training_log(result.log, join(opt.out_dir, "training_log.csv"));

  m.seed = cfg.seed;
  m.parameters = to_json(cfg);
  m.parameters["force_anchor"] = opt.force_anchor;
  m.add_output(opt.out_dir, "model.bin");
  m.add_output(opt.out_dir, "model.bin.json");
  m.add_output(opt.out_dir, "training_log.csv");
  write_manifest(m, opt.out_dir);
  return std::move(result.bundle);
}

// --- evaluate ---------------------------------------------------------------

std::vector<ModelEvaluation> cmd_evaluate(const EvaluateOptions& opt) {
  if (opt.model_paths.empty()) throw ConfigError("evaluate needs at least one --model");
  RunManifest m;
  m.command = "evaluate";
  DetectorSuiteConfig cfg = load_detector_config(opt.config_path, m);
  if (opt.seed) cfg.seed = *opt.seed;
  const Dataset ds = load_dataset(opt.dataset_dir);
  if (ds.test.empty()) throw DataError("test split of '" + opt.dataset_dir + "' is empty");
  add_dataset_inputs(m, opt.dataset_dir);
  std::vector<ModelBundle> models;
  for (const auto& p : opt.model_paths) {
    if (!fs::exists(p)) throw ModelError("model file not found: '" + p + "'");
    models.push_back(load_model(p));
    m.add_input(p);
  }
  std::map<std::string, int> seen;
  for (const auto& b : models) {
    if (seen[std::string(to_string(b.regime))]++) {
      throw ConfigError("two models share regime '" + std::string(to_string(b.regime)) + "'; evaluate them separately");
    }
  }
  ensure_dir(opt.out_dir);

  const Eigen::MatrixXd x_train = segment_matrix(ds.train);
  const Eigen::MatrixXd x_test = segment_matrix(ds.test);
  const std::vector<int> y_train = segment_labels(ds.train);
  const std::vector<int> y_test = segment_labels(ds.test);

  std::vector<ModelEvaluation> evals;
  nlohmann::json report = {{"n_train", ds.train.size()}, {"n_test", ds.test.size()}, {"detector_config", to_json(cfg)}};
  nlohmann::json by_regime = nlohmann::json::object();
  std::string table = "regime,detector,accuracy,tnr,threshold\n";
  std::vector<std::string> outputs;
  for (const auto& b : models) {
    if (b.input_dim() != kSegmentLength) throw ModelError("model input size does not match the segment length");
    ModelEvaluation e;
    e.regime = b.regime;
    const Eigen::MatrixXd z_train = encode_rows(b.encoder, x_train);
    const Eigen::MatrixXd z_test = encode_rows(b.encoder, x_test);
    e.detectors = run_detectors(z_train, y_train, z_test, y_test, cfg);
    e.separation = separation_report(rows_with_label(z_test, y_test, 1), rows_with_label(z_test, y_test, 0), cfg.seed);
    const std::string reg(to_string(b.regime));
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : e.detectors) {
      dets.push_back(to_json(d));
      const std::string name = "scores_" + reg + "_" + std::string(to_string(d.detector)) + ".csv";
      write_scores_csv(d, join(opt.out_dir, name));
      outputs.push_back(name);
      table += reg + "," + std::string(to_string(d.detector)) + "," + csv_number(d.accuracy) + "," + csv_number(d.tnr) +
               "," + csv_number(d.threshold) + "\n";
    }
    by_regime[reg] = {{"detectors", dets}, {"separation", to_json(e.separation)}};
    evals.push_back(std::move(e));
  }
  report["models"] = by_regime;
  write_json(join(opt.out_dir, "report.json"), report);
  write_file(join(opt.out_dir, "detectors.csv"), table);

  m.seed = cfg.seed;
  m.parameters = to_json(cfg);
  m.add_output(opt.out_dir, "report.json");
  m.add_output(opt.out_dir, "detectors.csv");
  for (const auto& o : outputs) m.add_output(opt.out_dir, o);
  write_manifest(m, opt.out_dir);
  return evals;
}

// --- enhance ----------------------------------------------------------------

EnhanceReport cmd_enhance(const EnhanceOptions& opt) {
  RunManifest m;
  m.command = "enhance";
  if (!fs::exists(opt.model_path)) throw ModelError("model file not found: '" + opt.model_path + "'");
  const ModelBundle b = load_model(opt.model_path);
  if (!b.anchor) {
    throw ModelError("model has no anchor; retrain with 'train --anchor' to compute one post hoc");
  }
  const Dataset ds = load_dataset(opt.dataset_dir);
  if (ds.test.empty()) throw DataError("test split of '" + opt.dataset_dir + "' is empty");
  m.add_input(opt.model_path);
  add_dataset_inputs(m, opt.dataset_dir);
  ensure_dir(opt.out_dir);

  EnhanceReport r;
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(b.anchor->point.data(),
                                                              static_cast<Eigen::Index>(b.anchor->point.size()));
  r.max_train_rmse = max_reconstruction_rmse(b.encoder, b.decoder, segment_matrix(ds.train));
  r.alpha = opt.alpha ? *opt.alpha : alpha_from_rmse(r.max_train_rmse);
  r.alpha_overridden = opt.alpha.has_value();
  if (!(r.alpha > 0.0)) throw ConfigError("alpha must be positive");
  r.lipschitz = decoder_lipschitz_estimate(b.decoder);

  std::vector<Waveform> originals;
  std::vector<std::uint32_t> ids;
  for (const auto& w : ds.waveforms) {
    if (w.in_train) continue;
    ids.push_back(w.source_id);
    originals.push_back(ds.waveform(w.source_id));
    std::vector<EnhancementResult> segs;
    SignalEnhancement s = enhance_waveform(originals.back(), c, b.encoder, b.decoder, r.alpha, r.lipschitz, &segs);
    s.source_id = w.source_id;
    s.label = w.label;
    for (const auto& e : segs) {
      ++r.segments;
      if (!e.unchanged && !(dissimilarity(e.x_original, e.x_enhanced) < r.alpha)) ++r.threshold_violations;
    }
    r.signals.push_back(std::move(s));
  }
  r.summary = summarize_improvement(r.signals);
  r.slope = si_slope_analysis(b.encoder, c, originals);

  write_enhancement_csv(r.signals, join(opt.out_dir, "enhancement.csv"));
  std::vector<std::string> outputs{"enhancement.csv"};
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < r.signals.size(); ++i) {
    if (r.signals[i].has_pct && (!best || r.signals[i].pct_improvement > r.signals[*best].pct_improvement)) best = i;
  }
  nlohmann::json summary = to_json(r.summary);
  summary["alpha"] = r.alpha;
  summary["alpha_overridden"] = r.alpha_overridden;
  summary["max_train_rmse"] = r.max_train_rmse;
  summary["decoder_lipschitz"] = r.lipschitz;
  summary["segments"] = r.segments;
  summary["threshold_violations"] = r.threshold_violations;
  summary["slope"] = {{"slope", r.slope.slope}, {"intercept", r.slope.intercept}};
  summary["best_signal"] = best ? nlohmann::json(r.signals[*best].source_id) : nlohmann::json(nullptr);
  if (best) {
    const auto& s = r.signals[*best];
    write_file(join(opt.out_dir, "eye_before.svg"),
               render_eye_svg(fold_eye(originals[*best]), s.window_before,
                              "signal " + std::to_string(s.source_id) + " original"));
    write_file(join(opt.out_dir, "eye_after.svg"),
               render_eye_svg(fold_eye(s.enhanced), s.window_after, "signal " + std::to_string(s.source_id) + " enhanced"));
    outputs.emplace_back("eye_before.svg");
    outputs.emplace_back("eye_after.svg");
  }
  write_json(join(opt.out_dir, "summary.json"), summary);
  outputs.emplace_back("summary.json");

  m.seed = b.meta.seed;
  m.parameters = {{"alpha", r.alpha}, {"alpha_overridden", r.alpha_overridden}};
  for (const auto& o : outputs) m.add_output(opt.out_dir, o);
  write_manifest(m, opt.out_dir);
  return r;
}

// --- ablate -----------------------------------------------------------------

std::vector<AblationRow> cmd_ablate(const AblateOptions& opt) {
  RunManifest m;
  m.command = "ablate";
  TrainingConfig cfg = load_training_config(opt.config_path, m);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.epochs) cfg.epochs = *opt.epochs;
  const Dataset train_ds = load_dataset(opt.train_dataset_dir);
  const Dataset test_ds = load_dataset(opt.test_dataset_dir);
  auto check = [](const Dataset& d, DistortionKind kind, const std::string& dir) {
    bool has_valid = false, has_invalid = false;
    for (const auto& w : d.waveforms) {
      if (w.label == 1) {
        has_valid = true;
      } else {
        has_invalid = true;
        if (w.distortion != kind) {
          throw DataError("'" + dir + "' must hold only " + std::string(to_string(kind)) + " invalid signals, found " +
                          std::string(to_string(w.distortion)));
        }
      }
    }
    if (!has_valid || !has_invalid) throw DataError("'" + dir + "' needs both valid and invalid signals");
  };
  check(train_ds, DistortionKind::isi, opt.train_dataset_dir);
  check(test_ds, DistortionKind::crosstalk, opt.test_dataset_dir);
  if (test_ds.test.empty()) throw DataError("test split of '" + opt.test_dataset_dir + "' is empty");
  add_dataset_inputs(m, opt.train_dataset_dir);
  add_dataset_inputs(m, opt.test_dataset_dir);
  ensure_dir(opt.out_dir);

  DetectorSuiteConfig dcfg;
  dcfg.seed = cfg.seed;
  const Eigen::MatrixXd x_train = segment_matrix(train_ds.train);
  const Eigen::MatrixXd x_test = segment_matrix(test_ds.test);
  const std::vector<int> y_train = segment_labels(train_ds.train);
  const std::vector<int> y_test = segment_labels(test_ds.test);

  std::vector<AblationRow> rows;
  nlohmann::json report = nlohmann::json::object();
  std::string table = "regime,detector,accuracy,tnr\n";
  for (Regime reg : {Regime::proposed, Regime::invalid_only}) {
    TrainingConfig c = cfg;
    c.regime = reg;
    const TrainingResult tr = train(train_ds.train, c);
    AblationRow row;
    row.regime = reg;
    row.detectors = run_detectors(encode_rows(tr.bundle.encoder, x_train), y_train,
                                  encode_rows(tr.bundle.encoder, x_test), y_test, dcfg);
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : row.detectors) {
      dets.push_back({{"detector", std::string(to_string(d.detector))}, {"accuracy", d.accuracy}, {"tnr", d.tnr}});
      table += std::string(to_string(reg)) + "," + std::string(to_string(d.detector)) + "," + csv_number(d.accuracy) +
               "," + csv_number(d.tnr) + "\n";
    }
    report[std::string(to_string(reg))] = dets;
    rows.push_back(std::move(row));
  }
  write_json(join(opt.out_dir, "ablation.json"), report);
  write_file(join(opt.out_dir, "ablation.csv"), table);

  m.seed = cfg.seed;
  m.parameters = to_json(cfg);
  m.add_output(opt.out_dir, "ablation.json");
  m.add_output(opt.out_dir, "ablation.csv");
  write_manifest(m, opt.out_dir);
  return rows;
}

// --- export-latents ---------------------------------------------------------

void cmd_export_latents(const ExportOptions& opt) {
  RunManifest m;
  m.command = "export-latents";
  if (!fs::exists(opt.model_path)) throw ModelError("model file not found: '" + opt.model_path + "'");
  const ModelBundle b = load_model(opt.model_path);
  const Dataset ds = load_dataset(opt.dataset_dir);
  m.add_input(opt.model_path);
  add_dataset_inputs(m, opt.dataset_dir);
  ensure_dir(opt.out_dir);

  std::ostringstream out;
  out.precision(17);
  out << "split,source_id,index,y";
  for (std::size_t k = 0; k < b.latent_dim(); ++k) out << ",z_" << k;
  out << '\n';
  auto emit = [&](const std::vector<SegmentSample>& set, const char* split) {
    if (set.empty()) return;
    const Eigen::MatrixXd z = encode_rows(b.encoder, segment_matrix(set));
    for (std::size_t i = 0; i < set.size(); ++i) {
      out << split << ',' << set[i].source_id << ',' << set[i].index << ',' << set[i].y;
      for (Eigen::Index k = 0; k < z.cols(); ++k) out << ',' << z(static_cast<Eigen::Index>(i), k);
      out << '\n';
    }
  };
  emit(ds.train, "train");
  emit(ds.test, "test");
  write_file(join(opt.out_dir, "latents.csv"), out.str());

  m.seed = b.meta.seed;
  m.add_output(opt.out_dir, "latents.csv");
  write_manifest(m, opt.out_dir);
}

}  // namespace sirep
