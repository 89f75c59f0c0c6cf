#include "sirep/errors.hpp"
#include "sirep/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace sirep;

namespace {

void print_detectors(const std::string& name, const std::vector<DetectionReport>& reps) {
  for (const auto& d : reps) {
    std::printf("%-13s %-4s accuracy %7.2f%%  tnr %7.2f%%\n", name.c_str(), std::string(to_string(d.detector)).c_str(),
                d.accuracy, d.tnr);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sirep: latent representations for signal-integrity anomaly detection and enhancement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(SIREP_VERSION));

  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::string out;
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--config", config, "JSON config file");
  app.add_option("--out", out, "Output directory");

  auto* gen = app.add_subcommand("generate", "Synthesize and label a waveform dataset");

  auto* tr = app.add_subcommand("train", "Train one regime on a dataset");
  std::string dataset, regime = "proposed";
  std::optional<int> epochs;
  bool force_anchor = false;
  tr->add_option("--dataset", dataset, "Dataset directory")->required();
  tr->add_option("--regime", regime, "proposed | baseline1 | baseline2 | invalid_only");
  tr->add_option("--epochs", epochs, "Override the epoch count");
  tr->add_flag("--anchor", force_anchor, "Compute the anchor for baseline1 too");

  auto* ev = app.add_subcommand("evaluate", "Detector accuracy and latent separation");
  std::vector<std::string> models;
  ev->add_option("--model", models, "Model file (repeat for a merged table)")->required();
  ev->add_option("--dataset", dataset, "Dataset directory")->required();

  auto* en = app.add_subcommand("enhance", "Latent-space enhancement of the test signals");
  std::string model;
  std::optional<double> alpha;
  en->add_option("--model", model, "Model file with an anchor")->required();
  en->add_option("--dataset", dataset, "Dataset directory")->required();
  en->add_option("--alpha", alpha, "Dissimilarity bound (default: from training RMSE)");

  auto* ab = app.add_subcommand("ablate", "Valid-gradient vs invalid-gradient training");
  std::string train_ds, test_ds;
  ab->add_option("--train-dataset", train_ds, "Dataset with ISI invalid signals")->required();
  ab->add_option("--test-dataset", test_ds, "Dataset with crosstalk invalid signals")->required();
  ab->add_option("--epochs", epochs, "Override the epoch count");

  auto* ex = app.add_subcommand("export-latents", "Write latent vectors as CSV");
  ex->add_option("--model", model, "Model file")->required();
  ex->add_option("--dataset", dataset, "Dataset directory")->required();

  auto* ve = app.add_subcommand("verify", "Re-hash the files listed in a manifest");
  std::string manifest;
  ve->add_option("manifest", manifest, "manifest.json")->required();

  for (auto* s : {gen, tr, ev, en, ab, ex, ve}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const Dataset ds = cmd_generate({config, seed, out});
      std::printf("wrote %zu train / %zu test segments (%zu valid, %zu invalid) to %s\n", ds.train.size(), ds.test.size(),
                  ds.count(1), ds.count(0), out.c_str());
    } else if (tr->parsed()) {
      TrainOptions o;
      o.dataset_dir = dataset;
      o.regime = regime_from_string(regime);
      o.config_path = config;
      o.seed = seed;
      o.epochs = epochs;
      o.force_anchor = force_anchor;
      o.out_dir = out;
      const ModelBundle b = cmd_train(o);
      std::printf("trained %s model (%s anchor) in %s\n", std::string(to_string(b.regime)).c_str(),
                  b.anchor ? "with" : "without", out.c_str());
    } else if (ev->parsed()) {
      const auto evals = cmd_evaluate({models, dataset, config, seed, out});
      for (const auto& e : evals) {
        const std::string name(to_string(e.regime));
        print_detectors(name, e.detectors);
        std::printf("%-13s bhattacharyya %.4f  overlap %.2f%%  centroid distance %.4f\n", name.c_str(),
                    e.separation.bhattacharyya, e.separation.overlap_percent, e.separation.centroid_distance);
      }
    } else if (en->parsed()) {
      const EnhanceReport r = cmd_enhance({model, dataset, alpha, out});
      std::printf("alpha %.4g  L_D %.4g  signals %zu (%zu with open eyes)\n", r.alpha, r.lipschitz, r.summary.n_signals,
                  r.summary.n_with_pct);
      std::printf("improvement %%: mean %.2f std %.2f max %.2f min %.2f median %.2f\n", r.summary.mean, r.summary.std,
                  r.summary.max, r.summary.min, r.summary.median);
      std::printf("threshold violations %zu / %zu segments; slope %.4g\n", r.threshold_violations, r.segments,
                  r.slope.slope);
    } else if (ab->parsed()) {
      AblateOptions o;
      o.train_dataset_dir = train_ds;
      o.test_dataset_dir = test_ds;
      o.config_path = config;
      o.seed = seed;
      o.epochs = epochs;
      o.out_dir = out;
      for (const auto& row : cmd_ablate(o)) print_detectors(std::string(to_string(row.regime)), row.detectors);
    } else if (ex->parsed()) {
      cmd_export_latents({model, dataset, out});
      std::printf("wrote %s/latents.csv\n", out.c_str());
    } else if (ve->parsed()) {
      const VerifyResult r = verify_manifest(manifest);
      for (const auto& p : r.missing) std::printf("missing  %s\n", p.c_str());
      for (const auto& p : r.mismatched) std::printf("mismatch %s\n", p.c_str());
      std::printf("%s: %zu files checked\n", r.ok() ? "ok" : "FAILED", r.checked);
      return r.ok() ? 0 : 3;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
