#include <doctest.h>

#include "sirep/errors.hpp"
#include "sirep/pipeline.hpp"

#include <filesystem>
#include <fstream>

using namespace sirep;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sirep_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("sha256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const fs::path dir = scratch("sha");
  write_text(dir / "abc.txt", "abc");
  CHECK(sha256_file((dir / "abc.txt").string()) == sha256_hex("abc"));
  CHECK_THROWS_AS(sha256_file((dir / "nope.txt").string()), DataError);
  fs::remove_all(dir);
}

TEST_CASE("manifest verification detects tampering and missing files") {
  const fs::path dir = scratch("manifest");
  write_text(dir / "a.csv", "x,y\n1,2\n");
  write_text(dir / "b.json", "{}\n");
  write_text(dir / "input.txt", "source");
  RunManifest m;
  m.command = "test";
  m.seed = 9;
  m.add_input((dir / "input.txt").string());
  m.add_output(dir.string(), "a.csv");
  m.add_output(dir.string(), "b.json");
  write_manifest(m, dir.string());

  const auto j = read_json_file((dir / "manifest.json").string());
  CHECK(j["command"] == "test");
  CHECK(j["seed"] == 9);
  CHECK(j["outputs"].size() == 2);
  CHECK(j["tool_version"] == SIREP_VERSION);

  VerifyResult r = verify_manifest((dir / "manifest.json").string());
  CHECK(r.ok());
  CHECK(r.checked == 3);

  write_text(dir / "a.csv", "x,y\n1,3\n");
  r = verify_manifest((dir / "manifest.json").string());
  CHECK_FALSE(r.ok());
  CHECK(r.mismatched.size() == 1);

  fs::remove(dir / "b.json");
  r = verify_manifest((dir / "manifest.json").string());
  CHECK(r.missing.size() == 1);

  // inputs that have since disappeared are skipped
  write_text(dir / "a.csv", "x,y\n1,2\n");
  write_text(dir / "b.json", "{}\n");
  fs::remove(dir / "input.txt");
  r = verify_manifest((dir / "manifest.json").string());
  CHECK(r.ok());
  CHECK(r.checked == 2);

  CHECK_THROWS_AS(read_json_file((dir / "missing.json").string()), ConfigError);
  write_text(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(read_json_file((dir / "bad.json").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("small end-to-end run: generate, train, evaluate, enhance") {
  const fs::path dir = scratch("e2e");
  write_text(dir / "gen.json", R"({"seed": 3, "n_valid": 25, "n_invalid": 25})");
  write_text(dir / "train.json", R"({"epochs": 2, "lr0": 0.003})");
  write_text(dir / "det.json", R"({"lsa": {"centers": 50}, "nn": {"epochs": 5}})");

  const Dataset ds = cmd_generate({(dir / "gen.json").string(), std::nullopt, (dir / "data").string()});
  CHECK(ds.count(1) > 0);
  CHECK(ds.count(0) > 0);
  CHECK(fs::exists(dir / "data" / "segments.csv"));
  CHECK(verify_manifest((dir / "data" / "manifest.json").string()).ok());

  cmd_generate({(dir / "gen.json").string(), std::nullopt, (dir / "data2").string()});
  CHECK(read_text(dir / "data" / "segments.csv") == read_text(dir / "data2" / "segments.csv"));

  TrainOptions t;
  t.dataset_dir = (dir / "data").string();
  t.config_path = (dir / "train.json").string();
  t.out_dir = (dir / "proposed").string();
  const ModelBundle p = cmd_train(t);
  REQUIRE(p.anchor.has_value());
  CHECK(p.anchor->point.size() == 11);
  CHECK(fs::exists(dir / "proposed" / "training_log.csv"));

  t.out_dir = (dir / "proposed_again").string();
  cmd_train(t);
  CHECK(sha256_file((dir / "proposed" / "model.bin").string()) ==
        sha256_file((dir / "proposed_again" / "model.bin").string()));

  t.regime = Regime::baseline1;
  t.out_dir = (dir / "baseline1").string();
  const ModelBundle b1 = cmd_train(t);
  CHECK_FALSE(b1.anchor.has_value());
  CHECK_FALSE(b1.has_classifier());

  EvaluateOptions e;
  e.model_paths = {(dir / "proposed" / "model.bin").string(), (dir / "baseline1" / "model.bin").string()};
  e.dataset_dir = (dir / "data").string();
  e.config_path = (dir / "det.json").string();
  e.out_dir = (dir / "eval").string();
  const auto evals = cmd_evaluate(e);
  REQUIRE(evals.size() == 2);
  CHECK(evals[0].detectors.size() == 3);
  const auto report = read_json_file((dir / "eval" / "report.json").string());
  CHECK(report["models"].contains("proposed"));
  CHECK(report["models"].contains("baseline1"));
  CHECK(report["models"]["proposed"]["detectors"].size() == 3);

  e.model_paths = {(dir / "proposed" / "model.bin").string(), (dir / "proposed_again" / "model.bin").string()};
  CHECK_THROWS_AS(cmd_evaluate(e), ConfigError);

  CHECK_THROWS_AS(cmd_enhance({(dir / "baseline1" / "model.bin").string(), (dir / "data").string(), std::nullopt,
                               (dir / "enh_b1").string()}),
                  ModelError);
  const EnhanceReport er = cmd_enhance(
      {(dir / "proposed" / "model.bin").string(), (dir / "data").string(), 0.2, (dir / "enh").string()});
  CHECK(er.alpha == 0.2);
  CHECK(er.alpha_overridden);
  CHECK(er.threshold_violations == 0);
  const auto summary = read_json_file((dir / "enh" / "summary.json").string());
  for (const char* k : {"mean", "std", "max", "min", "median"}) CHECK(summary.contains(k));
  CHECK(fs::exists(dir / "enh" / "eye_before.svg"));
  CHECK(fs::exists(dir / "enh" / "eye_after.svg"));
  const auto man = read_json_file((dir / "enh" / "manifest.json").string());
  CHECK(man["parameters"]["alpha"] == 0.2);
  CHECK(verify_manifest((dir / "enh" / "manifest.json").string()).ok());

  CHECK_THROWS_AS(cmd_generate({(dir / "missing.json").string(), std::nullopt, (dir / "x").string()}), ConfigError);
  TrainOptions missing = t;
  missing.dataset_dir = (dir / "nowhere").string();
  CHECK_THROWS_AS(cmd_train(missing), DataError);
  fs::remove_all(dir);
}
