#include "sirep/errors.hpp"
#include "sirep/eye.hpp"
#include "sirep/rng.hpp"
#include "sirep/waveform.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace sirep {

namespace fs = std::filesystem;

std::size_t Dataset::count(int label) const {
  std::size_t n = 0;
  for (const auto& s : train) n += s.y == label;
  for (const auto& s : test) n += s.y == label;
  return n;
}

Waveform Dataset::waveform(std::uint32_t source_id) const {
  Waveform w;
  w.samples.assign(kSignalSamples, 0.0);
  std::size_t found = 0;
  for (const auto* part : {&train, &test}) {
    for (const auto& s : *part) {
      if (s.source_id != source_id) continue;
      std::copy(s.x.begin(), s.x.end(), w.samples.begin() + static_cast<std::ptrdiff_t>(s.index * kSegmentLength));
      ++found;
    }
  }
  if (found != kSegmentsPerSignal) {
    throw DataError("waveform " + std::to_string(source_id) + " has " + std::to_string(found) + " of " +
                    std::to_string(kSegmentsPerSignal) + " segments");
  }
  return w;
}

// --- Config JSON ------------------------------------------------------------

GenerationConfig generation_config_from_json(const nlohmann::json& j) {
  GenerationConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.prbs_degree = j.value("prbs_degree", c.prbs_degree);
    if (j.contains("presets")) c.presets = j.at("presets").get<std::vector<std::string>>();
    c.n_valid = j.value("n_valid", c.n_valid);
    c.n_invalid = j.value("n_invalid", c.n_invalid);
    if (j.contains("distortions")) {
      c.distortions.clear();
      for (const auto& d : j.at("distortions")) {
        DistortionSpec s;
        s.kind = distortion_from_string(d.at("kind").get<std::string>());
        s.severity_min = d.value("severity_min", s.severity_min);
        s.severity_max = d.value("severity_max", s.severity_max);
        c.distortions.push_back(s);
      }
    }
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.max_attempts_per_waveform = j.value("max_attempts_per_waveform", c.max_attempts_per_waveform);
    if (j.contains("synthesis")) {
      const auto& s = j.at("synthesis");
      c.synthesis.amplitude = s.value("amplitude", c.synthesis.amplitude);
      c.synthesis.transient_uis = s.value("transient_uis", c.synthesis.transient_uis);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed generation config: ") + e.what());
  }
  for (const auto& d : c.distortions) {
    if (d.kind == DistortionKind::none) throw ConfigError("distortion kind 'none' cannot be injected");
    if (!(d.severity_min > 0.0 && d.severity_min <= d.severity_max && d.severity_max <= 1.0)) {
      throw ConfigError("distortion severities must satisfy 0 < min <= max <= 1");
    }
  }
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  for (const auto& p : c.presets) preset_by_name(p);
  return c;
}

nlohmann::json to_json(const GenerationConfig& c) {
  nlohmann::json d = nlohmann::json::array();
  for (const auto& s : c.distortions) {
    d.push_back({{"kind", std::string(to_string(s.kind))},
                 {"severity_min", s.severity_min},
                 {"severity_max", s.severity_max}});
  }
  return {{"seed", c.seed},
          {"prbs_degree", c.prbs_degree},
          {"presets", c.presets},
          {"n_valid", c.n_valid},
          {"n_invalid", c.n_invalid},
          {"distortions", d},
          {"train_fraction", c.train_fraction},
          {"max_attempts_per_waveform", c.max_attempts_per_waveform},
          {"synthesis", {{"amplitude", c.synthesis.amplitude}, {"transient_uis", c.synthesis.transient_uis}}}};
}

// --- Generation -------------------------------------------------------------

namespace {

struct Candidate {
  Waveform wave;
  WaveformRecord record;
};

Waveform clean_waveform(const GenerationConfig& config, const ChannelPreset& preset, Rng& rng) {
  const std::uint32_t mask = (1u << config.prbs_degree) - 1u;
  std::uint32_t prbs_seed = 0;
  while (prbs_seed == 0) prbs_seed = static_cast<std::uint32_t>(rng()) & mask;
  const auto bits = prbs_generate(config.prbs_degree, prbs_seed,
                                  config.synthesis.transient_uis + config.synthesis.output_uis);
  return synthesize_waveform(bits, preset, rng(), config.synthesis);
}

}  // namespace

Dataset build_dataset(const GenerationConfig& config, std::uint64_t rng_seed) {
  if (config.presets.empty()) throw ConfigError("generation config lists no presets");
  if (config.n_valid + config.n_invalid == 0) throw ConfigError("generation config requests no waveforms");
  if (config.synthesis.output_uis != kSegmentsPerSignal || config.synthesis.dt_ps != 1.0 ||
      config.synthesis.ui_ps != 100.0) {
    throw ConfigError("dataset waveforms must be 100 UIs of 100 ps at 1 ps sampling");
  }
  std::vector<ChannelPreset> presets;
  for (const auto& name : config.presets) presets.push_back(preset_by_name(name));

  Dataset ds;
  ds.config = config;
  ds.config.seed = rng_seed;
  std::vector<Candidate> accepted;
  std::uint32_t next_id = 0;

  Rng valid_rng = make_rng(rng_seed, 11);
  for (std::size_t i = 0; i < config.n_valid; ++i) {
    const auto& preset = presets[i % presets.size()];
    bool ok = false;
    for (std::size_t attempt = 0; attempt < config.max_attempts_per_waveform && !ok; ++attempt) {
      Waveform w = clean_waveform(config, preset, valid_rng);
      const WindowFit fit = max_window_area(fold_eye(w));
      if (fit.width_ps > WindowSearch{}.required_width_ps) {
        accepted.push_back({std::move(w), {next_id++, preset.name, DistortionKind::none, 0.0, 1, fit.width_ps, true}});
        ok = true;
      }
    }
    if (!ok) throw ConfigError("preset '" + preset.name + "' did not yield a valid eye within the attempt budget");
  }

  Rng invalid_rng = make_rng(rng_seed, 12);
  for (std::size_t i = 0; i < config.n_invalid; ++i) {
    const auto& preset = presets[i % presets.size()];
    bool ok = false;
    for (std::size_t attempt = 0; attempt < config.max_attempts_per_waveform && !ok; ++attempt) {
      Waveform w = clean_waveform(config, preset, invalid_rng);
      DistortionKind kind = DistortionKind::none;
      double severity = 0.0;
      if (!config.distortions.empty()) {
        const auto& spec = config.distortions[i % config.distortions.size()];
        kind = spec.kind;
        severity = spec.severity_min + (spec.severity_max - spec.severity_min) * uniform01(invalid_rng);
        w = inject_distortion(w, kind, severity, invalid_rng());
      }
      const WindowFit fit = max_window_area(fold_eye(w));
      if (!(fit.width_ps > WindowSearch{}.required_width_ps)) {
        accepted.push_back({std::move(w), {next_id++, preset.name, kind, severity, 0, fit.width_ps, true}});
        ok = true;
      }
    }
    if (!ok) {
      if (config.distortions.empty()) {
        throw ConfigError("clean presets produced no invalid waveforms; add distortion kinds to the config");
      }
      throw ConfigError("distortions did not close the eye within the attempt budget; raise the severities");
    }
  }

  // Stratified split by waveform so every test signal keeps all its segments.
  ds.split_seed = derive_seed(rng_seed, 13);
  Rng split_rng(ds.split_seed);
  for (int label : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < accepted.size(); ++i)
      if (accepted[i].record.label == label) idx.push_back(i);
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(split_rng) * static_cast<double>(i));
      std::swap(idx[i - 1], idx[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::lround(config.train_fraction * static_cast<double>(idx.size())));
    for (std::size_t r = 0; r < idx.size(); ++r) accepted[idx[r]].record.in_train = r < n_train;
  }

  for (auto& c : accepted) {
    auto segs = segment_waveform(c.wave, c.record.label, c.record.source_id, c.record.distortion);
    auto& dest = c.record.in_train ? ds.train : ds.test;
    dest.insert(dest.end(), std::make_move_iterator(segs.begin()), std::make_move_iterator(segs.end()));
    ds.waveforms.push_back(c.record);
  }
  return ds;
}

// --- Persistence ------------------------------------------------------------

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw DataError("segments.csv line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

template <typename T>
T parse_uint(std::string_view field, std::size_t line) {
  T v{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw DataError("segments.csv line " + std::to_string(line) + ": bad integer '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create dataset directory '" + dir + "': " + ec.message());

  std::vector<const SegmentSample*> all;
  for (const auto& s : d.train) all.push_back(&s);
  for (const auto& s : d.test) all.push_back(&s);
  std::sort(all.begin(), all.end(), [](const SegmentSample* a, const SegmentSample* b) {
    return std::tie(a->source_id, a->index) < std::tie(b->source_id, b->index);
  });

  std::string csv = "source_id,index,y,distortion_kind";
  for (std::size_t i = 0; i < kSegmentLength; ++i) csv += ",x_" + std::to_string(i);
  csv += '\n';
  for (const auto* s : all) {
    csv += std::to_string(s->source_id) + ',' + std::to_string(s->index) + ',' + std::to_string(s->y) + ',' +
           std::string(to_string(s->distortion));
    for (double v : s->x) {
      csv += ',';
      append_double(csv, v);
    }
    csv += '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "segments.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + (fs::path(dir) / "segments.csv").string() + "'");
    out << csv;
  }

  nlohmann::json waves = nlohmann::json::array();
  std::size_t tv = 0, ti = 0, sv = 0, si = 0;
  for (const auto& s : d.train) (s.y ? tv : ti)++;
  for (const auto& s : d.test) (s.y ? sv : si)++;
  for (const auto& w : d.waveforms) {
    waves.push_back({{"source_id", w.source_id},
                     {"preset", w.preset},
                     {"distortion", std::string(to_string(w.distortion))},
                     {"severity", w.severity},
                     {"label", w.label},
                     {"window_width_ps", w.window_width_ps},
                     {"split", w.in_train ? "train" : "test"}});
  }
  const nlohmann::json meta = {
      {"format_version", 1},
      {"seed", d.config.seed},
      {"split_seed", d.split_seed},
      {"config", to_json(d.config)},
      {"counts",
       {{"train_valid", tv}, {"train_invalid", ti}, {"test_valid", sv}, {"test_invalid", si},
        {"total_segments", tv + ti + sv + si}}},
      {"waveforms", waves}};
  std::ofstream out(fs::path(dir) / "meta.json", std::ios::trunc);
  if (!out) throw DataError("cannot write '" + (fs::path(dir) / "meta.json").string() + "'");
  out << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  const fs::path meta_path = fs::path(dir) / "meta.json";
  const fs::path csv_path = fs::path(dir) / "segments.csv";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw DataError("missing dataset metadata '" + meta_path.string() + "'");
  Dataset d;
  std::map<std::uint32_t, bool> in_train;
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    d.config = generation_config_from_json(meta.at("config"));
    d.split_seed = meta.at("split_seed").get<std::uint64_t>();
    for (const auto& w : meta.at("waveforms")) {
      WaveformRecord r;
      r.source_id = w.at("source_id").get<std::uint32_t>();
      r.preset = w.at("preset").get<std::string>();
      r.distortion = distortion_from_string(w.at("distortion").get<std::string>());
      r.severity = w.at("severity").get<double>();
      r.label = w.at("label").get<int>();
      r.window_width_ps = w.at("window_width_ps").get<double>();
      r.in_train = w.at("split").get<std::string>() == "train";
      in_train[r.source_id] = r.in_train;
      d.waveforms.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed '" + meta_path.string() + "': " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("malformed '" + meta_path.string() + "': " + e.what());
  }

  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw DataError("missing dataset segments '" + csv_path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::getline(csv, line);
  ++line_no;
  if (line.rfind("source_id,index,y,distortion_kind", 0) != 0) throw DataError("segments.csv has an unexpected header");
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4 + kSegmentLength) {
      throw DataError("segments.csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(4 + kSegmentLength) + " columns, got " + std::to_string(fields.size()));
    }
    SegmentSample s;
    s.source_id = parse_uint<std::uint32_t>(fields[0], line_no);
    s.index = parse_uint<std::uint32_t>(fields[1], line_no);
    s.y = parse_uint<int>(fields[2], line_no);
    if (s.y != 0 && s.y != 1) throw DataError("segments.csv line " + std::to_string(line_no) + ": label must be 0/1");
    try {
      s.distortion = distortion_from_string(fields[3]);
    } catch (const ConfigError& e) {
      throw DataError("segments.csv line " + std::to_string(line_no) + ": " + e.what());
    }
    s.x.reserve(kSegmentLength);
    for (std::size_t i = 0; i < kSegmentLength; ++i) s.x.push_back(parse_double(fields[4 + i], line_no));
    const auto it = in_train.find(s.source_id);
    if (it == in_train.end()) {
      throw DataError("segments.csv line " + std::to_string(line_no) + ": source " + std::to_string(s.source_id) +
                      " not listed in meta.json");
    }
    (it->second ? d.train : d.test).push_back(std::move(s));
  }
  return d;
}

}  // namespace sirep
