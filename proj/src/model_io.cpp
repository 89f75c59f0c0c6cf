#include "sirep/errors.hpp"
#include "sirep/network.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace sirep {

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'S', 'I', 'R', 'E', 'P', 'M', 'D', 'L'};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw CorruptModelError("model file truncated");
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

void put_network(std::string& out, const Network& net) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put<double>(out, l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put<double>(out, l.bias(r));
  }
}

Network get_network(Reader& in) {
  Network net;
  const auto n_layers = in.get<std::uint32_t>();
  if (n_layers > 64) throw CorruptModelError("implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto in_dim = in.get<std::uint32_t>();
    const auto out_dim = in.get<std::uint32_t>();
    const auto act = in.get<std::uint32_t>();
    if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 16) || out_dim > (1u << 16)) {
      throw CorruptModelError("implausible layer shape");
    }
    if (act > static_cast<std::uint32_t>(Activation::linear)) throw CorruptModelError("unknown activation tag");
    DenseLayer l;
    l.activation = static_cast<Activation>(act);
    l.weight.resize(out_dim, in_dim);
    l.bias.resize(out_dim);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = in.get<double>();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = in.get<double>();
    net.layers.push_back(std::move(l));
  }
  return net;
}

nlohmann::json sidecar_json(const ModelBundle& b) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["regime"] = std::string(to_string(b.regime));
  j["latent_dim"] = b.latent_dim();
  j["has_classifier"] = b.has_classifier();
  j["training_meta"] = {{"epochs", b.meta.epochs},
                        {"batch_size", b.meta.batch_size},
                        {"lr0", b.meta.lr0},
                        {"decay", b.meta.decay},
                        {"decay_every_epochs", b.meta.decay_every_epochs},
                        {"lambda_contractive", b.meta.lambda_contractive},
                        {"seed", b.meta.seed}};
  if (b.anchor) {
    j["anchor"] = {{"point", b.anchor->point},
                   {"objective", b.anchor->objective},
                   {"iterations", b.anchor->iterations},
                   {"converged", b.anchor->converged}};
  } else {
    j["anchor"] = nullptr;
  }
  return j;
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
  bundle.validate();
  std::string bytes(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(bytes, kModelFormatVersion);
  put<std::uint32_t>(bytes, static_cast<std::uint32_t>(bundle.regime));
  put_network(bytes, bundle.encoder);
  put_network(bytes, bundle.decoder);
  put_network(bytes, bundle.classifier);
  put<std::uint64_t>(bytes, fnv1a(bytes));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot write model file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw ModelError("cannot write model sidecar '" + path + ".json'");
  side << sidecar_json(bundle).dump(2) << '\n';
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CorruptModelError("'" + path + "' is not a model file");
  }
  Reader r(std::string_view(bytes).substr(kMagic.size()));
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw ModelVersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
  }
  const auto regime = r.get<std::uint32_t>();
  if (regime > static_cast<std::uint32_t>(Regime::invalid_only)) throw CorruptModelError("unknown regime tag");

  ModelBundle b;
  b.regime = static_cast<Regime>(regime);
  b.encoder = get_network(r);
  b.decoder = get_network(r);
  b.classifier = get_network(r);
  const std::size_t body = kMagic.size() + r.position();
  const auto checksum = r.get<std::uint64_t>();
  if (body + sizeof(std::uint64_t) != bytes.size()) throw CorruptModelError("trailing bytes after model payload");
  if (checksum != fnv1a(bytes.substr(0, body))) throw CorruptModelError("model checksum mismatch");
  try {
    b.validate();
  } catch (const ModelError& e) {
    throw CorruptModelError(std::string("inconsistent model: ") + e.what());
  }

  const std::string side_path = path + ".json";
  if (std::filesystem::exists(side_path)) {
    std::ifstream side(side_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(side);
      const auto& m = j.at("training_meta");
      b.meta.epochs = m.at("epochs").get<int>();
      b.meta.batch_size = m.at("batch_size").get<int>();
      b.meta.lr0 = m.at("lr0").get<double>();
      b.meta.decay = m.at("decay").get<double>();
      b.meta.decay_every_epochs = m.value("decay_every_epochs", 1);
      b.meta.lambda_contractive = m.at("lambda_contractive").get<double>();
      b.meta.seed = m.at("seed").get<std::uint64_t>();
      if (j.contains("anchor") && !j["anchor"].is_null()) {
        const auto& a = j["anchor"];
        AnchorInfo info;
        info.point = a.at("point").get<std::vector<double>>();
        info.objective = a.at("objective").get<double>();
        info.iterations = a.at("iterations").get<int>();
        info.converged = a.at("converged").get<bool>();
        if (info.point.size() != b.latent_dim()) throw CorruptModelError("anchor dimension does not match latent space");
        b.anchor = std::move(info);
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorruptModelError("malformed model sidecar '" + side_path + "': " + e.what());
    }
  }
  return b;
}

}  // namespace sirep
