#include "leakaudit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "leakaudit/error.hpp"
#include "leakaudit/hash.hpp"

namespace leakaudit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'K', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  void read(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint: truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    read(&v, sizeof v);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string serialize_parameters(const ParameterStore& store) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(store.all().size()));
  for (const auto& [name, p] : store.all()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(p.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.cols()));
    const Matrix& v = p.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const float f = static_cast<float>(v.data()[i]);
      out.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  return out;
}

std::map<std::string, Matrix> parse_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("checkpoint: bad magic");
  const std::uint32_t count = in.u32();
  std::map<std::string, Matrix> out;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name(in.u32(), '\0');
    in.read(name.data(), name.size());
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      float f = 0.0f;
      in.read(&f, sizeof f);
      m.data()[i] = f;
    }
    if (!out.emplace(std::move(name), std::move(m)).second)
      throw DataError("checkpoint: duplicate parameter name");
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes");
  return out;
}

void deserialize_parameters(const std::string& bytes, ParameterStore& store) {
  auto values = parse_checkpoint(bytes);
  if (values.size() != store.all().size())
    throw DataError("checkpoint: parameter count differs from the model");
  for (const auto& [name, p] : store.all()) {
    auto it = values.find(name);
    if (it == values.end()) throw DataError("checkpoint: missing parameter '" + name + "'");
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols())
      throw DataError("checkpoint: shape mismatch for '" + name + "'");
  }
  for (auto& [name, p] : store.all()) {
    Var handle = p;
    handle.mutable_value() = std::move(values.at(name));
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = serialize_parameters(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
  deserialize_parameters(read_file(path), store);
}

void save_manifest(const std::filesystem::path& path, const ModelManifest& m) {
  nlohmann::ordered_json j;
  j["encoder"] = std::string(to_string(m.spec.encoder));
  j["decoder"] = std::string(to_string(m.spec.decoder));
  j["num_items"] = m.spec.num_items;
  j["M"] = m.spec.M;
  j["N"] = m.spec.N;
  j["d"] = m.spec.d;
  j["heads"] = m.spec.heads;
  j["dropout"] = m.spec.dropout;
  j["activation"] = std::string(to_string(m.spec.activation));
  j["epsilon"] = m.spec.effective_epsilon();
  j["sequence_label_smoothing"] = m.spec.sequence_label_smoothing;
  j["vocab_fingerprint"] = to_hex(m.vocab_fingerprint);
  j["seed"] = m.seed;
  j["checkpoint_hash"] = m.checkpoint_hash;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ModelManifest load_manifest(const std::filesystem::path& path) {
  ModelManifest m;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    m.spec.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
    m.spec.decoder = parse_decoder_kind(j.at("decoder").get<std::string>());
    m.spec.num_items = j.at("num_items").get<int>();
    m.spec.M = j.at("M").get<int>();
    m.spec.N = j.at("N").get<int>();
    m.spec.d = j.at("d").get<int>();
    m.spec.heads = j.at("heads").get<int>();
    m.spec.dropout = j.at("dropout").get<double>();
    m.spec.activation = parse_activation(j.at("activation").get<std::string>());
    m.spec.epsilon = j.at("epsilon").get<double>();
    m.spec.sequence_label_smoothing = j.at("sequence_label_smoothing").get<bool>();
    m.vocab_fingerprint = std::stoull(j.at("vocab_fingerprint").get<std::string>(), nullptr, 16);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.checkpoint_hash = j.value("checkpoint_hash", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace leakaudit
