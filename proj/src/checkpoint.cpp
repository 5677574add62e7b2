#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gaitgcn/model.hpp"

// Layout, all integers little-endian:
//   "GAITCKPT" | u32 version | u64 config length | config JSON
//   u64 tensor count | per tensor: u32 name length, name, u32 ndim,
//   u64 dims[ndim], f64 values[numel]
//   u64 FNV-1a hash of every preceding byte

namespace gaitgcn {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'I', 'T', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

void put_double(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put(out, bits);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_double(const char* what) {
    std::uint64_t bits = get<std::uint64_t>(what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what +
                            " at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  Shape shape;
  std::vector<double> values;
};

struct ParsedCheckpoint {
  ModelConfig config;
  std::map<std::string, StoredTensor> tensors;
};

ParsedCheckpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Reader header(bytes.substr(sizeof kMagic));
  auto version = header.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.get<std::uint64_t>("checksum") != fnv1a(body)) {
    throw CheckpointError("checkpoint checksum mismatch (file is corrupt or truncated)");
  }

  Reader r(body.substr(sizeof kMagic + 4));
  ParsedCheckpoint parsed;
  auto config_len = r.get<std::uint64_t>("config length");
  std::string_view config_text = r.take(config_len, "config");
  try {
    parsed.config = model_config_from_json(config_text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint config unreadable: ") + e.what());
  }
  auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = r.get<std::uint32_t>("name length");
    std::string name(r.take(name_len, "tensor name"));
    auto ndim = r.get<std::uint32_t>("rank");
    StoredTensor t;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.get<std::uint64_t>("dimension"));
      numel *= t.shape.back();
    }
    if (numel > r.remaining() / 8) {
      throw CheckpointError("checkpoint truncated in tensor '" + name + "'");
    }
    t.values.resize(numel);
    for (auto& v : t.values) v = r.get_double("values");
    if (!parsed.tensors.emplace(name, std::move(t)).second) {
      throw CheckpointError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint tensors");
  return parsed;
}

void restore(MultiStreamModel& model, const ParsedCheckpoint& parsed) {
  TensorList list = model.tensors();
  if (list.size() != parsed.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(parsed.tensors.size()) +
                          " tensors, model expects " + std::to_string(list.size()));
  }
  for (auto& nt : list) {
    auto it = parsed.tensors.find(nt.name);
    if (it == parsed.tensors.end()) throw CheckpointError("checkpoint lacks tensor '" + nt.name + "'");
    if (it->second.shape != nt.tensor.shape()) {
      throw CheckpointError("tensor '" + nt.name + "' has shape " + shape_str(it->second.shape) +
                            ", model expects " + shape_str(nt.tensor.shape()));
    }
    auto dst = nt.tensor.mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string serialize_checkpoint(const MultiStreamModel& model) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  std::string config = model_config_to_json(model.config());
  put<std::uint64_t>(out, config.size());
  out += config;
  TensorList list = model.tensors();
  put<std::uint64_t>(out, list.size());
  for (const auto& nt : list) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.ndim()));
    for (std::size_t d : nt.tensor.shape()) put<std::uint64_t>(out, d);
    for (double v : nt.tensor.data()) put_double(out, v);
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

void save_checkpoint(const MultiStreamModel& model, const std::filesystem::path& path) {
  std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

MultiStreamModel deserialize_checkpoint(std::string_view bytes) {
  ParsedCheckpoint parsed = parse_checkpoint(bytes);
  MultiStreamModel model(parsed.config);
  restore(model, parsed);
  return model;
}

MultiStreamModel load_checkpoint(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void load_checkpoint_into(MultiStreamModel& model, const std::filesystem::path& path) {
  ParsedCheckpoint parsed = parse_checkpoint(read_file(path));
  if (!(parsed.config == model.config())) {
    throw CheckpointError(path.string() + ": stored config " + model_config_to_json(parsed.config) +
                          " does not match model config " + model_config_to_json(model.config()));
  }
  restore(model, parsed);
}

}  // namespace gaitgcn
