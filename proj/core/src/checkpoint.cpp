#include "hygrpo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hygrpo/config.hpp"
#include "hygrpo/error.hpp"

namespace hygrpo {

namespace {

constexpr std::string_view kMagic = "HYGRPOCK";

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_vector(std::string& out, const Vector& v) {
  for (double x : v.values()) put(out, x);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T value;
    std::memcpy(&value, take(sizeof(T), what).data(), sizeof(T));
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  Vector vector(std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    }
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = get<double>(what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const std::size_t n = ckpt.params.size();
  if (ckpt.reference.size() != n || ckpt.adam.m.size() != n || ckpt.adam.v.size() != n) {
    throw ShapeError("checkpoint vectors differ in length");
  }
  nlohmann::ordered_json header;
  header["format"] = "hygrpo-checkpoint";
  header["config_hash"] = hex(ckpt.config_hash);
  header["variant"] = ckpt.variant;
  header["seed"] = ckpt.seed;
  header["step"] = ckpt.step;
  header["adam_t"] = ckpt.adam.t;
  header["parameter_count"] = n;
  header["config"] = ckpt.config;
  const std::string text = header.dump();

  std::string out(kMagic);
  put(out, ckpt.version);
  put(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  put_vector(out, ckpt.params);
  put_vector(out, ckpt.reference);
  put_vector(out, ckpt.adam.m);
  put_vector(out, ckpt.adam.v);
  put(out, fnv1a64(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size(), "magic") != kMagic) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  Checkpoint c;
  c.version = r.get<std::uint32_t>("version");
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(c.version) +
                          " is not supported (expected version " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof(std::uint64_t)) throw CheckpointError("truncated checkpoint");
  const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  if (stored != fnv1a64(body)) throw CheckpointError("checkpoint checksum mismatch");

  const auto header_len = r.get<std::uint64_t>("header length");
  std::size_t n = 0;
  try {
    const auto header = nlohmann::json::parse(r.take(header_len, "header"));
    if (header.at("format") != "hygrpo-checkpoint") {
      throw CheckpointError("unexpected checkpoint format tag");
    }
    c.config_hash = std::stoull(header.at("config_hash").get<std::string>(), nullptr, 16);
    c.variant = header.at("variant").get<std::string>();
    c.seed = header.at("seed").get<std::uint64_t>();
    c.step = header.at("step").get<std::uint64_t>();
    c.adam.t = header.at("adam_t").get<std::uint64_t>();
    c.config = header.at("config").get<std::string>();
    n = header.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  c.params = r.vector(n, "parameters");
  c.reference = r.vector(n, "reference parameters");
  c.adam.m = r.vector(n, "adam m");
  c.adam.v = r.vector(n, "adam v");
  if (r.remaining() != sizeof(std::uint64_t)) {
    throw CheckpointError("unexpected trailing bytes in checkpoint");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return deserialize_checkpoint(s.str());
}

}  // namespace hygrpo
