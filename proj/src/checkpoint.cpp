#include "moppo/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "moppo/hash.hpp"
#include "moppo/netlist.hpp"

namespace moppo {

namespace {

constexpr std::string_view kMagic = "MOPPOCKP";
constexpr std::size_t kDigest = 64;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::string_view take(std::size_t n) {
    if (n > data_.size() - pos_) throw CheckpointError("checkpoint is truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParameterSet& params, const nlohmann::json& meta) {
  std::string out(kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string m = meta.dump();
  put<std::uint64_t>(out, m.size());
  out += m;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.params().size()));
  for (const auto& p : params.params()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint64_t>(out, p.value.rows);
    put<std::uint64_t>(out, p.value.cols);
    out.append(reinterpret_cast<const char*>(p.value.data.data()), p.value.data.size() * sizeof(double));
  }
  out += sha256_hex(out);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < kMagic.size() + kDigest) throw CheckpointError("checkpoint is truncated");
  const auto body = bytes.substr(0, bytes.size() - kDigest);
  if (sha256_hex(body) != bytes.substr(bytes.size() - kDigest)) {
    throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated file)");
  }
  Reader r(body);
  r.take(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto meta_len = r.get<std::uint64_t>();
  try {
    ck.meta = nlohmann::json::parse(r.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.get<std::uint32_t>()));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (cols != 0 && rows > (body.size() / sizeof(double)) / cols) throw CheckpointError("checkpoint array too large");
    Matrix m(rows, cols);
    const auto raw = r.take(rows * cols * sizeof(double));
    std::memcpy(m.data.data(), raw.data(), raw.size());
    ck.params.add(std::move(name), std::move(m));
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const ParameterSet& params, const nlohmann::json& meta) {
  write_text_file_atomic(path, encode_checkpoint(params, meta));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_text_file(path)); }

}  // namespace moppo
