#include "intent_rnnt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {
namespace {

constexpr char kMagic[8] = {'I', 'R', 'N', 'T', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated checkpoint");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.value;
  throw ParseError("checkpoint has no array named '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, checkpoint.format_version);
  put_u64(out, checkpoint.config_json.size());
  out += checkpoint.config_json;
  put_u64(out, checkpoint.arrays.size());
  for (const auto& a : checkpoint.arrays) {
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u64(out, a.value.rows());
    put_u64(out, a.value.cols());
    for (double v : a.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint file (bad magic)");
  Reader in(bytes);
  in.str(sizeof(kMagic));
  Checkpoint ck;
  ck.format_version = in.u32();
  if (ck.format_version != kCheckpointFormatVersion) {
    std::ostringstream msg;
    msg << "unsupported checkpoint format version " << ck.format_version;
    throw ParseError(msg.str());
  }
  ck.config_json = in.str(in.u64());
  const std::uint64_t n = in.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    NamedArray a;
    a.name = in.str(in.u32());
    const std::uint64_t rows = in.u64();
    const std::uint64_t cols = in.u64();
    if (rows != 0 && cols > (bytes.size() / 8) / rows) throw ParseError("checkpoint array '" + a.name + "' too large");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = std::bit_cast<double>(in.u64());
    a.value = Tensor(rows, cols, std::move(data));
    ck.arrays.push_back(std::move(a));
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint arrays");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

Checkpoint checkpoint_from_params(std::string config_json, const ParamList& params) {
  Checkpoint ck;
  ck.config_json = std::move(config_json);
  for (const auto& p : params) {
    Tensor copy(p.tensor->rows(), p.tensor->cols(),
                std::vector<double>(p.tensor->data().begin(), p.tensor->data().end()));
    ck.arrays.push_back({p.name, std::move(copy)});
  }
  return ck;
}

void load_params(const Checkpoint& checkpoint, const ParamList& params) {
  for (const auto& p : params) {
    const Tensor& src = checkpoint.array(p.name);
    if (src.rows() != p.tensor->rows() || src.cols() != p.tensor->cols())
      throw DimensionError("checkpoint array '" + p.name + "' has the wrong shape");
    std::copy(src.data().begin(), src.data().end(), p.tensor->data().begin());
  }
}

std::uint64_t param_checksum(const ParamList& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    for (unsigned char c : p.name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    feed(p.tensor->rows());
    feed(p.tensor->cols());
    for (double v : p.tensor->data()) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace intent_rnnt
