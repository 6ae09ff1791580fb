#include "deskflow/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deskflow/errors.hpp"

namespace deskflow::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr const char* kMagic = "deskflow-checkpoint v1";

template <typename V>
void put(std::string& out, V value) {
  char buf[sizeof(V)];
  std::memcpy(buf, &value, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  template <typename V>
  V get() {
    need(sizeof(V));
    V value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return value;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LengthError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_;
};

}  // namespace

std::string checkpoint_bytes(const ParamSet<float>& params, const std::string& config_hash) {
  std::string out = std::string(kMagic) + "\nconfig_hash " + config_hash + "\ntensors " +
                    std::to_string(params.items().size()) + "\nend\n";
  for (const auto& p : params.items()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, 4);
    const Shape s = p.var->value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put<std::int32_t>(out, d);
    out.append(reinterpret_cast<const char*>(p.var->value.data()), p.var->value.size() * sizeof(float));
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  const std::size_t end = bytes.find("\nend\n");
  if (bytes.rfind(kMagic, 0) != 0 || end == std::string::npos) throw FormatError("not a deskflow checkpoint");
  std::istringstream header(bytes.substr(0, end));
  std::string line, key;
  std::getline(header, line);
  Checkpoint ckpt;
  long long count = -1;
  while (header >> key) {
    if (key == "config_hash") header >> ckpt.config_hash;
    else if (key == "tensors") header >> count;
    else throw FormatError("unknown checkpoint header field: " + key);
  }
  if (count < 0) throw FormatError("checkpoint header lacks tensor count");

  Reader r(bytes, end + 5);
  for (long long i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.get_string(name_len);
    if (r.get<std::uint32_t>() != 4) throw FormatError("checkpoint tensor " + name + " is not 4-d");
    Shape s;
    s.n = r.get<std::int32_t>();
    s.c = r.get<std::int32_t>();
    s.h = r.get<std::int32_t>();
    s.w = r.get<std::int32_t>();
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw FormatError("negative shape in checkpoint");
    Tensor<float> t(s);
    r.get_floats(t.data(), t.size());
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params,
                     const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = checkpoint_bytes(params, config_hash);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

void assign_checkpoint(const Checkpoint& ckpt, ParamSet<float>& params) {
  if (ckpt.tensors.size() != params.items().size())
    throw FormatError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                      std::to_string(params.items().size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (!params.contains(name)) throw FormatError("checkpoint tensor not in model: " + name);
    Var<float> p = params.get(name);
    if (!(p->value.shape() == tensor.shape()))
      throw ShapeError("checkpoint tensor " + name + " has shape " + tensor.shape().str() + ", model expects " +
                       p->value.shape().str());
    p->value = tensor;
  }
}

}  // namespace deskflow::nn
