#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "deskflow/errors.hpp"
#include "deskflow/flow.hpp"

namespace deskflow {
namespace {

constexpr char kMagic[4] = {'P', 'I', 'E', 'H'};

void put_u32(std::ostream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value & 0xff), static_cast<char>((value >> 8) & 0xff),
                         static_cast<char>((value >> 16) & 0xff), static_cast<char>((value >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw LengthError(std::string("truncated .flo stream: ") + what);
}

}  // namespace

FlowField read_flo(std::istream& in) {
  unsigned char header[12];
  in.read(reinterpret_cast<char*>(header), 4);
  if (in.gcount() != 4 || std::memcmp(header, kMagic, 4) != 0) throw FormatError("bad .flo magic (expected PIEH)");
  read_exact(in, header + 4, 8, "header");
  const auto width = static_cast<std::int32_t>(get_u32(header + 4));
  const auto height = static_cast<std::int32_t>(get_u32(header + 8));
  if (width < 0 || height < 0 || (height > 0 && width > (1 << 30) / std::max(height, 1)))
    throw FormatError("implausible .flo dimensions");

  FlowField flow(width, height);
  std::vector<unsigned char> payload(flow.size() * 8);
  read_exact(in, payload.data(), payload.size(), "payload");
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const float u = std::bit_cast<float>(get_u32(&payload[8 * i]));
    const float v = std::bit_cast<float>(get_u32(&payload[8 * i + 4]));
    const bool unknown = !std::isfinite(u) || !std::isfinite(v) || std::fabs(u) > kUnknownFlowThreshold ||
                         std::fabs(v) > kUnknownFlowThreshold;
    flow.valid[i] = unknown ? 0 : 1;
    flow.u[i] = unknown ? 0.0 : u;
    flow.v[i] = unknown ? 0.0 : v;
  }
  return flow;
}

FlowField read_flo_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_flo(in);
}

void write_flo(std::ostream& out, const FlowField& flow) {
  flow.check_well_formed();
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(flow.width));
  put_u32(out, static_cast<std::uint32_t>(flow.height));
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const float u = flow.valid[i] ? static_cast<float>(flow.u[i]) : kUnknownFlowValue;
    const float v = flow.valid[i] ? static_cast<float>(flow.v[i]) : kUnknownFlowValue;
    put_u32(out, std::bit_cast<std::uint32_t>(u));
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw IoError("failed writing .flo stream");
}

void write_flo_file(const std::string& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_flo(out, flow);
}

std::string flo_bytes(const FlowField& flow) {
  std::ostringstream out(std::ios::binary);
  write_flo(out, flow);
  return out.str();
}

}  // namespace deskflow
