#include "oqa/fsio.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace oqa {

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path);
  return bytes;
}

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

void put_f32(std::string& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

void need_bytes(const std::string& in, size_t pos, size_t n, const std::string& what) {
  if (pos + n > in.size()) throw FormatError("truncated data while reading " + what);
}

uint32_t get_u32(const std::string& in, size_t& pos) {
  need_bytes(in, pos, 4, "u32");
  const auto* b = reinterpret_cast<const unsigned char*>(in.data() + pos);
  pos += 4;
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

float get_f32(const std::string& in, size_t& pos) {
  const uint32_t u = get_u32(in, pos);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace oqa
