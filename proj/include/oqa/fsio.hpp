#pragma once

#include <cstdint>
#include <string>

#include "oqa/errors.hpp"

namespace oqa {

// Writes via a temp file and rename, so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

// Little-endian scalar append/read helpers for the binary containers.
void put_u32(std::string& out, uint32_t v);
void put_f32(std::string& out, float v);
uint32_t get_u32(const std::string& in, size_t& pos);
float get_f32(const std::string& in, size_t& pos);
void need_bytes(const std::string& in, size_t pos, size_t n, const std::string& what);

}  // namespace oqa
