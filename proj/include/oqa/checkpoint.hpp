#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oqa/mat.hpp"

namespace oqa {

// Parameter container: magic "OQAP", u32 version, u32 section count, then
// per section a 4-char tag, u32 tensor count, and shape-prefixed f32
// tensors (u32 rows, u32 cols, row-major data). Training stages append or
// replace their own section ("EXT1", "RQA1", "AQA1").
class Checkpoint {
 public:
  void set_section(const std::string& tag, std::vector<Mat> tensors);
  const std::vector<Mat>* find(const std::string& tag) const;
  const std::vector<Mat>& require(const std::string& tag) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::string& path) const;  // atomic
  static Checkpoint load(const std::string& path);

  const std::vector<std::pair<std::string, std::vector<Mat>>>& sections() const {
    return sections_;
  }

 private:
  std::vector<std::pair<std::string, std::vector<Mat>>> sections_;
};

// Feature file: magic "OQAF", u32 count N, u32 dim C, f32 row-major
// (N rows of C values). `feats` is stored column-per-image (C×N).
std::string pack_features(const Mat& feats);
Mat unpack_features(const std::string& bytes);  // returns C×N

}  // namespace oqa
