#pragma once

#include <string>
#include <utility>
#include <vector>

#include "oqa/image.hpp"

namespace oqa {

// Reads an IDX image/label file pair (the MNIST container format:
// big-endian headers, magic 2051 for images and 2049 for labels).
// Throws FormatError on bad magic, ConsistencyError when the counts of
// the two files disagree, IoError on missing or truncated files.
std::vector<std::pair<GrayImage, int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path);

}  // namespace oqa
