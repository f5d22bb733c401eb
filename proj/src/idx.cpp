#include "oqa/idx.hpp"

#include <cstdint>
#include <fstream>

namespace oqa {

namespace {

uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX file: " + path);
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

std::vector<std::pair<GrayImage, int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path) {
  std::ifstream imgs = open_file(images_path);
  std::ifstream labs = open_file(labels_path);

  const uint32_t img_magic = read_be_u32(imgs, images_path);
  if (img_magic != 2051)
    throw FormatError("bad image magic " + std::to_string(img_magic) + " in " +
                      images_path + " (expected 2051)");
  const uint32_t lab_magic = read_be_u32(labs, labels_path);
  if (lab_magic != 2049)
    throw FormatError("bad label magic " + std::to_string(lab_magic) + " in " +
                      labels_path + " (expected 2049)");

  const uint32_t n_imgs = read_be_u32(imgs, images_path);
  const uint32_t rows = read_be_u32(imgs, images_path);
  const uint32_t cols = read_be_u32(imgs, images_path);
  const uint32_t n_labs = read_be_u32(labs, labels_path);
  if (n_imgs != n_labs)
    throw ConsistencyError("IDX count mismatch: " + std::to_string(n_imgs) +
                           " images vs " + std::to_string(n_labs) + " labels");
  if (rows == 0 || cols == 0 || rows > 512 || cols > 512)
    throw FormatError("implausible IDX image size " + std::to_string(rows) + "x" +
                      std::to_string(cols));

  std::vector<std::pair<GrayImage, int>> out;
  out.reserve(n_imgs);
  for (uint32_t i = 0; i < n_imgs; ++i) {
    GrayImage img(static_cast<int>(cols), static_cast<int>(rows));
    imgs.read(reinterpret_cast<char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!imgs) throw IoError("truncated IDX image data in " + images_path);
    char lab;
    labs.read(&lab, 1);
    if (!labs) throw IoError("truncated IDX label data in " + labels_path);
    out.emplace_back(std::move(img), static_cast<int>(static_cast<unsigned char>(lab)));
  }
  return out;
}

}  // namespace oqa
