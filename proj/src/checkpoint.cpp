#include "oqa/checkpoint.hpp"

#include "oqa/fsio.hpp"

namespace oqa {

namespace {
constexpr uint32_t kVersion = 1;
}

void Checkpoint::set_section(const std::string& tag, std::vector<Mat> tensors) {
  if (tag.size() != 4) throw ParameterError("checkpoint: tag must be 4 chars");
  for (auto& sec : sections_) {
    if (sec.first == tag) {
      sec.second = std::move(tensors);
      return;
    }
  }
  sections_.emplace_back(tag, std::move(tensors));
}

const std::vector<Mat>* Checkpoint::find(const std::string& tag) const {
  for (const auto& sec : sections_)
    if (sec.first == tag) return &sec.second;
  return nullptr;
}

const std::vector<Mat>& Checkpoint::require(const std::string& tag) const {
  const auto* sec = find(tag);
  if (!sec) throw ConsistencyError("checkpoint: missing section " + tag);
  return *sec;
}

std::string Checkpoint::serialize() const {
  std::string out = "OQAP";
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(sections_.size()));
  for (const auto& [tag, tensors] : sections_) {
    out += tag;
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const Mat& t : tensors) {
      put_u32(out, static_cast<uint32_t>(t.rows));
      put_u32(out, static_cast<uint32_t>(t.cols));
      for (double v : t.data) put_f32(out, static_cast<float>(v));
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  size_t pos = 0;
  need_bytes(bytes, pos, 4, "OQAP magic");
  if (bytes.compare(0, 4, "OQAP") != 0) throw FormatError("bad OQAP magic");
  pos = 4;
  const uint32_t version = get_u32(bytes, pos);
  if (version != kVersion)
    throw FormatError("unsupported OQAP version " + std::to_string(version));
  const uint32_t n_sections = get_u32(bytes, pos);
  Checkpoint cp;
  for (uint32_t s = 0; s < n_sections; ++s) {
    need_bytes(bytes, pos, 4, "section tag");
    const std::string tag = bytes.substr(pos, 4);
    pos += 4;
    const uint32_t n_tensors = get_u32(bytes, pos);
    std::vector<Mat> tensors;
    tensors.reserve(n_tensors);
    for (uint32_t t = 0; t < n_tensors; ++t) {
      const uint32_t rows = get_u32(bytes, pos);
      const uint32_t cols = get_u32(bytes, pos);
      Mat m(static_cast<int>(rows), static_cast<int>(cols));
      for (double& v : m.data) v = static_cast<double>(get_f32(bytes, pos));
      tensors.push_back(std::move(m));
    }
    cp.sections_.emplace_back(tag, std::move(tensors));
  }
  return cp;
}

void Checkpoint::save(const std::string& path) const {
  atomic_write(path, serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path));
}

std::string pack_features(const Mat& feats) {
  std::string out = "OQAF";
  put_u32(out, static_cast<uint32_t>(feats.cols));
  put_u32(out, static_cast<uint32_t>(feats.rows));
  // One row per image in the file.
  for (int j = 0; j < feats.cols; ++j)
    for (int i = 0; i < feats.rows; ++i) put_f32(out, static_cast<float>(feats.at(i, j)));
  return out;
}

Mat unpack_features(const std::string& bytes) {
  size_t pos = 0;
  need_bytes(bytes, pos, 4, "OQAF magic");
  if (bytes.compare(0, 4, "OQAF") != 0) throw FormatError("bad OQAF magic");
  pos = 4;
  const uint32_t n = get_u32(bytes, pos);
  const uint32_t c = get_u32(bytes, pos);
  Mat feats(static_cast<int>(c), static_cast<int>(n));
  for (uint32_t j = 0; j < n; ++j)
    for (uint32_t i = 0; i < c; ++i)
      feats.at(static_cast<int>(i), static_cast<int>(j)) =
          static_cast<double>(get_f32(bytes, pos));
  return feats;
}

}  // namespace oqa
