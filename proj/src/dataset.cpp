#include "oqa/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "oqa/fsio.hpp"

namespace oqa {

std::string degradation_name(Degradation d) {
  switch (d) {
    case Degradation::Blur:
      return "blur";
    case Degradation::Illumination:
      return "illumination";
    case Degradation::Mixed:
      return "mixed";
  }
  throw ParameterError("unknown degradation kind");
}

Degradation degradation_from_name(const std::string& s) {
  if (s == "blur") return Degradation::Blur;
  if (s == "illumination") return Degradation::Illumination;
  if (s == "mixed") return Degradation::Mixed;
  throw ParameterError("unknown degradation kind: " + s);
}

double illumination_contrast_level(int idx) {
  if (idx < 0 || idx > 5) throw ParameterError("contrast level index out of range");
  return 0.4 + 0.1 * idx;
}

double illumination_intensity_level(int idx) {
  if (idx < 0 || idx > 5) throw ParameterError("intensity level index out of range");
  return -160.0 + 82.0 * idx;
}

std::vector<LabeledSample> synth_dataset(const CleanSet& clean, Degradation kind,
                                         uint64_t seed) {
  if (clean.size() == 0) throw ParameterError("synth_dataset: empty clean set");
  const Rng base(seed);
  std::vector<LabeledSample> out;
  out.reserve(clean.size() * kVariantsPerClean);

  for (size_t ci = 0; ci < clean.size(); ++ci) {
    Rng rng = base.derive(ci);
    const GrayImage& src = clean.images[ci];

    std::vector<int> kernels(kBlurKernels.begin(), kBlurKernels.end());
    std::vector<int> cells;  // indices into the 6×6 illumination grid
    if (kind != Degradation::Blur) cells = rng.sample_without_replacement(36, 9);
    if (kind == Degradation::Mixed) rng.shuffle(kernels);

    for (int v = 0; v < kVariantsPerClean; ++v) {
      LabeledSample s;
      s.label = clean.labels[ci];
      s.clean_id = static_cast<int>(ci);
      s.spec.kind = kind;
      switch (kind) {
        case Degradation::Blur: {
          s.spec.kernel = kernels[static_cast<size_t>(v)];
          s.image = gaussian_blur(src, s.spec.kernel);
          break;
        }
        case Degradation::Illumination: {
          const int cell = cells[static_cast<size_t>(v)];
          s.spec.contrast = illumination_contrast_level(cell / 6);
          s.spec.intensity = illumination_intensity_level(cell % 6);
          s.image = adjust_illumination(src, s.spec.contrast, s.spec.intensity);
          break;
        }
        case Degradation::Mixed: {
          const int cell = cells[static_cast<size_t>(v)];
          s.spec.kernel = kernels[static_cast<size_t>(v)];
          s.spec.contrast = illumination_contrast_level(cell / 6);
          s.spec.intensity = illumination_intensity_level(cell % 6);
          s.image = adjust_illumination(gaussian_blur(src, s.spec.kernel),
                                        s.spec.contrast, s.spec.intensity);
          break;
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void make_ground_truth(
    std::vector<LabeledSample>& samples, const CleanSet& clean,
    const std::function<Mat(const std::vector<const GrayImage*>&)>& features) {
  for (const LabeledSample& s : samples)
    if (s.clean_id < 0 || static_cast<size_t>(s.clean_id) >= clean.size())
      throw ConsistencyError("make_ground_truth: missing clean source " +
                             std::to_string(s.clean_id));

  std::vector<const GrayImage*> clean_ptrs;
  clean_ptrs.reserve(clean.size());
  for (const GrayImage& im : clean.images) clean_ptrs.push_back(&im);
  const Mat clean_feats = features(clean_ptrs);

  std::vector<const GrayImage*> sample_ptrs;
  sample_ptrs.reserve(samples.size());
  for (const LabeledSample& s : samples) sample_ptrs.push_back(&s.image);
  const Mat sample_feats = features(sample_ptrs);

  const int C = clean_feats.rows;
  Mat a(C, 1), b(C, 1);
  for (size_t i = 0; i < samples.size(); ++i) {
    for (int r = 0; r < C; ++r) {
      a.at(r, 0) = clean_feats.at(r, samples[i].clean_id);
      b.at(r, 0) = sample_feats.at(r, static_cast<int>(i));
    }
    samples[i].gt_score = (cosine(a, b) + 1.0) / 2.0;
  }
}

std::vector<uint8_t> train_test_split(const CleanSet& clean, uint64_t seed) {
  std::vector<uint8_t> is_train(clean.size(), 0);
  Rng rng(seed);
  for (int cls = 0; cls <= 9; ++cls) {
    std::vector<int> ids;
    for (size_t i = 0; i < clean.size(); ++i)
      if (clean.labels[i] == cls) ids.push_back(static_cast<int>(i));
    rng.shuffle(ids);
    const size_t n_train = (ids.size() + 1) / 2;
    for (size_t i = 0; i < n_train; ++i) is_train[static_cast<size_t>(ids[i])] = 1;
  }
  return is_train;
}

std::vector<GroupSample> build_groups(const std::vector<LabeledSample>& samples,
                                      const std::vector<int>& eligible,
                                      GroupKind kind, int n_groups, int size_min,
                                      int size_max, uint64_t seed) {
  if (size_min < 3 || size_max > 10 || size_min > size_max)
    throw ParameterError("group sizes must satisfy 3 <= min <= max <= 10");
  std::vector<std::vector<int>> by_class(10);
  for (int idx : eligible) {
    if (idx < 0 || static_cast<size_t>(idx) >= samples.size())
      throw ParameterError("build_groups: eligible index out of range");
    by_class[static_cast<size_t>(samples[static_cast<size_t>(idx)].label)].push_back(idx);
  }

  Rng rng(seed);
  std::vector<GroupSample> groups;
  groups.reserve(static_cast<size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    const int size = rng.uniform_int(size_min, size_max);
    GroupSample grp;
    grp.kind = kind;
    if (kind == GroupKind::Intra) {
      std::vector<int> candidates;
      for (int c = 0; c < 10; ++c)
        if (static_cast<int>(by_class[static_cast<size_t>(c)].size()) >= size)
          candidates.push_back(c);
      if (candidates.empty())
        throw ParameterError("build_groups: no class has " + std::to_string(size) +
                             " eligible samples");
      const int cls = candidates[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
      const auto& pool = by_class[static_cast<size_t>(cls)];
      for (int k : rng.sample_without_replacement(static_cast<int>(pool.size()), size))
        grp.members.push_back(pool[static_cast<size_t>(k)]);
    } else {
      std::vector<int> classes;
      for (int c = 0; c < 10; ++c)
        if (!by_class[static_cast<size_t>(c)].empty()) classes.push_back(c);
      if (static_cast<int>(classes.size()) < size)
        throw ParameterError("build_groups: only " + std::to_string(classes.size()) +
                             " classes available for inter group of " +
                             std::to_string(size));
      for (int k : rng.sample_without_replacement(static_cast<int>(classes.size()), size)) {
        const auto& pool = by_class[static_cast<size_t>(classes[static_cast<size_t>(k)])];
        grp.members.push_back(pool[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(pool.size()) - 1))]);
      }
    }
    groups.push_back(std::move(grp));
  }
  return groups;
}

TripletSampler::TripletSampler(const std::vector<LabeledSample>& samples,
                               const std::vector<int>& eligible)
    : by_class_(10) {
  for (int idx : eligible)
    by_class_[static_cast<size_t>(samples[static_cast<size_t>(idx)].label)].push_back(idx);
  for (int c = 0; c < 10; ++c) {
    const size_t n = by_class_[static_cast<size_t>(c)].size();
    if (n >= 3)
      usable_.push_back(c);
    else if (n > 0)
      ++skipped_;
  }
  if (usable_.empty())
    throw ParameterError("triplet sampler: no class has 3 or more samples");
}

std::vector<std::array<int, 3>> TripletSampler::next_batch(int batch_size,
                                                           Rng& rng) const {
  std::vector<std::array<int, 3>> batch;
  batch.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const int cls = usable_[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(usable_.size()) - 1))];
    const auto& pool = by_class_[static_cast<size_t>(cls)];
    const auto pick = rng.sample_without_replacement(static_cast<int>(pool.size()), 3);
    batch.push_back({pool[static_cast<size_t>(pick[0])],
                     pool[static_cast<size_t>(pick[1])],
                     pool[static_cast<size_t>(pick[2])]});
  }
  return batch;
}

namespace {

constexpr const char* kManifestHeader =
    "sample_id,clean_id,label,kind,kernel,contrast,intensity,gt_score";

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string manifest_to_csv(const std::vector<LabeledSample>& samples) {
  std::string out = kManifestHeader;
  out += '\n';
  for (size_t i = 0; i < samples.size(); ++i) {
    const LabeledSample& s = samples[i];
    out += std::to_string(i);
    out += ',';
    out += std::to_string(s.clean_id);
    out += ',';
    out += std::to_string(s.label);
    out += ',';
    out += degradation_name(s.spec.kind);
    out += ',';
    if (s.spec.kind != Degradation::Illumination) out += std::to_string(s.spec.kernel);
    out += ',';
    if (s.spec.kind != Degradation::Blur) out += fmt("%.6f", s.spec.contrast);
    out += ',';
    if (s.spec.kind != Degradation::Blur) out += fmt("%.6f", s.spec.intensity);
    out += ',';
    if (s.gt_score) out += fmt("%.9f", *s.gt_score);
    out += '\n';
  }
  return out;
}

std::vector<LabeledSample> manifest_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw FormatError("manifest: bad header");
  std::vector<LabeledSample> out;
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw FormatError("manifest: bad field count in row " +
                                         std::to_string(row));
    if (static_cast<size_t>(std::stoul(f[0])) != row)
      throw ConsistencyError("manifest: non-sequential sample_id in row " +
                             std::to_string(row));
    LabeledSample s;
    s.clean_id = std::stoi(f[1]);
    s.label = std::stoi(f[2]);
    s.spec.kind = degradation_from_name(f[3]);
    if (!f[4].empty()) s.spec.kernel = std::stoi(f[4]);
    if (!f[5].empty()) s.spec.contrast = std::stod(f[5]);
    if (!f[6].empty()) s.spec.intensity = std::stod(f[6]);
    if (!f[7].empty()) s.gt_score = std::stod(f[7]);
    out.push_back(std::move(s));
    ++row;
  }
  return out;
}

std::string pack_images(const std::vector<const GrayImage*>& images) {
  if (images.empty()) throw ParameterError("pack_images: no images");
  const int w = images[0]->width;
  const int h = images[0]->height;
  if (w <= 0 || w > 255 || h <= 0 || h > 255)
    throw ParameterError("pack_images: dimensions must fit in a byte");
  std::string out = "OQAI";
  put_u32(out, static_cast<uint32_t>(images.size()));
  out += static_cast<char>(w);
  out += static_cast<char>(h);
  for (const GrayImage* im : images) {
    if (im->width != w || im->height != h)
      throw ConsistencyError("pack_images: mixed image sizes");
    out.append(reinterpret_cast<const char*>(im->pixels.data()), im->pixels.size());
  }
  return out;
}

std::vector<GrayImage> unpack_images(const std::string& bytes) {
  size_t pos = 0;
  need_bytes(bytes, pos, 4, "OQAI magic");
  if (bytes.compare(0, 4, "OQAI") != 0) throw FormatError("bad OQAI magic");
  pos = 4;
  const uint32_t count = get_u32(bytes, pos);
  need_bytes(bytes, pos, 2, "OQAI dims");
  const int w = static_cast<unsigned char>(bytes[pos++]);
  const int h = static_cast<unsigned char>(bytes[pos++]);
  const size_t stride = static_cast<size_t>(w) * static_cast<size_t>(h);
  std::vector<GrayImage> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    need_bytes(bytes, pos, stride, "OQAI pixels");
    GrayImage im(w, h);
    std::copy(bytes.begin() + static_cast<long>(pos),
              bytes.begin() + static_cast<long>(pos + stride), im.pixels.begin());
    pos += stride;
    out.push_back(std::move(im));
  }
  return out;
}

}  // namespace oqa
