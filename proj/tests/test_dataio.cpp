#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "oqa/dataset.hpp"
#include "oqa/fsio.hpp"
#include "oqa/glyphs.hpp"
#include "oqa/idx.hpp"

using namespace oqa;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("oqa_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_be_u32(std::string& out, uint32_t v) {
  out += (char)((v >> 24) & 0xff);
  out += (char)((v >> 16) & 0xff);
  out += (char)((v >> 8) & 0xff);
  out += (char)(v & 0xff);
}

// Minimal IDX pair: two 2×2 images with labels 7 and 1.
void write_tiny_idx(const std::string& img_path, const std::string& lab_path) {
  std::string imgs;
  write_be_u32(imgs, 2051);
  write_be_u32(imgs, 2);
  write_be_u32(imgs, 2);
  write_be_u32(imgs, 2);
  const uint8_t px[8] = {0, 50, 100, 150, 200, 250, 10, 20};
  imgs.append((const char*)px, 8);
  atomic_write(img_path, imgs);

  std::string labs;
  write_be_u32(labs, 2049);
  write_be_u32(labs, 2);
  labs += (char)7;
  labs += (char)1;
  atomic_write(lab_path, labs);
}

CleanSet tiny_clean(int n) {
  CleanSet clean;
  for (int i = 0; i < n; ++i) {
    clean.images.push_back(render_glyph(i % 10, (uint64_t)i + 1));
    clean.labels.push_back(i % 10);
  }
  return clean;
}

}  // namespace

TEST_CASE("idx loader") {
  TempDir dir;
  const std::string img = dir.file("imgs");
  const std::string lab = dir.file("labs");
  write_tiny_idx(img, lab);

  const auto data = load_idx(img, lab);
  REQUIRE(data.size() == 2);
  CHECK(data[0].first.width == 2);
  CHECK(data[0].first.height == 2);
  CHECK(data[0].first.pixels[1] == 50);
  CHECK(data[0].second == 7);
  CHECK(data[1].second == 1);

  // swapped paths: label magic shows up where image magic is expected
  CHECK_THROWS_AS(load_idx(lab, img), FormatError);

  // count mismatch
  std::string labs3;
  write_be_u32(labs3, 2049);
  write_be_u32(labs3, 3);
  labs3 += std::string(3, '\0');
  atomic_write(dir.file("labs3"), labs3);
  CHECK_THROWS_AS(load_idx(img, dir.file("labs3")), ConsistencyError);

  // truncated image payload
  const std::string full = read_file(img);
  atomic_write(dir.file("trunc"), full.substr(0, full.size() - 3));
  CHECK_THROWS_AS(load_idx(dir.file("trunc"), lab), IoError);

  // empty file
  atomic_write(dir.file("empty"), "");
  CHECK_THROWS_AS(load_idx(dir.file("empty"), lab), IoError);

  CHECK_THROWS_AS(load_idx(dir.file("missing"), lab), IoError);
}

TEST_CASE("synth_dataset counts, determinism and spec fields") {
  const CleanSet clean = tiny_clean(20);

  for (Degradation kind :
       {Degradation::Blur, Degradation::Illumination, Degradation::Mixed}) {
    const auto samples = synth_dataset(clean, kind, 99);
    CHECK(samples.size() == clean.size() * 9);

    const auto again = synth_dataset(clean, kind, 99);
    REQUIRE(again.size() == samples.size());
    bool identical = true;
    for (size_t i = 0; i < samples.size(); ++i)
      identical = identical && samples[i].image.pixels == again[i].image.pixels &&
                  samples[i].spec.kernel == again[i].spec.kernel &&
                  samples[i].spec.contrast == again[i].spec.contrast &&
                  samples[i].spec.intensity == again[i].spec.intensity;
    CHECK(identical);
  }

  // blur ladder: each clean image gets each kernel exactly once
  const auto blur = synth_dataset(clean, Degradation::Blur, 5);
  for (size_t c = 0; c < clean.size(); ++c) {
    std::set<int> kernels;
    for (int v = 0; v < 9; ++v) kernels.insert(blur[c * 9 + (size_t)v].spec.kernel);
    CHECK(kernels == std::set<int>{3, 5, 7, 9, 11, 13, 15, 17, 19});
  }

  // illumination parameters stay on the documented grid
  const auto illum = synth_dataset(clean, Degradation::Illumination, 5);
  for (const auto& s : illum) {
    CHECK(s.spec.kernel == 0);
    CHECK(s.spec.contrast >= 0.4);
    CHECK(s.spec.contrast <= 0.9);
    CHECK(s.spec.intensity >= -160.0);
    CHECK(s.spec.intensity <= 250.0);
  }

  const auto mixed = synth_dataset(clean, Degradation::Mixed, 5);
  for (const auto& s : mixed) {
    CHECK(s.spec.kernel >= 3);
    CHECK(s.spec.contrast >= 0.4);
  }

  CHECK_THROWS_AS(synth_dataset(CleanSet{}, Degradation::Blur, 1), ParameterError);
}

TEST_CASE("make_ground_truth maps cosine into [0,1]") {
  CleanSet clean = tiny_clean(2);
  std::vector<LabeledSample> samples(2);
  samples[0].image = clean.images[0];
  samples[0].clean_id = 0;
  samples[0].label = clean.labels[0];
  samples[1].image = clean.images[1];
  samples[1].clean_id = 1;
  samples[1].label = clean.labels[1];

  // fabricated features: sample 0 equals its clean source, sample 1 is the
  // exact opposite of its source
  const auto features = [&](const std::vector<const GrayImage*>& imgs) {
    Mat f(3, (int)imgs.size());
    for (size_t j = 0; j < imgs.size(); ++j) {
      const bool is_clean1 = imgs[j] == &clean.images[1];
      const bool is_sample1 = imgs[j] == &samples[1].image;
      const double sign = is_sample1 ? -1.0 : 1.0;
      f.at(0, (int)j) = sign * (is_clean1 || is_sample1 ? 0.5 : 1.0);
      f.at(1, (int)j) = sign * 2.0;
      f.at(2, (int)j) = sign * -1.0;
    }
    return f;
  };
  make_ground_truth(samples, clean, features);
  CHECK(*samples[0].gt_score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*samples[1].gt_score == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<LabeledSample> bad(1);
  bad[0].clean_id = 5;
  CHECK_THROWS_AS(make_ground_truth(bad, clean, features), ConsistencyError);
}

TEST_CASE("train/test split partitions every class in half") {
  const CleanSet clean = tiny_clean(100);
  for (uint64_t seed : {1ull, 7ull, 13ull}) {
    const auto split = train_test_split(clean, seed);
    REQUIRE(split.size() == clean.size());
    int per_class_train[10] = {0};
    int per_class_total[10] = {0};
    for (size_t i = 0; i < split.size(); ++i) {
      ++per_class_total[clean.labels[i]];
      if (split[i]) ++per_class_train[clean.labels[i]];
    }
    for (int c = 0; c < 10; ++c)
      CHECK(per_class_train[c] == (per_class_total[c] + 1) / 2);
  }
  // different seeds give different splits
  CHECK(train_test_split(clean, 1) != train_test_split(clean, 2));
}

TEST_CASE("build_groups invariants hold for every generated group") {
  const CleanSet clean = tiny_clean(40);
  const auto samples = synth_dataset(clean, Degradation::Blur, 3);
  std::vector<int> eligible;
  for (size_t i = 0; i < samples.size(); ++i) eligible.push_back((int)i);

  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto intra = build_groups(samples, eligible, GroupKind::Intra, 50, 3, 10, seed);
    CHECK(intra.size() == 50);
    for (const auto& g : intra) {
      CHECK(g.members.size() >= 3);
      CHECK(g.members.size() <= 10);
      std::set<int> uniq(g.members.begin(), g.members.end());
      CHECK(uniq.size() == g.members.size());
      for (int m : g.members)
        CHECK(samples[(size_t)m].label == samples[(size_t)g.members[0]].label);
    }
    const auto inter = build_groups(samples, eligible, GroupKind::Inter, 50, 3, 10, seed);
    for (const auto& g : inter) {
      std::set<int> classes;
      for (int m : g.members) classes.insert(samples[(size_t)m].label);
      CHECK(classes.size() == g.members.size());
    }
  }

  // infeasible: inter groups need at least size distinct classes
  std::vector<int> two_classes;
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label <= 1) two_classes.push_back((int)i);
  CHECK_THROWS_AS(build_groups(samples, two_classes, GroupKind::Inter, 5, 3, 10, 1),
                  ParameterError);
  CHECK_THROWS_AS(build_groups(samples, eligible, GroupKind::Intra, 5, 2, 10, 1),
                  ParameterError);
}

TEST_CASE("triplet sampler draws same-class distinct indices") {
  const CleanSet clean = tiny_clean(40);
  const auto samples = synth_dataset(clean, Degradation::Blur, 3);
  std::vector<int> eligible;
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label != 9 || i % 36 == 0) eligible.push_back((int)i);

  const TripletSampler sampler(samples, eligible);
  Rng rng(4);
  const auto batch = sampler.next_batch(64, rng);
  CHECK(batch.size() == 64);
  for (const auto& t : batch) {
    CHECK(samples[(size_t)t[0]].label == samples[(size_t)t[1]].label);
    CHECK(samples[(size_t)t[1]].label == samples[(size_t)t[2]].label);
    CHECK(t[0] != t[1]);
    CHECK(t[1] != t[2]);
    CHECK(t[0] != t[2]);
  }
  // class 9 kept only a few samples; with fewer than 3 it is skipped
  if (sampler.skipped_classes() > 0) CHECK(sampler.usable_classes().size() < 10);

  CHECK_THROWS_AS(TripletSampler(samples, std::vector<int>{0, 1}), ParameterError);
}

TEST_CASE("manifest and image store round-trip") {
  const CleanSet clean = tiny_clean(4);
  auto samples = synth_dataset(clean, Degradation::Mixed, 17);
  samples[0].gt_score = 0.123456789;
  samples[3].gt_score = 1.0;

  const std::string csv = manifest_to_csv(samples);
  const auto back = manifest_from_csv(csv);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].clean_id == samples[i].clean_id);
    CHECK(back[i].label == samples[i].label);
    CHECK(back[i].spec.kind == samples[i].spec.kind);
    CHECK(back[i].spec.kernel == samples[i].spec.kernel);
    CHECK(back[i].spec.contrast == doctest::Approx(samples[i].spec.contrast));
    CHECK(back[i].spec.intensity == doctest::Approx(samples[i].spec.intensity));
    CHECK(back[i].gt_score.has_value() == samples[i].gt_score.has_value());
    if (back[i].gt_score)
      CHECK(*back[i].gt_score == doctest::Approx(*samples[i].gt_score).epsilon(1e-8));
  }
  CHECK_THROWS_AS(manifest_from_csv("bogus\n1,2\n"), FormatError);

  std::vector<const GrayImage*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s.image);
  const std::string packed = pack_images(ptrs);
  const auto unpacked = unpack_images(packed);
  REQUIRE(unpacked.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    CHECK(unpacked[i].pixels == samples[i].image.pixels);
  CHECK_THROWS_AS(unpack_images("XXXX"), FormatError);
  CHECK_THROWS_AS(unpack_images(packed.substr(0, packed.size() - 1)), FormatError);
}
