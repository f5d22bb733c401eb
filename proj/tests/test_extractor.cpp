#include <doctest.h>

#include "oqa/checkpoint.hpp"
#include "oqa/extractor.hpp"
#include "oqa/glyphs.hpp"
#include "oqa/image.hpp"

using namespace oqa;

namespace {

CleanSet glyph_set(int n) {
  CleanSet clean;
  for (int i = 0; i < n; ++i) {
    clean.images.push_back(render_glyph(i % 10, (uint64_t)i * 31 + 5));
    clean.labels.push_back(i % 10);
  }
  return clean;
}

ExtractorParams quick_extractor(const CleanSet& clean, int epochs = 25) {
  std::vector<int> ids;
  for (size_t i = 0; i < clean.size(); ++i) ids.push_back((int)i);
  PretrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch = 16;
  cfg.hidden = 48;
  cfg.feature_dim = 16;
  return pretrain(clean, ids, cfg, 7);
}

}  // namespace

TEST_CASE("pretrain reaches high accuracy on a small clean set") {
  const CleanSet clean = glyph_set(80);
  std::vector<int> ids;
  for (size_t i = 0; i < clean.size(); ++i) ids.push_back((int)i);
  PretrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch = 16;
  cfg.hidden = 48;
  cfg.feature_dim = 16;
  std::vector<PretrainEpoch> history;
  const ExtractorParams p = pretrain(clean, ids, cfg, 7, &history);
  REQUIRE(!history.empty());
  CHECK(history.back().accuracy >= 0.9);
  CHECK(history.back().loss < history.front().loss);
  CHECK(p.feature_dim() == 16);

  CHECK_THROWS_AS(pretrain(clean, {}, cfg, 7), ParameterError);
}

TEST_CASE("features are deterministic with the documented shape") {
  const CleanSet clean = glyph_set(20);
  const ExtractorParams p = quick_extractor(clean, 5);

  std::vector<const GrayImage*> imgs = {&clean.images[0], &clean.images[1],
                                        &clean.images[0]};
  const Mat f = features(p, imgs);
  CHECK(f.rows == 16);
  CHECK(f.cols == 3);
  for (int r = 0; r < f.rows; ++r) CHECK(f.at(r, 0) == f.at(r, 2));  // same image

  const Mat again = features(p, imgs);
  CHECK(f.data == again.data);
}

TEST_CASE("recognition output contract") {
  const CleanSet clean = glyph_set(60);
  const ExtractorParams p = quick_extractor(clean);
  const Prediction pred = recognize(p, clean.images[0]);
  CHECK(pred.logits.rows == 10);
  CHECK(pred.logits.all_finite());
  CHECK(pred.predicted >= 0);
  CHECK(pred.predicted <= 9);
  CHECK(pred.confidence > 0.0);
  CHECK(pred.confidence <= 1.0);
  const int d = correctness_indicator(pred, clean.labels[0]);
  CHECK((d == -1 || d == 1));
  CHECK(d == (pred.predicted == clean.labels[0] ? -1 : 1));
}

TEST_CASE("heavy blur moves features away from the clean image") {
  const CleanSet clean = glyph_set(60);
  const ExtractorParams p = quick_extractor(clean);
  const GrayImage blurred = gaussian_blur(clean.images[0], 19);
  const Mat f = features(p, {&clean.images[0], &blurred});
  Mat a(f.rows, 1), b(f.rows, 1);
  for (int r = 0; r < f.rows; ++r) {
    a.at(r, 0) = f.at(r, 0);
    b.at(r, 0) = f.at(r, 1);
  }
  CHECK(cosine(a, b) < 1.0);
}

TEST_CASE("extractor checkpoint round-trip stores f32") {
  const CleanSet clean = glyph_set(20);
  const ExtractorParams p = quick_extractor(clean, 3);
  Checkpoint cp;
  cp.set_section("EXT1", p.tensors());
  const Checkpoint back = Checkpoint::deserialize(cp.serialize());
  const ExtractorParams q = ExtractorParams::from_tensors(back.require("EXT1"));
  REQUIRE(q.w1.same_shape(p.w1));
  for (size_t i = 0; i < p.w1.data.size(); ++i)
    CHECK(q.w1.data[i] == (double)(float)p.w1.data[i]);
  CHECK_THROWS_AS(back.require("RQA1"), ConsistencyError);
}

TEST_CASE("feature file round-trip") {
  Rng rng(3);
  const Mat f = Mat::random_normal(8, 5, 1.0, rng);
  const Mat back = unpack_features(pack_features(f));
  REQUIRE(back.same_shape(f));
  for (size_t i = 0; i < f.data.size(); ++i)
    CHECK(back.data[i] == (double)(float)f.data[i]);
  CHECK_THROWS_AS(unpack_features("ZZZZ"), FormatError);
}
