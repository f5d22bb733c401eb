#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oqa/image.hpp"
#include "oqa/mat.hpp"
#include "oqa/rng.hpp"

namespace oqa {

enum class Degradation { Blur, Illumination, Mixed };

std::string degradation_name(Degradation d);
Degradation degradation_from_name(const std::string& s);

// Parameters of one synthesized pollution. Blur uses only `kernel`;
// Illumination only `contrast`/`intensity`; Mixed uses all three.
struct DegradationSpec {
  Degradation kind = Degradation::Blur;
  int kernel = 0;
  double contrast = 0.0;
  double intensity = 0.0;
};

struct LabeledSample {
  GrayImage image;
  int label = 0;
  int clean_id = 0;
  DegradationSpec spec;
  std::optional<double> gt_score;
};

// The undegraded source images.
struct CleanSet {
  std::vector<GrayImage> images;
  std::vector<int> labels;
  size_t size() const { return images.size(); }
};

// Blur kernel ladder of the synthesis protocol.
inline constexpr std::array<int, 9> kBlurKernels = {3, 5, 7, 9, 11, 13, 15, 17, 19};
inline constexpr int kVariantsPerClean = 9;

// Evenly spaced 6×6 grid of (contrast, intensity) pairs covering
// [0.4, 0.9] × [-160, 250].
double illumination_contrast_level(int idx);   // idx in [0, 5]
double illumination_intensity_level(int idx);  // idx in [0, 5]

// Emits exactly 9 variants per clean image. Blur walks the kernel ladder;
// Illumination draws 9 distinct grid cells per image; Mixed applies blur
// then illumination, pairing a shuffled kernel ladder with drawn cells.
// Per-image randomness is derived from (seed, clean index), so output is
// independent of evaluation order.
std::vector<LabeledSample> synth_dataset(const CleanSet& clean, Degradation kind,
                                         uint64_t seed);

// gt = (cosine(feat(clean source), feat(sample)) + 1) / 2 in [0, 1].
// `features` maps a list of images to a C×N column matrix.
void make_ground_truth(
    std::vector<LabeledSample>& samples, const CleanSet& clean,
    const std::function<Mat(const std::vector<const GrayImage*>&)>& features);

// Per-class halving of the clean ids; returns is_train flags indexed by
// clean id. Train and test partition the id range.
std::vector<uint8_t> train_test_split(const CleanSet& clean, uint64_t seed);

enum class GroupKind { Intra, Inter };

// Members index into the sample vector the group was built from.
struct GroupSample {
  std::vector<int> members;
  GroupKind kind = GroupKind::Intra;
};

// Builds n seeded groups with sizes uniform in [size_min, size_max] drawn
// from `eligible` sample indices. Intra groups share one class; Inter
// groups have pairwise-distinct classes. Throws ParameterError when the
// eligible pool cannot satisfy the constraints.
std::vector<GroupSample> build_groups(const std::vector<LabeledSample>& samples,
                                      const std::vector<int>& eligible,
                                      GroupKind kind, int n_groups, int size_min,
                                      int size_max, uint64_t seed);

// Draws batches of same-class triplets from an eligible index pool.
// Classes with fewer than three samples are skipped and counted.
class TripletSampler {
 public:
  TripletSampler(const std::vector<LabeledSample>& samples,
                 const std::vector<int>& eligible);

  // batch_size triplets of distinct sample indices, all same-class.
  std::vector<std::array<int, 3>> next_batch(int batch_size, Rng& rng) const;

  int skipped_classes() const { return skipped_; }
  const std::vector<std::vector<int>>& by_class() const { return by_class_; }
  const std::vector<int>& usable_classes() const { return usable_; }

 private:
  std::vector<std::vector<int>> by_class_;
  std::vector<int> usable_;
  int skipped_ = 0;
};

// Manifest CSV: sample_id,clean_id,label,kind,kernel,contrast,intensity,gt_score
std::string manifest_to_csv(const std::vector<LabeledSample>& samples);
// Restores everything except the images; pixel data lives in the OQAI store.
std::vector<LabeledSample> manifest_from_csv(const std::string& csv);

// Packed image store: magic "OQAI", u32 count, u8 width, u8 height, pixels.
std::string pack_images(const std::vector<const GrayImage*>& images);
std::vector<GrayImage> unpack_images(const std::string& bytes);

}  // namespace oqa
