#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oqa/dataset.hpp"
#include "oqa/errors.hpp"

namespace oqa {

// 1-based ranks; tied values get the average of their rank run.
std::vector<double> average_ranks(const std::vector<double>& v);

// Pearson correlation; throws UndefinedCorrelationError when either input
// is constant (or shorter than 2), DimensionError on length mismatch.
double lcc(const std::vector<double>& pred, const std::vector<double>& gt);

// Spearman: Pearson correlation of average ranks.
double srocc(const std::vector<double>& pred, const std::vector<double>& gt);

struct GroupMetrics {
  double mean_srocc = 0.0;
  double mean_lcc = 0.0;
  int used = 0;
  int dropped = 0;  // groups with undefined correlation
};

// Per-group SROCC/LCC against ground truth, then the unweighted mean.
GroupMetrics evaluate_groups(
    const std::vector<GroupSample>& groups,
    const std::function<std::vector<double>(const GroupSample&)>& scorer,
    const std::function<double(int)>& gt_of);

// Ordered frames of one object under varying degradation.
struct SequenceSample {
  std::vector<int> frames;  // sample indices
  int label = 0;
  int clean_id = 0;
};

// Fraction of sequences where the scorer's top frame carries the maximal
// ground-truth score (gt ties count as hits).
double qshr(const std::vector<SequenceSample>& sequences,
            const std::function<double(int)>& score_of,
            const std::function<double(int)>& gt_of);

struct FrameInfo {
  int predicted = 0;
  double confidence = 0.0;
  double score = 0.0;
};

// Majority vote over frames with score >= th; label ties break on mean
// confidence, then on the smaller label. When every frame is discarded,
// the single highest-scored frame decides.
int gated_vote(const std::vector<FrameInfo>& frames, double th);

// Sequence-level recognition accuracy of gated voting.
double sra(const std::vector<SequenceSample>& sequences,
           const std::function<FrameInfo(int)>& frame_of, double th);

struct ReportRow {
  std::string condition;
  std::string set;
  std::string scorer;
  std::string metric;
  double value = 0.0;
  int groups_used = 0;
  int groups_dropped = 0;
};

// CSV schema: condition,set,scorer,metric,value,groups_used,groups_dropped
std::string report_to_csv(const std::vector<ReportRow>& rows);
std::string report_to_text(const std::vector<ReportRow>& rows);

}  // namespace oqa
