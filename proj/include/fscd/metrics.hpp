#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fscd/raster.hpp"

namespace fscd {

// Pixelwise confusion counts with change (mask value 1) as the positive
// class. tp + fp + fn + tn equals the pixel count of the evaluated raster.
struct ConfusionCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
};

// 1 where p > threshold (strict: p == threshold maps to 0). Rejects a
// threshold or probability outside [0,1].
MaskU8 binarize(const RasterD& prob, double threshold = 0.5);

ConfusionCounts confusion(const MaskU8& pred, const MaskU8& truth);

// Ratios on the change class. If truth and prediction are both empty
// (tp = fp = fn = 0) every ratio is 1.0; otherwise a zero denominator
// yields 0.0.
double iou(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);

// Arithmetic mean over all pixels of an entropy raster (values in [0,1]
// bits).
double mean_entropy(const RasterD& map);

struct SceneMetrics {
  std::string id;
  double iou = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double mean_entropy = 0;
};

struct AggregateMetrics {
  double iou = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double mean_entropy = 0;
};

struct MetricsReport {
  std::vector<SceneMetrics> scenes;  // sorted by scene id
  AggregateMetrics aggregate;        // arithmetic mean over scenes
};

MetricsReport make_report(std::vector<SceneMetrics> scenes);

// JSON document with a per-scene array plus the aggregate object; CSV mirror
// with 6-decimal fixed-point ratios and a final "mean" row.
void write_report_json(const MetricsReport& report,
                       const std::filesystem::path& path);
void write_report_csv(const MetricsReport& report,
                      const std::filesystem::path& path);
MetricsReport load_report_json(const std::filesystem::path& path);

// One trained variant's test-split results plus its training-loss endpoints.
struct VariantResult {
  std::string variant;
  std::vector<SceneMetrics> scenes;
  double first_loss = 0;
  double final_loss = 0;
};

struct ComparisonRow {
  std::string variant;
  double precision = 0;
  double iou = 0;
  double mean_entropy = 0;
  double first_loss = 0;
  double final_loss = 0;
};

// One row per variant (pixel-level precision, change-class IoU, mean
// entropy). All variants must cover the same scene-id set.
std::vector<ComparisonRow> compare_variants(
    const std::vector<VariantResult>& results);

void write_comparison_json(const std::vector<ComparisonRow>& rows,
                           const std::filesystem::path& path);
void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::filesystem::path& path);
std::vector<ComparisonRow> load_comparison_json(
    const std::filesystem::path& path);

}  // namespace fscd
