#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sam3unet/tensor.hpp"

namespace sam3unet {

/// All metrics take a prediction map in [0,1] and a binary ground truth of
/// the same (H,W) shape and return a value in [0,1].

double mae(const Tensor& pred, const Tensor& gt);

/// Jaccard index after binarizing the prediction at `threshold`; both-empty
/// masks score 1.
double iou(const Tensor& pred, const Tensor& gt, double threshold = 0.5);

enum class FMode { kAdaptive, kMax };

/// F-measure with beta^2 = 0.3. Adaptive mode thresholds at
/// min(2*mean(pred), 1); max mode takes the best score over 256 uniform
/// thresholds in (0,1]. An all-zero prediction selects no pixels even at
/// threshold zero.
double f_measure(const Tensor& pred, const Tensor& gt, double beta2 = 0.3,
                 FMode mode = FMode::kAdaptive);

/// Structure measure: alpha * object term + (1-alpha) * region term
/// (quadrant SSIM around the foreground centroid). Degenerate masks:
/// all-zero gt scores 1 - mean(pred), all-one gt scores mean(pred).
double s_measure(const Tensor& pred, const Tensor& gt, double alpha = 0.5);

/// Enhanced-alignment measure averaged over 256 uniform thresholds in
/// (0,1]. Degenerate gt uses the complement/identity enhancement maps.
double e_measure_mean(const Tensor& pred, const Tensor& gt);

struct DatasetMetrics {
  double iou = 0.0;
  double f_measure = 0.0;
  double mae = 0.0;
  double s_measure = 0.0;
  double e_measure_mean = 0.0;
  int64_t count = 0;
  std::vector<std::string> unmatched;  // gt stems without a prediction
};

struct MetricsReport {
  std::map<std::string, DatasetMetrics> datasets;

  /// One "dataset.metric = value" line per entry, 4 decimal places.
  std::string to_text() const;
  std::string to_json() const;
  void write(const std::filesystem::path& dir, const std::string& stem = "report") const;
};

/// Compares grayscale prediction images (0-255) against binary ground-truth
/// images matched by filename stem; predictions are resized bilinearly to
/// the ground-truth resolution when needed. Unmatched ground-truth stems are
/// skipped and listed, or fatal in strict mode.
DatasetMetrics evaluate_folder(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& gt_dir,
                               FMode f_mode = FMode::kAdaptive, bool strict = false);

}  // namespace sam3unet
