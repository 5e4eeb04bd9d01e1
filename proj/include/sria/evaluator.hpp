#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sria/raster.hpp"

namespace sria::eval {

struct Detection {
    std::string image_id;
    int class_id = 0;
    BoxF bbox;
    double confidence = 1.0;
};

struct GroundTruth {
    std::string image_id;
    int class_id = 0;
    BoxF bbox;
};

/// Intersection over union of two half-open boxes; 0 when either is empty.
double iou(const BoxF& a, const BoxF& b);

struct MatchResult {
    /// Per detection, in input order: index of the matched ground truth or -1.
    std::vector<int> assigned_gt;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// Greedy matching for one image and class. Detections are visited in
/// descending confidence (ties keep input order); each takes the unmatched
/// ground truth with the highest IoU at or above the threshold.
MatchResult match(std::span<const BoxF> dets, std::span<const double> confidences,
                  std::span<const BoxF> gts, double iou_threshold);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double confidence = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // one per detection, descending confidence
    std::size_t gt_count = 0;
};

/// PR curve of one class at one IoU threshold over every image.
PrCurve pr_curve(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                 double iou_threshold);

enum class Interpolation { coco101, all_point };

/// Area under the precision envelope. coco101 averages the envelope at
/// recall 0.00, 0.01, ..., 1.00; all_point integrates it exactly.
double average_precision(const PrCurve& curve, Interpolation mode = Interpolation::coco101);

struct EvalOptions {
    std::vector<double> iou_thresholds;  // empty: 0.50, 0.55, ..., 0.95
    double confidence_threshold = 0.25;
    double pr_iou_threshold = 0.5;
    Interpolation interpolation = Interpolation::coco101;
};

std::vector<double> coco_thresholds();

struct ClassReport {
    int class_id = 0;
    std::size_t gt_count = 0;
    std::vector<double> ap;  // one per IoU threshold
    double precision = 0.0;
    double recall = 0.0;
};

struct EvalReport {
    std::vector<double> iou_thresholds;
    std::vector<ClassReport> classes;  // classes with ground truth, ascending id
    double map_50 = 0.0;
    double map_50_95 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double confidence_threshold = 0.25;

    nlohmann::json to_json() const;
    /// Columns: mAP (0.5), mAP (0.5-0.95), Precision, Recall, then per class.
    std::string to_table(const std::map<int, std::string>& names = {}) const;
};

/// Throws InvalidArgument when there is no ground truth at all.
/// mAP_50 is the mean class AP at the threshold closest to 0.5.
EvalReport map_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                     const EvalOptions& options = {});

struct EvalInputs {
    std::vector<Detection> detections;
    std::vector<GroundTruth> ground_truth;
};

/// Ground truth from `gt_dir/*.txt` and predictions from `pred_dir/*.txt`
/// (six columns). Boxes stay normalized; IoU does not depend on the scale.
/// A prediction file without a ground-truth counterpart is a DataError.
EvalInputs read_detector_dirs(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir);

/// Ground truth from a COCO manifest and predictions from a COCO results
/// array ({image_id, category_id, bbox, score}).
EvalInputs read_coco(const nlohmann::json& gt, const nlohmann::json& predictions);

}  // namespace sria::eval
