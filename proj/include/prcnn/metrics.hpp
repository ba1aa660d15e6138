#pragma once

#include "prcnn/geometry.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prcnn {

// Area of the intersection of two discs with radii r1, r2 whose centres are d apart.
double circle_overlap_area(double r1, double r2, double d);

// Exact IoU of two vertical cylinders: lens area times vertical overlap over the union volume.
double cylinder_iou(const Cylinder& a, const Cylinder& b);

struct ScoredCylinder {
  Cylinder cylinder;
  double score = 0.0;
};

struct MatchResult {
  std::vector<bool> det_true_positive;  // per detection, in input order
  std::vector<int> det_gt;              // matched ground-truth index or -1
  std::vector<bool> gt_matched;
};

inline constexpr double kDefaultIouThreshold = 0.5;

// Greedy in input order (callers pass detections sorted by descending score). A detection
// is a true positive when its best-IoU unmatched ground truth exceeds `iou_min`.
MatchResult match_detections(std::span<const ScoredCylinder> dets, std::span<const Cylinder> gts,
                             double iou_min = kDefaultIouThreshold);

struct RankedFlag {
  double score = 0.0;
  bool true_positive = false;
};

// All-point interpolated AP over dataset-wide flags; empty when gt_count is zero.
std::optional<double> average_precision(std::vector<RankedFlag> flags, std::size_t gt_count);

// 1..30 cm in 1 cm steps.
std::vector<double> default_threshold_grid_cm();

struct JointErrors {
  // distances_cm[j] holds every true-positive distance for joint j.
  std::vector<std::vector<double>> distances_cm;
  explicit JointErrors(std::size_t joints = 0) : distances_cm(joints) {}
  // Adds one matched pair; joints absent from the ground truth are skipped.
  void add(std::span<const std::optional<Point3>> gt, std::span<const Point3> pred);
};

struct JointRow {
  std::string name;
  std::optional<double> dist_cm;
  std::optional<double> acc_pct;
};

struct CurvePoint {
  double threshold_cm = 0.0;
  double acc_pct = 0.0;
};

struct EvalReport {
  std::optional<double> ap;
  std::vector<JointRow> joints;
  std::optional<double> mean_dist_cm;
  std::optional<double> mean_acc_pct;
  std::vector<CurvePoint> curve;
  std::size_t frames = 0;
  std::size_t gt_count = 0;
  std::size_t detections = 0;
  std::size_t true_positives = 0;
};

// Fraction (percent) of distances strictly below `threshold_cm`.
double accuracy_below(std::span<const double> distances_cm, double threshold_cm);

// Per-joint DIST and ACC@acc_threshold, their means over joints, and the pooled ACC curve.
// All metrics are absent when there are no true-positive joints.
void joint_metrics(const JointErrors& errors, const JointSchema& schema, EvalReport& report,
                   double acc_threshold_cm = 10.0,
                   const std::vector<double>& thresholds_cm = default_threshold_grid_cm());

nlohmann::json report_to_json(const EvalReport& r);

}  // namespace prcnn
