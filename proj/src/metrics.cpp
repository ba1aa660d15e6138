#include "prcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace prcnn {

double circle_overlap_area(double r1, double r2, double d) {
  if (r1 <= 0.0 || r2 <= 0.0) return 0.0;
  if (r1 < r2) std::swap(r1, r2);  // same rounding whichever order the discs come in
  if (d >= r1 + r2) return 0.0;
  const double rmin = std::min(r1, r2);
  if (d <= std::abs(r1 - r2)) return std::numbers::pi * rmin * rmin;
  const double a1 = std::acos(std::clamp((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1), -1.0, 1.0));
  const double a2 = std::acos(std::clamp((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2), -1.0, 1.0));
  const double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
  return r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * std::sqrt(std::max(k, 0.0));
}

double cylinder_iou(const Cylinder& a, const Cylinder& b) {
  const double d = std::hypot(a.axis_x - b.axis_x, a.axis_z - b.axis_z);
  const double lo = std::max(a.bottom_y, b.bottom_y);
  const double hi = std::min(a.top_y, b.top_y);
  const double dh = std::max(0.0, hi - lo);
  const double inter = circle_overlap_area(a.radius, b.radius, d) * dh;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_detections(std::span<const ScoredCylinder> dets, std::span<const Cylinder> gts, double iou_min) {
  MatchResult r;
  r.det_true_positive.assign(dets.size(), false);
  r.det_gt.assign(dets.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_matched[g]) continue;
      const double iou = cylinder_iou(dets[i].cylinder, gts[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = int(g);
      }
    }
    if (best >= 0 && best_iou > iou_min) {
      r.det_true_positive[i] = true;
      r.det_gt[i] = best;
      r.gt_matched[std::size_t(best)] = true;
    }
  }
  return r;
}

std::optional<double> average_precision(std::vector<RankedFlag> flags, std::size_t gt_count) {
  if (gt_count == 0) return std::nullopt;
  std::stable_sort(flags.begin(), flags.end(),
                   [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
  const std::size_t n = flags.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += flags[i].true_positive ? 1.0 : 0.0;
    precision[i] = tp / double(i + 1);
    recall[i] = tp / double(gt_count);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::vector<double> default_threshold_grid_cm() {
  std::vector<double> t(30);
  std::iota(t.begin(), t.end(), 1.0);
  return t;
}

void JointErrors::add(std::span<const std::optional<Point3>> gt, std::span<const Point3> pred) {
  const std::size_t n = std::min({gt.size(), pred.size(), distances_cm.size()});
  for (std::size_t j = 0; j < n; ++j)
    if (gt[j]) distances_cm[j].push_back(100.0 * (pred[j] - *gt[j]).norm());
}

double accuracy_below(std::span<const double> distances_cm, double threshold_cm) {
  if (distances_cm.empty()) return 0.0;
  const auto under = std::count_if(distances_cm.begin(), distances_cm.end(),
                                   [&](double d) { return d < threshold_cm; });
  return 100.0 * double(under) / double(distances_cm.size());
}

void joint_metrics(const JointErrors& errors, const JointSchema& schema, EvalReport& report,
                   double acc_threshold_cm, const std::vector<double>& thresholds_cm) {
  report.joints.clear();
  report.curve.clear();
  std::vector<double> pooled;
  double dist_sum = 0.0, acc_sum = 0.0;
  int rows = 0;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    JointRow row{schema.names[j], std::nullopt, std::nullopt};
    if (j < errors.distances_cm.size() && !errors.distances_cm[j].empty()) {
      const auto& d = errors.distances_cm[j];
      row.dist_cm = std::accumulate(d.begin(), d.end(), 0.0) / double(d.size());
      row.acc_pct = accuracy_below(d, acc_threshold_cm);
      dist_sum += *row.dist_cm;
      acc_sum += *row.acc_pct;
      ++rows;
      pooled.insert(pooled.end(), d.begin(), d.end());
    }
    report.joints.push_back(row);
  }
  report.mean_dist_cm.reset();
  report.mean_acc_pct.reset();
  if (rows == 0) return;
  report.mean_dist_cm = dist_sum / rows;
  report.mean_acc_pct = acc_sum / rows;
  for (double t : thresholds_cm) report.curve.push_back({t, accuracy_below(pooled, t)});
}

nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& j : r.joints) rows.push_back({{"name", j.name}, {"dist_cm", opt(j.dist_cm)}, {"acc_pct", opt(j.acc_pct)}});
  json curve = json::array();
  for (const auto& c : r.curve) curve.push_back({{"threshold_cm", c.threshold_cm}, {"acc_pct", c.acc_pct}});
  return {{"ap", opt(r.ap)},
          {"joints", rows},
          {"mean", {{"dist_cm", opt(r.mean_dist_cm)}, {"acc_pct", opt(r.mean_acc_pct)}}},
          {"curve", curve},
          {"frames", r.frames},
          {"gt_count", r.gt_count},
          {"detections", r.detections},
          {"true_positives", r.true_positives}};
}

}  // namespace prcnn
