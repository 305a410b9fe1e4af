#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ryolo/boxes.hpp"
#include "ryolo/error.hpp"

namespace ryolo {

// Indices of `dets` by descending confidence; equal confidences keep input
// order.
inline std::vector<std::size_t> confidence_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> idx(dets.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return idx;
}

// Greedy per-class suppression: a detection is dropped when it overlaps an
// already kept detection of its class with IoU > iou_threshold. Output is in
// confidence order.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<Detection> kept;
  for (std::size_t i : confidence_order(dets)) {
    const Detection& d = dets[i];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

struct KeyedDetection {
  FrameRef frame;
  Detection det;
};

struct KeyedTruth {
  FrameRef frame;
  BoxLabel label;
};

struct DetectionMatch {
  std::size_t det_index = 0;  // into the matched detection list
  int class_id = 0;
  double confidence = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> truth;  // matched ground-truth index
};

struct MatchResult {
  std::vector<DetectionMatch> detections;  // descending confidence
  std::map<int, std::size_t> truth_counts;
};

// Per class and frame, detections in descending confidence take the unmatched
// same-class truth of highest IoU (lowest index on ties); the detection is a
// true positive iff that IoU reaches iou_threshold.
inline MatchResult match_detections(const std::vector<KeyedDetection>& dets,
                                    const std::vector<KeyedTruth>& truths,
                                    double iou_threshold = 0.5) {
  MatchResult result;
  std::map<std::pair<FrameRef, int>, std::vector<std::size_t>> pool;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    pool[{truths[i].frame, truths[i].label.class_id}].push_back(i);
    ++result.truth_counts[truths[i].label.class_id];
  }
  std::vector<Detection> plain;
  plain.reserve(dets.size());
  for (const auto& d : dets) plain.push_back(d.det);
  std::vector<bool> matched(truths.size(), false);

  for (std::size_t i : confidence_order(plain)) {
    const KeyedDetection& d = dets[i];
    DetectionMatch m;
    m.det_index = i;
    m.class_id = d.det.class_id;
    m.confidence = d.det.confidence;
    auto it = pool.find({d.frame, d.det.class_id});
    if (it != pool.end()) {
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      for (std::size_t t : it->second) {
        if (matched[t]) continue;
        const double v = iou(d.det.box, truths[t].label.box);
        if (v > best_iou) {
          best_iou = v;
          best = t;
        }
      }
      if (best && best_iou >= iou_threshold) {
        matched[*best] = true;
        m.true_positive = true;
        m.truth = best;
      }
    }
    result.detections.push_back(m);
  }
  return result;
}

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t truths = 0;
};

// Restricted to `classes` when given. No detections gives precision 1; no
// ground truth gives recall 1.
inline PrecisionRecall precision_recall(const MatchResult& match,
                                        const std::optional<std::vector<int>>& classes = std::nullopt) {
  auto included = [&](int c) {
    return !classes || std::find(classes->begin(), classes->end(), c) != classes->end();
  };
  PrecisionRecall pr;
  for (const auto& d : match.detections) {
    if (!included(d.class_id)) continue;
    (d.true_positive ? pr.true_positives : pr.false_positives) += 1;
  }
  for (const auto& [c, n] : match.truth_counts) {
    if (included(c)) pr.truths += n;
  }
  const std::size_t dets = pr.true_positives + pr.false_positives;
  pr.precision = dets == 0 ? 1.0 : static_cast<double>(pr.true_positives) / static_cast<double>(dets);
  pr.recall = pr.truths == 0 ? 1.0
                             : static_cast<double>(pr.true_positives) / static_cast<double>(pr.truths);
  return pr;
}

// All-point interpolated AP: precision replaced by its running maximum from
// the right, integrated over recall. nullopt when the class has no ground
// truth.
inline std::optional<double> average_precision(const MatchResult& match, int class_id) {
  const auto it = match.truth_counts.find(class_id);
  if (it == match.truth_counts.end() || it->second == 0) return std::nullopt;
  const double npos = static_cast<double>(it->second);

  std::vector<double> recall{0.0}, precision{0.0};
  std::size_t tp = 0, fp = 0;
  for (const auto& d : match.detections) {
    if (d.class_id != class_id) continue;
    (d.true_positive ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / npos);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  recall.push_back(1.0);
  precision.push_back(0.0);
  for (std::size_t i = precision.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0;
  for (std::size_t i = 1; i < recall.size(); ++i) {
    if (recall[i] != recall[i - 1]) ap += (recall[i] - recall[i - 1]) * precision[i];
  }
  return ap;
}

struct MeanAp {
  double value = 0.0;
  std::vector<int> classes;           // contributing classes
  std::vector<int> excluded_classes;  // requested but without ground truth
};

inline MeanAp mean_ap(const std::map<int, double>& per_class_ap, const std::vector<int>& filter) {
  require(!filter.empty(), ErrorKind::InvalidArgument, "mean_ap: empty class filter");
  MeanAp out;
  double sum = 0.0;
  for (int c : filter) {
    auto it = per_class_ap.find(c);
    if (it == per_class_ap.end()) {
      out.excluded_classes.push_back(c);
      continue;
    }
    sum += it->second;
    out.classes.push_back(c);
  }
  out.value = out.classes.empty() ? 0.0 : sum / static_cast<double>(out.classes.size());
  return out;
}

// AP of every class that has ground truth.
inline std::map<int, double> per_class_ap(const MatchResult& match) {
  std::map<int, double> aps;
  for (const auto& [c, n] : match.truth_counts) {
    if (auto ap = average_precision(match, c)) aps[c] = *ap;
  }
  return aps;
}

}  // namespace ryolo
