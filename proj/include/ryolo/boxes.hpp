#pragma once

#include <algorithm>
#include <compare>
#include <iterator>
#include <string>
#include <vector>

namespace ryolo {

// Center-format rectangle; normalized to [0, 1] wherever it describes a
// frame location.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  static Box from_corners(double x0, double y0, double x1, double y1) {
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct BoxLabel {
  int class_id = 0;
  Box box;

  friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

struct Detection {
  Box box;
  int class_id = 0;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// A frame of a video; the key detections and ground truth are matched on.
struct FrameRef {
  std::string video_id;
  long frame = 0;

  friend auto operator<=>(const FrameRef&, const FrameRef&) = default;
};

// Box extents without position, used for anchor priors.
struct BoxShape {
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }

  friend auto operator<=>(const BoxShape&, const BoxShape&) = default;
};

// IoU of two boxes sharing a center.
inline double shape_iou(const BoxShape& a, const BoxShape& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.area() + b.area() - inter);
}

inline std::vector<Detection> filter_confidence(const std::vector<Detection>& dets,
                                                double threshold) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [threshold](const Detection& d) { return d.confidence >= threshold; });
  return out;
}

}  // namespace ryolo
