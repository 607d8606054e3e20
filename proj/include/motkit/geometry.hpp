// geometry.hpp: axis-aligned boxes, IoU, normalized box motion, search regions.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace motkit {

/// Axis-aligned bounding box, top-left anchored, pixel units.
struct BBox {
  double x = 0.0;  ///< left edge
  double y = 0.0;  ///< top edge
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  bool valid() const {
    return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
           std::isfinite(w) && std::isfinite(h);
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Frame-to-frame box motion: translation normalized by box size plus
/// log-ratio scale change. Zero delta means the box did not move.
struct MotionDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;  ///< log width ratio
  double dh = 0.0;  ///< log height ratio

  bool finite() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dw) &&
           std::isfinite(dh);
  }

  friend bool operator==(const MotionDelta&, const MotionDelta&) = default;
};

/// Probability that a tracked target is present, in [0,1].
using Visibility = double;

/// Fixed-length appearance vector. Length is a per-run configuration
/// (128 by default); all consumers check lengths match.
using Embedding = std::vector<double>;

inline constexpr int kDefaultEmbeddingDim = 128;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Intersection-over-union of two boxes. Degenerate overlap counts as 0.
inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(a.x, b.x);
  const double iy = std::max(a.y, b.y);
  const double iw = std::min(a.right(), b.right()) - ix;
  const double ih = std::min(a.bottom(), b.bottom()) - iy;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Encode the motion from `prev` to `next` as
/// [(x'-x)/w, (y'-y)/h, log(w'/w), log(h'/h)].
/// Deltas are taken on the top-left anchor; see decode_motion for the inverse.
inline MotionDelta encode_motion(const BBox& prev, const BBox& next) {
  return MotionDelta{(next.x - prev.x) / prev.w, (next.y - prev.y) / prev.h,
                     std::log(next.w / prev.w), std::log(next.h / prev.h)};
}

/// Invert encode_motion: apply a delta to `prev`, recovering the next box.
inline BBox decode_motion(const BBox& prev, const MotionDelta& m) {
  return BBox{prev.x + m.dx * prev.w, prev.y + m.dy * prev.h,
              prev.w * std::exp(m.dw), prev.h * std::exp(m.dh)};
}

/// Enlarge `target` by ratio r >= 1 keeping its center fixed. This is the
/// window the track matcher looks in at the next frame.
inline BBox search_region(const BBox& target, double r) {
  const double w = target.w * r;
  const double h = target.h * r;
  return BBox{target.cx() - 0.5 * w, target.cy() - 0.5 * h, w, h};
}

/// Euclidean distance between two embeddings.
inline double l2_distance(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("embedding length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace motkit
