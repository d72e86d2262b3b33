// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/geometry.hpp"

#include <algorithm>
#include <string>

namespace mrac::geometry {

std::string_view to_string(TubeOverlapMode mode) {
  return mode == TubeOverlapMode::Spatiotemporal ? "spatiotemporal" : "temporal";
}

TubeOverlapMode tube_mode_from_string(std::string_view name) {
  if (name == "spatiotemporal") return TubeOverlapMode::Spatiotemporal;
  if (name == "temporal") return TubeOverlapMode::TemporalOnly;
  throw ValidationError("unknown sIoU mode '" + std::string(name) +
                        "' (expected spatiotemporal or temporal)");
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double union_area(const BoundingBox& a, const BoundingBox& b) {
  return a.area() + b.area() - intersection_area(a, b);
}

BoundingBox enclosing_hull(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double u = union_area(a, b);
  return u > 0.0 ? intersection_area(a, b) / u : 0.0;
}

double giou(const BoundingBox& a, const BoundingBox& b) {
  const double hull = enclosing_hull(a, b).area();
  if (!(hull > 0.0)) throw DomainError("giou: enclosing hull has zero area");
  const double u = union_area(a, b);
  const double overlap = u > 0.0 ? intersection_area(a, b) / u : 0.0;
  return overlap - (hull - u) / hull;
}

double temporal_iou(const RepetitionProposal& p, const RepetitionProposal& q) {
  const int inter = std::max(0, std::min(p.end, q.end) - std::max(p.start, q.start));
  const int uni = std::max(0, p.length()) + std::max(0, q.length()) - inter;
  return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

double tube_siou(const TubeSegment& pred, const TubeSegment& gt, TubeOverlapMode mode) {
  if (mode == TubeOverlapMode::TemporalOnly) return temporal_iou(pred.span, gt.span);
  const int first = std::min(pred.span.start, gt.span.start);
  const int last = std::max(pred.span.end, gt.span.end);
  double inter = 0.0;
  double uni = 0.0;
  for (int t = first; t < last; ++t) {
    const BoundingBox* a = pred.span.contains(t) ? pred.track.box_at(t) : nullptr;
    const BoundingBox* b = gt.span.contains(t) ? gt.track.box_at(t) : nullptr;
    if (a && b) {
      inter += intersection_area(*a, *b);
      uni += union_area(*a, *b);
    } else if (a) {
      uni += a->area();
    } else if (b) {
      uni += b->area();
    }
  }
  return uni > 0.0 ? inter / uni : 0.0;
}

double track_siou(const InstanceTrack& a, const InstanceTrack& b, int num_frames) {
  const RepetitionProposal whole{0, num_frames, 1.0};
  return tube_siou({a, whole}, {b, whole}, TubeOverlapMode::Spatiotemporal);
}

}  // namespace mrac::geometry
