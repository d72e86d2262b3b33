// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_GEOMETRY_HPP
#define MRAC_GEOMETRY_HPP

#include <string_view>

#include "mrac/core.hpp"

namespace mrac::geometry {

enum class TubeOverlapMode { Spatiotemporal, TemporalOnly };

std::string_view to_string(TubeOverlapMode mode);
TubeOverlapMode tube_mode_from_string(std::string_view name);

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double union_area(const BoundingBox& a, const BoundingBox& b);
BoundingBox enclosing_hull(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union; 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Generalized IoU. Throws DomainError when the enclosing hull has zero area.
double giou(const BoundingBox& a, const BoundingBox& b);

/// IoU of two half-open frame intervals.
double temporal_iou(const RepetitionProposal& p, const RepetitionProposal& q);

struct TubeSegment {
  const InstanceTrack& track;
  const RepetitionProposal& span;
};

/// Overlap of two box tubes restricted to their proposal spans.
///
/// Spatiotemporal: sum over frames of intersection area divided by sum over
/// frames of union area, frames ranging over the union of both spans. A side
/// contributes a box at frame t only when t is inside its span and the box is
/// visible. TemporalOnly: temporal_iou of the spans.
double tube_siou(const TubeSegment& pred, const TubeSegment& gt,
                 TubeOverlapMode mode = TubeOverlapMode::Spatiotemporal);

/// Spatiotemporal overlap of two whole tracks over [0, num_frames).
double track_siou(const InstanceTrack& a, const InstanceTrack& b, int num_frames);

}  // namespace mrac::geometry

#endif  // MRAC_GEOMETRY_HPP
