// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_STITCH_HPP
#define MRAC_STITCH_HPP

#include <optional>
#include <vector>

#include "mrac/core.hpp"

namespace mrac::stitch {

inline constexpr int kClipLength = 64;
inline constexpr int kClipOverlap = 32;

/// Predictions for one sliding window. Fragment frame indices are local to
/// the window: local frame f is global frame offset + f.
struct WindowPrediction {
  int offset = 0;
  int length = 0;
  std::vector<InstanceRecord> fragments;
};

/// Window start offsets covering [0, T) with the given clip length and
/// overlap; the final window is right-aligned to end at T.
std::vector<int> window_plan(int num_frames, int clip_length = kClipLength,
                             int overlap = kClipOverlap);

enum class LinkStrategy { Greedy, Hungarian };

struct LinkParams {
  double iou_threshold = 0.5;
  LinkStrategy strategy = LinkStrategy::Greedy;
  int clip_length = kClipLength;
};

/// Restriction of a whole-video instance to [offset, offset + length).
/// Returns nothing when the instance has no visible box in the window.
std::optional<InstanceRecord> restrict_to_window(const InstanceRecord& record, int offset,
                                                 int length);

/// Chains fragments of adjacent windows by mean box IoU over the shared
/// frames and merges each chain into a whole-video record. Overlapping
/// frames average boxes, periodicity, velocities and lag scores; the track
/// score is the mean over fragments. Output records carry proposals and a
/// count derived from the merged signal and are sorted by instance id.
std::vector<InstanceRecord> link_windows(const std::vector<WindowPrediction>& windows,
                                         int num_frames, const LinkParams& params = {});

/// Mean IoU over the frames of [first, last) where at least one of the two
/// fragments is visible; 0 when there is no such frame. Frame indices are
/// global.
double mean_overlap_iou(const InstanceRecord& a, int a_offset, const InstanceRecord& b,
                        int b_offset, int first, int last);

}  // namespace mrac::stitch

#endif  // MRAC_STITCH_HPP
