// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_CORE_HPP
#define MRAC_CORE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrac {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes (bad JSON, truncated binary payload).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numeric precondition failure (degenerate geometry, zero-norm vectors, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;

  bool operator==(const BoundingBox&) const = default;
};

/// Per-frame boxes of one person. A frame missing from `boxes` means the
/// instance is not visible there.
struct InstanceTrack {
  int instance_id = 0;
  std::map<int, BoundingBox> boxes;
  double score = 1.0;

  const BoundingBox* box_at(int frame) const;
  bool visible(int frame) const { return boxes.count(frame) != 0; }
  int first_frame() const;
  int last_frame() const;
};

/// One repetition cycle over the half-open frame interval [start, end).
struct RepetitionProposal {
  int start = 0;
  int end = 0;
  double confidence = 1.0;

  int length() const { return end - start; }
  bool contains(int frame) const { return frame >= start && frame < end; }
};

/// Largest admissible period velocity for a clip of `num_frames` frames.
inline int max_period(int num_frames) { return num_frames / 2; }

/// Per-frame period velocity and periodicity probability.
///
/// `lag_scores`, when non-empty, holds one distribution per frame over lags
/// 1..max_period(T); entry k is the score of lag k + 1.
struct PeriodSignal {
  std::vector<double> velocity;
  std::vector<double> periodicity;
  std::vector<std::vector<double>> lag_scores;

  int num_frames() const { return static_cast<int>(velocity.size()); }
  bool has_lag_scores() const { return !lag_scores.empty(); }
  void validate(int num_frames) const;
};

/// Clamp every velocity into [1, max_period(T)]. Returns the number of
/// frames that changed.
int clamp_velocity(PeriodSignal& signal, int num_frames);

struct InstanceRecord {
  InstanceTrack track;
  std::optional<PeriodSignal> period;
  std::vector<RepetitionProposal> cycles;
  double count = 0.0;
};

struct VideoRecord {
  std::string video_id;
  double fps = 30.0;
  int num_frames = 0;
  // Scene extent in pixels; 0 when unknown.
  double width = 0.0;
  double height = 0.0;
  std::vector<InstanceRecord> instances;
};

/// Ground-truth per-frame signal implied by a cycle list: phi = 1 inside a
/// cycle, psi = the containing cycle's length. Frames outside every cycle
/// carry the nearest cycle's length (or 1 when there are no cycles).
PeriodSignal signal_from_cycles(const std::vector<RepetitionProposal>& cycles,
                                int num_frames);

/// Checks an instance against the ground-truth rules. Throws ValidationError.
void validate_ground_truth(const InstanceRecord& instance, int num_frames);
void validate_track(const InstanceTrack& track, int num_frames);

/// Feature embeddings for N instances over T frames with C channels,
/// stored instance-major then frame-major.
class FeatureStream {
 public:
  FeatureStream() = default;
  FeatureStream(std::uint32_t instances, std::uint32_t frames,
                std::uint32_t channels, std::vector<float> values);

  std::uint32_t instances() const { return instances_; }
  std::uint32_t frames() const { return frames_; }
  std::uint32_t channels() const { return channels_; }
  const std::vector<float>& values() const { return values_; }

  float at(std::uint32_t n, std::uint32_t t, std::uint32_t c) const {
    return values_[(static_cast<std::size_t>(n) * frames_ + t) * channels_ + c];
  }

 private:
  std::uint32_t instances_ = 0;
  std::uint32_t frames_ = 0;
  std::uint32_t channels_ = 0;
  std::vector<float> values_;
};

}  // namespace mrac

#endif  // MRAC_CORE_HPP
