// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mrac {

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x1 <= x2 && y1 <= y2;
}

const BoundingBox* InstanceTrack::box_at(int frame) const {
  auto it = boxes.find(frame);
  return it == boxes.end() ? nullptr : &it->second;
}

int InstanceTrack::first_frame() const {
  return boxes.empty() ? -1 : boxes.begin()->first;
}

int InstanceTrack::last_frame() const {
  return boxes.empty() ? -1 : boxes.rbegin()->first;
}

void PeriodSignal::validate(int num_frames) const {
  const auto frames = static_cast<std::size_t>(num_frames);
  if (velocity.size() != frames || periodicity.size() != frames) {
    std::ostringstream os;
    os << "period signal covers " << velocity.size() << "/" << periodicity.size()
       << " frames, expected " << num_frames;
    throw ValidationError(os.str());
  }
  const int cap = max_period(num_frames);
  for (int t = 0; t < num_frames; ++t) {
    const double psi = velocity[t];
    if (!std::isfinite(psi) || psi < 1.0 || psi > cap) {
      std::ostringstream os;
      os << "period velocity " << psi << " at frame " << t << " outside [1, " << cap << "]";
      throw ValidationError(os.str());
    }
    const double phi = periodicity[t];
    if (!std::isfinite(phi) || phi < 0.0 || phi > 1.0) {
      std::ostringstream os;
      os << "periodicity " << phi << " at frame " << t << " outside [0, 1]";
      throw ValidationError(os.str());
    }
  }
  if (lag_scores.empty()) return;
  if (lag_scores.size() != frames) {
    throw ValidationError("lag scores do not cover every frame");
  }
  for (int t = 0; t < num_frames; ++t) {
    const auto& row = lag_scores[t];
    if (row.size() != static_cast<std::size_t>(cap)) {
      std::ostringstream os;
      os << "lag-score vector at frame " << t << " has " << row.size()
         << " entries, expected " << cap;
      throw ValidationError(os.str());
    }
    double sum = 0.0;
    for (double s : row) {
      if (!std::isfinite(s) || s < 0.0) {
        std::ostringstream os;
        os << "negative or non-finite lag score at frame " << t;
        throw ValidationError(os.str());
      }
      sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "lag scores at frame " << t << " sum to " << sum << ", expected 1";
      throw ValidationError(os.str());
    }
  }
}

int clamp_velocity(PeriodSignal& signal, int num_frames) {
  const double cap = std::max(1, max_period(num_frames));
  int changed = 0;
  for (double& psi : signal.velocity) {
    const double clamped = std::clamp(psi, 1.0, cap);
    if (clamped != psi) {
      psi = clamped;
      ++changed;
    }
  }
  return changed;
}

PeriodSignal signal_from_cycles(const std::vector<RepetitionProposal>& cycles,
                                int num_frames) {
  PeriodSignal signal;
  signal.velocity.assign(num_frames, 1.0);
  signal.periodicity.assign(num_frames, 0.0);
  if (cycles.empty()) return signal;
  for (const auto& c : cycles) {
    for (int t = std::max(0, c.start); t < std::min(c.end, num_frames); ++t) {
      signal.velocity[t] = c.length();
      signal.periodicity[t] = 1.0;
    }
  }
  // Gaps inherit the preceding cycle; the lead-in inherits the first one.
  double carry = cycles.front().length();
  for (int t = 0; t < num_frames; ++t) {
    if (signal.periodicity[t] == 1.0) {
      carry = signal.velocity[t];
    } else {
      signal.velocity[t] = carry;
    }
  }
  return signal;
}

void validate_track(const InstanceTrack& track, int num_frames) {
  if (track.boxes.empty()) {
    std::ostringstream os;
    os << "instance " << track.instance_id << " has no visible frame";
    throw ValidationError(os.str());
  }
  for (const auto& [t, box] : track.boxes) {
    if (t < 0 || t >= num_frames) {
      std::ostringstream os;
      os << "instance " << track.instance_id << ": box frame " << t << " outside [0, "
         << num_frames << ")";
      throw ValidationError(os.str());
    }
    if (!box.valid()) {
      std::ostringstream os;
      os << "instance " << track.instance_id << ": invalid box at frame " << t;
      throw ValidationError(os.str());
    }
  }
  if (!std::isfinite(track.score) || track.score < 0.0 || track.score > 1.0) {
    std::ostringstream os;
    os << "instance " << track.instance_id << ": score " << track.score << " outside [0, 1]";
    throw ValidationError(os.str());
  }
}

void validate_ground_truth(const InstanceRecord& instance, int num_frames) {
  const int id = instance.track.instance_id;
  validate_track(instance.track, num_frames);
  const int cap = max_period(num_frames);
  int previous_end = 0;
  for (std::size_t k = 0; k < instance.cycles.size(); ++k) {
    const auto& c = instance.cycles[k];
    std::ostringstream where;
    where << "instance " << id << ", cycle " << k << " [" << c.start << ", " << c.end << ")";
    if (c.end <= c.start) {
      throw ValidationError(where.str() + ": end must be greater than start");
    }
    if (c.start < 0 || c.end > num_frames) {
      throw ValidationError(where.str() + ": outside the video");
    }
    if (c.length() > cap) {
      throw ValidationError(where.str() + ": period velocity exceeds half the clip length");
    }
    if (c.start < previous_end) {
      throw ValidationError(where.str() + ": cycles must be sorted and disjoint");
    }
    previous_end = c.end;
  }
  if (instance.count != static_cast<double>(instance.cycles.size())) {
    std::ostringstream os;
    os << "instance " << id << ": count " << instance.count << " does not equal the "
       << instance.cycles.size() << " annotated cycles";
    throw ValidationError(os.str());
  }
  if (!instance.period) return;
  const auto& period = *instance.period;
  period.validate(num_frames);
  const PeriodSignal expected = signal_from_cycles(instance.cycles, num_frames);
  for (int t = 0; t < num_frames; ++t) {
    if (period.periodicity[t] != expected.periodicity[t]) {
      std::ostringstream os;
      os << "instance " << id << ", frame " << t << ": periodicity must be 1 exactly on "
         << "frames inside a cycle and 0 elsewhere (got " << period.periodicity[t] << ")";
      throw ValidationError(os.str());
    }
    if (expected.periodicity[t] == 1.0 && period.velocity[t] != expected.velocity[t]) {
      std::ostringstream os;
      os << "instance " << id << ", frame " << t << ": period velocity "
         << period.velocity[t] << " differs from the cycle length " << expected.velocity[t];
      throw ValidationError(os.str());
    }
  }
}

FeatureStream::FeatureStream(std::uint32_t instances, std::uint32_t frames,
                             std::uint32_t channels, std::vector<float> values)
    : instances_(instances), frames_(frames), channels_(channels), values_(std::move(values)) {
  const auto expected = static_cast<std::size_t>(instances) * frames * channels;
  if (values_.size() != expected) {
    std::ostringstream os;
    os << "feature payload holds " << values_.size() << " values, header declares " << expected;
    throw ValidationError(os.str());
  }
  if (channels_ == 0) throw ValidationError("feature channel count must be positive");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      std::ostringstream os;
      os << "non-finite feature value at index " << i;
      throw ValidationError(os.str());
    }
  }
}

}  // namespace mrac
