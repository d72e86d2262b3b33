// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/stitch.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "mrac/assignment.hpp"
#include "mrac/geometry.hpp"
#include "mrac/period.hpp"

namespace mrac::stitch {

std::vector<int> window_plan(int num_frames, int clip_length, int overlap) {
  if (num_frames < 1) throw ValidationError("window_plan: T must be positive");
  if (clip_length < 1 || overlap < 0 || overlap >= clip_length) {
    throw ValidationError("window_plan: need clip length > overlap >= 0");
  }
  const int stride = clip_length - overlap;
  std::vector<int> offsets;
  for (int off = 0;; off += stride) {
    if (off + clip_length >= num_frames) {
      offsets.push_back(std::max(0, std::min(off, num_frames - clip_length)));
      break;
    }
    offsets.push_back(off);
  }
  return offsets;
}

std::optional<InstanceRecord> restrict_to_window(const InstanceRecord& record, int offset,
                                                 int length) {
  InstanceRecord out;
  out.track.instance_id = record.track.instance_id;
  out.track.score = record.track.score;
  for (auto it = record.track.boxes.lower_bound(offset);
       it != record.track.boxes.end() && it->first < offset + length; ++it) {
    out.track.boxes.emplace(it->first - offset, it->second);
  }
  if (out.track.boxes.empty()) return std::nullopt;
  for (const auto& c : record.cycles) {
    const int s = std::max(c.start, offset);
    const int e = std::min(c.end, offset + length);
    if (s < e) out.cycles.push_back({s - offset, e - offset, c.confidence});
  }
  if (record.period) {
    PeriodSignal p;
    const auto first = record.period->velocity.begin() + offset;
    p.velocity.assign(first, first + length);
    const auto phi = record.period->periodicity.begin() + offset;
    p.periodicity.assign(phi, phi + length);
    clamp_velocity(p, length);
    out.count = period::derive_count(p);
    out.period = std::move(p);
  } else {
    out.count = static_cast<double>(out.cycles.size());
  }
  return out;
}

double mean_overlap_iou(const InstanceRecord& a, int a_offset, const InstanceRecord& b,
                        int b_offset, int first, int last) {
  double sum = 0.0;
  int frames = 0;
  for (int t = first; t < last; ++t) {
    const BoundingBox* ba = a.track.box_at(t - a_offset);
    const BoundingBox* bb = b.track.box_at(t - b_offset);
    if (!ba && !bb) continue;
    ++frames;
    if (ba && bb) sum += geometry::iou(*ba, *bb);
  }
  return frames > 0 ? sum / frames : 0.0;
}

namespace {

struct Ref {
  std::size_t window;
  std::size_t fragment;
};

void validate_windows(const std::vector<WindowPrediction>& windows, int num_frames,
                      const LinkParams& params) {
  bool any_period = false;
  bool all_period = true;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    std::ostringstream where;
    where << "window " << w << " (offset " << win.offset << ")";
    if (w > 0 && win.offset <= windows[w - 1].offset) {
      throw ValidationError(where.str() + ": windows must be sorted by strictly increasing offset");
    }
    if (win.offset < 0 || win.length < 1 || win.offset + win.length > num_frames) {
      throw ValidationError(where.str() + ": does not fit in a video of " +
                            std::to_string(num_frames) + " frames");
    }
    if (win.length > params.clip_length) {
      throw ValidationError(where.str() + ": longer than the clip length");
    }
    for (const auto& frag : win.fragments) {
      validate_track(frag.track, win.length);
      if (frag.period) {
        frag.period->validate(win.length);
        any_period = true;
      } else {
        all_period = false;
      }
    }
  }
  if (any_period && !all_period) {
    throw ValidationError("link_windows: either every fragment or none must carry a period signal");
  }
}

// Pairs (previous fragment, current fragment) accepted as the same person.
std::vector<std::pair<std::size_t, std::size_t>> link_adjacent(const WindowPrediction& prev,
                                                               const WindowPrediction& cur,
                                                               const LinkParams& params) {
  const int first = cur.offset;
  const int last = std::min(prev.offset + prev.length, cur.offset + cur.length);
  const std::size_t np = prev.fragments.size();
  const std::size_t nc = cur.fragments.size();
  std::vector<double> scores(np * nc, 0.0);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      scores[i * nc + j] = first < last ? mean_overlap_iou(prev.fragments[i], prev.offset,
                                                           cur.fragments[j], cur.offset, first, last)
                                        : 0.0;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> links;
  if (params.strategy == LinkStrategy::Hungarian) {
    assign::CostMatrix costs(np, nc);
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        const double s = scores[i * nc + j];
        costs(i, j) = s >= params.iou_threshold ? 1.0 - s : assign::kForbiddenCost;
      }
    }
    return assign::hungarian(costs).pairs;
  }
  std::vector<std::tuple<double, int, int, std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const double s = scores[i * nc + j];
      if (s >= params.iou_threshold) {
        candidates.emplace_back(-s, prev.fragments[i].track.instance_id,
                                cur.fragments[j].track.instance_id, i, j);
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<char> prev_used(np, 0), cur_used(nc, 0);
  for (const auto& [neg, pid, cid, i, j] : candidates) {
    if (prev_used[i] || cur_used[j]) continue;
    prev_used[i] = cur_used[j] = 1;
    links.emplace_back(i, j);
  }
  return links;
}

InstanceRecord merge_chain(const std::vector<WindowPrediction>& windows,
                           const std::vector<Ref>& chain, int num_frames) {
  const auto frames = static_cast<std::size_t>(num_frames);
  const int cap = max_period(num_frames);
  std::vector<double> x1(frames), y1(frames), x2(frames), y2(frames);
  std::vector<int> box_hits(frames, 0);
  std::vector<double> phi(frames, 0.0), psi(frames, 0.0);
  std::vector<int> signal_hits(frames, 0);
  const InstanceRecord& head = windows[chain.front().window].fragments[chain.front().fragment];
  const bool has_period = head.period.has_value();
  const bool has_lags = has_period && head.period->has_lag_scores();
  std::vector<std::vector<double>> lags;
  if (has_lags) lags.assign(frames, std::vector<double>(cap, 0.0));
  double score = 0.0;

  for (const auto& ref : chain) {
    const auto& win = windows[ref.window];
    const auto& frag = win.fragments[ref.fragment];
    score += frag.track.score;
    for (const auto& [local, box] : frag.track.boxes) {
      const auto t = static_cast<std::size_t>(win.offset + local);
      x1[t] += box.x1;
      y1[t] += box.y1;
      x2[t] += box.x2;
      y2[t] += box.y2;
      ++box_hits[t];
    }
    if (!has_period) continue;
    if (frag.period->has_lag_scores() != has_lags) {
      throw ValidationError("link_windows: fragments of one track mix scalar and lag-score velocities");
    }
    for (int local = 0; local < win.length; ++local) {
      const auto t = static_cast<std::size_t>(win.offset + local);
      phi[t] += frag.period->periodicity[local];
      psi[t] += frag.period->velocity[local];
      ++signal_hits[t];
      if (has_lags) {
        const auto& row = frag.period->lag_scores[local];
        for (std::size_t k = 0; k < row.size(); ++k) lags[t][k] += row[k];
      }
    }
  }

  InstanceRecord out;
  out.track.instance_id = head.track.instance_id;
  out.track.score = score / static_cast<double>(chain.size());
  for (std::size_t t = 0; t < frames; ++t) {
    if (box_hits[t] == 0) continue;
    const double n = box_hits[t];
    out.track.boxes.emplace(static_cast<int>(t),
                            BoundingBox{x1[t] / n, y1[t] / n, x2[t] / n, y2[t] / n});
  }
  if (!has_period) return out;

  PeriodSignal merged;
  merged.velocity.assign(frames, 1.0);
  merged.periodicity.assign(frames, 0.0);
  if (has_lags) merged.lag_scores.assign(frames, std::vector<double>(cap, 0.0));
  for (std::size_t t = 0; t < frames; ++t) {
    if (signal_hits[t] == 0) {
      if (has_lags && cap > 0) merged.lag_scores[t][0] = 1.0;
      continue;
    }
    const double n = signal_hits[t];
    merged.periodicity[t] = phi[t] / n;
    if (has_lags) {
      for (int k = 0; k < cap; ++k) merged.lag_scores[t][k] = lags[t][k] / n;
      const auto& row = merged.lag_scores[t];
      merged.velocity[t] =
          static_cast<double>(std::max_element(row.begin(), row.end()) - row.begin() + 1);
    } else {
      merged.velocity[t] = psi[t] / n;
    }
  }
  out.cycles = period::extract_proposals(merged, out.track.score);
  out.count = period::derive_count(merged);
  out.period = std::move(merged);
  return out;
}

}  // namespace

std::vector<InstanceRecord> link_windows(const std::vector<WindowPrediction>& windows,
                                         int num_frames, const LinkParams& params) {
  validate_windows(windows, num_frames, params);
  std::vector<std::vector<Ref>> chains;
  std::vector<std::size_t> chain_of_prev;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    std::vector<std::size_t> chain_of_cur(win.fragments.size(), SIZE_MAX);
    if (w > 0) {
      for (const auto& [i, j] : link_adjacent(windows[w - 1], win, params)) {
        chain_of_cur[j] = chain_of_prev[i];
      }
    }
    for (std::size_t j = 0; j < win.fragments.size(); ++j) {
      if (chain_of_cur[j] == SIZE_MAX) {
        chain_of_cur[j] = chains.size();
        chains.emplace_back();
      }
      chains[chain_of_cur[j]].push_back({w, j});
    }
    chain_of_prev = std::move(chain_of_cur);
  }

  std::vector<InstanceRecord> out;
  out.reserve(chains.size());
  for (const auto& chain : chains) out.push_back(merge_chain(windows, chain, num_frames));

  // Chains that inherited the same id (a split track) get fresh ids above
  // the largest one, in order of their first frame.
  std::sort(out.begin(), out.end(), [](const InstanceRecord& a, const InstanceRecord& b) {
    return std::make_tuple(a.track.instance_id, a.track.first_frame()) <
           std::make_tuple(b.track.instance_id, b.track.first_frame());
  });
  int next_id = 0;
  for (const auto& rec : out) next_id = std::max(next_id, rec.track.instance_id + 1);
  std::set<int> seen;
  for (auto& rec : out) {
    if (!seen.insert(rec.track.instance_id).second) rec.track.instance_id = next_id++;
  }
  std::stable_sort(out.begin(), out.end(), [](const InstanceRecord& a, const InstanceRecord& b) {
    return a.track.instance_id < b.track.instance_id;
  });
  return out;
}

}  // namespace mrac::stitch
