// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Random constructions shared by the unit tests and the acceptance suite.

#ifndef MRAC_TESTS_SCENARIOS_HPP
#define MRAC_TESTS_SCENARIOS_HPP

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "mrac/core.hpp"
#include "mrac/metrics.hpp"
#include "mrac/stitch.hpp"

namespace scenario {

// Small scenario with overlapping boxes and jittered proposals so that
// sIoU scores spread across the threshold grid.
inline std::vector<mrac::metrics::EvalVideo> random_scenario(std::mt19937& rng) {
  std::uniform_int_distribution<int> nvid(1, 3);
  std::uniform_int_distribution<int> ninst(0, 3);
  std::uniform_int_distribution<int> nprop(0, 5);
  std::uniform_int_distribution<int> start(0, 20);
  std::uniform_int_distribution<int> len(2, 8);
  std::uniform_int_distribution<int> jitter(-2, 2);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::vector<mrac::metrics::EvalVideo> videos;
  const int frames = 32;
  const int nv = nvid(rng);
  for (int v = 0; v < nv; ++v) {
    mrac::metrics::EvalVideo ev;
    ev.video_id = "v" + std::to_string(v);
    ev.num_frames = frames;
    const int ng = ninst(rng);
    const int np = ninst(rng);
    for (int g = 0; g < ng; ++g) {
      mrac::InstanceRecord r;
      r.track.instance_id = g + 1;
      const double x = 3.0 * g;
      for (int t = 0; t < frames; ++t) r.track.boxes[t] = {x, 0, x + 4, 4};
      const int k = 1 + nprop(rng);
      for (int c = 0; c < k; ++c) {
        const int s = start(rng);
        r.cycles.push_back({s, s + len(rng)});
      }
      std::sort(r.cycles.begin(), r.cycles.end(),
                [](const auto& a, const auto& b) { return a.start < b.start; });
      r.count = double(r.cycles.size());
      ev.gt.push_back(r);
    }
    for (int p = 0; p < np; ++p) {
      mrac::InstanceRecord r;
      r.track.instance_id = p + 1;
      const double x = 3.0 * p + jitter(rng) * 0.5;
      for (int t = 0; t < frames; ++t) r.track.boxes[t] = {x, 0, x + 4, 4};
      const int k = nprop(rng);
      for (int c = 0; c < k; ++c) {
        int s = start(rng);
        int e = s + len(rng);
        if (p < ng && !ev.gt[p].cycles.empty() && coarse(rng) > 0) {
          const auto& src = ev.gt[p].cycles[c % ev.gt[p].cycles.size()];
          s = std::max(0, src.start + jitter(rng));
          e = std::max(s + 1, src.end + jitter(rng));
        }
        // Coarse confidences create ties.
        const double q = coarse(rng) == 0 ? 0.5 : conf(rng);
        r.cycles.push_back({s, e, q});
      }
      r.count = double(r.cycles.size());
      ev.pred.push_back(r);
    }
    videos.push_back(ev);
  }
  return videos;
}

// A whole-video instance in its own horizontal lane, with cycles of random
// length and optional short box gaps.
inline mrac::InstanceRecord random_instance(std::mt19937& rng, int id, int frames, bool gaps) {
  std::uniform_int_distribution<int> len(4, 20);
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  std::bernoulli_distribution drop(gaps ? 0.1 : 0.0);
  mrac::InstanceRecord r;
  r.track.instance_id = id;
  r.track.score = 0.9;
  const double x0 = 300.0 * id;
  for (int t = 0; t < frames; ++t) {
    if (drop(rng) && t % 32 != 5) continue;
    r.track.boxes[t] = {x0 + 20 + jitter(rng), 30 + jitter(rng), x0 + 120 + jitter(rng), 200 + jitter(rng)};
  }
  int t = len(rng) / 2;
  while (true) {
    const int l = len(rng);
    if (t + l > frames) break;
    r.cycles.push_back({t, t + l});
    t += l;
  }
  r.count = static_cast<double>(r.cycles.size());
  r.period = mrac::signal_from_cycles(r.cycles, frames);
  return r;
}

inline std::vector<mrac::stitch::WindowPrediction> windows_of(const std::vector<mrac::InstanceRecord>& records, int frames) {
  std::vector<mrac::stitch::WindowPrediction> out;
  for (int offset : mrac::stitch::window_plan(frames)) {
    mrac::stitch::WindowPrediction w;
    w.offset = offset;
    w.length = std::min(mrac::stitch::kClipLength, frames - offset);
    for (const auto& r : records) {
      if (auto frag = mrac::stitch::restrict_to_window(r, offset, w.length)) w.fragments.push_back(*frag);
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace scenario

#endif  // MRAC_TESTS_SCENARIOS_HPP
