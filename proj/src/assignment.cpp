// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mrac/geometry.hpp"
#include "mrac/losses.hpp"

namespace mrac::assign {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  for (const auto& row : rows) {
    if (row.size() != cols_) throw ValidationError("cost matrix rows differ in length");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

void CostMatrix::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::ostringstream os;
      os << "non-finite cost at (" << i / cols_ << ", " << i % cols_ << ")";
      throw ValidationError(os.str());
    }
  }
}

double Matching::total_cost(const CostMatrix& costs) const {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += costs(r, c);
  return total;
}

namespace {

// Builds the Matching from a full assignment of the smaller side, dropping
// forbidden pairs.
Matching finish(const CostMatrix& costs,
                std::vector<std::pair<std::size_t, std::size_t>> assigned) {
  Matching m;
  std::vector<bool> pred_used(costs.rows(), false);
  std::vector<bool> gt_used(costs.cols(), false);
  std::sort(assigned.begin(), assigned.end());
  for (const auto& [r, c] : assigned) {
    if (costs(r, c) >= kForbiddenCost) continue;
    m.pairs.emplace_back(r, c);
    pred_used[r] = true;
    gt_used[c] = true;
  }
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    if (!pred_used[r]) m.unmatched_preds.push_back(r);
  }
  for (std::size_t c = 0; c < costs.cols(); ++c) {
    if (!gt_used[c]) m.unmatched_gts.push_back(c);
  }
  return m;
}

}  // namespace

Matching hungarian(const CostMatrix& costs) {
  costs.validate();
  const bool transposed = costs.rows() > costs.cols();
  const std::size_t n = transposed ? costs.cols() : costs.rows();
  const std::size_t m = transposed ? costs.rows() : costs.cols();
  auto cost = [&](std::size_t i, std::size_t j) {
    return transposed ? costs(j, i) : costs(i, j);
  };
  if (n == 0) return finish(costs, {});

  // Potentials and column owners, 1-based with column 0 as the virtual root.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  std::vector<double> min_slack(m + 1);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::pair<std::size_t, std::size_t>> assigned;
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] == 0) continue;
    if (transposed) {
      assigned.emplace_back(j - 1, owner[j] - 1);
    } else {
      assigned.emplace_back(owner[j] - 1, j - 1);
    }
  }
  return finish(costs, std::move(assigned));
}

Matching brute_force_match(const CostMatrix& costs) {
  costs.validate();
  const bool transposed = costs.rows() > costs.cols();
  const std::size_t n = transposed ? costs.cols() : costs.rows();
  const std::size_t m = transposed ? costs.rows() : costs.cols();
  if (n > 8) {
    throw DomainError("brute_force_match supports min(rows, cols) <= 8, got " +
                      std::to_string(n));
  }
  auto cost = [&](std::size_t i, std::size_t j) {
    return transposed ? costs(j, i) : costs(i, j);
  };

  std::vector<std::size_t> current(n), best(n);
  std::vector<char> taken(m, 0);
  double best_total = std::numeric_limits<double>::infinity();
  // Depth-first in ascending index order; strict improvement keeps the first
  // optimum found, which is the lexicographically smallest assignment.
  auto search = [&](auto&& self, std::size_t i, double partial) -> void {
    if (i == n) {
      if (partial < best_total) {
        best_total = partial;
        best = current;
      }
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (taken[j]) continue;
      taken[j] = 1;
      current[i] = j;
      self(self, i + 1, partial + cost(i, j));
      taken[j] = 0;
    }
  };
  search(search, 0, 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> assigned;
  for (std::size_t i = 0; i < n; ++i) {
    if (transposed) {
      assigned.emplace_back(best[i], i);
    } else {
      assigned.emplace_back(i, best[i]);
    }
  }
  return finish(costs, std::move(assigned));
}

namespace {

// Existence probability the prediction assigns to frame t.
constexpr double kProbEps = 1e-7;

double existence_logit(const InstanceRecord& pred, int t) {
  const double p =
      std::clamp(pred.track.visible(t) ? pred.track.score : 0.0, kProbEps, 1.0 - kProbEps);
  return std::log(p / (1.0 - p));
}

}  // namespace

double hungarian_cost(const InstanceRecord& pred, const InstanceRecord& gt, int num_frames,
                      const MatchCostParams& params) {
  if (num_frames <= 0) return 0.0;
  const loss::BoxLossWeights weights{params.weight_l1, params.weight_giou};
  const loss::FrameSize frame{params.frame_width, params.frame_height};
  double cls = 0.0;
  double box = 0.0;
  int gt_frames = 0;
  for (int t = 0; t < num_frames; ++t) {
    const BoundingBox* g = gt.track.box_at(t);
    const int target = g ? 1 : 0;
    cls += loss::sigmoid_focal(existence_logit(pred, t), target, params.focal_alpha,
                               params.focal_gamma)
               .value;
    if (!g) continue;
    ++gt_frames;
    const BoundingBox* p = pred.track.box_at(t);
    if (!p) {
      box += params.weight_l1 * kMaxL1Penalty + params.weight_giou * kMaxGiouPenalty;
      continue;
    }
    const double l1 = loss::normalized_l1(*p, *g, frame);
    double giou_term = kMaxGiouPenalty;
    if (geometry::enclosing_hull(*p, *g).area() > 0.0) {
      giou_term = 1.0 - geometry::giou(*p, *g);
    }
    box += weights.l1 * l1 + weights.giou * giou_term;
  }
  double total = cls / num_frames;
  if (gt_frames > 0) total += box / gt_frames;
  return total;
}

CostMatrix build_cost_matrix(const std::vector<InstanceRecord>& preds,
                             const std::vector<InstanceRecord>& gts, int num_frames,
                             const MatchCostParams& params) {
  CostMatrix costs(preds.size(), gts.size());
  for (std::size_t r = 0; r < preds.size(); ++r) {
    for (std::size_t c = 0; c < gts.size(); ++c) {
      costs(r, c) = hungarian_cost(preds[r], gts[c], num_frames, params);
    }
  }
  return costs;
}

}  // namespace mrac::assign
