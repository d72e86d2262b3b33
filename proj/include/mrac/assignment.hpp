// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_ASSIGNMENT_HPP
#define MRAC_ASSIGNMENT_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "mrac/core.hpp"

namespace mrac::assign {

/// Entries at or above this value mark pairs that must not be matched.
inline constexpr double kForbiddenCost = 1e9;

/// Dense row-major cost matrix; rows are predictions, columns ground truths.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  /// Throws ValidationError on a non-finite entry.
  void validate() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Matching {
  /// (pred, gt) pairs sorted by prediction index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;

  double total_cost(const CostMatrix& costs) const;
};

/// Minimum-cost one-to-one assignment (shortest augmenting path, O(n^3)).
/// Pairs at kForbiddenCost or above are dropped from the result.
Matching hungarian(const CostMatrix& costs);

/// Exhaustive minimum over all injections of the smaller side. Test oracle;
/// throws DomainError when min(rows, cols) > 8.
Matching brute_force_match(const CostMatrix& costs);

struct MatchCostParams {
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double weight_l1 = 5.0;
  double weight_giou = 2.0;
  double frame_width = 1.0;
  double frame_height = 1.0;
};

/// Upper bounds used when exactly one side of a pair has a box.
inline constexpr double kMaxL1Penalty = 4.0;
inline constexpr double kMaxGiouPenalty = 2.0;

/// Set-prediction matching cost between one predicted and one ground-truth
/// instance: mean per-frame sigmoid focal existence loss, plus the mean box
/// loss over the frames where the ground-truth instance exists.
double hungarian_cost(const InstanceRecord& pred, const InstanceRecord& gt, int num_frames,
                      const MatchCostParams& params = {});

CostMatrix build_cost_matrix(const std::vector<InstanceRecord>& preds,
                             const std::vector<InstanceRecord>& gts, int num_frames,
                             const MatchCostParams& params = {});

}  // namespace mrac::assign

#endif  // MRAC_ASSIGNMENT_HPP
