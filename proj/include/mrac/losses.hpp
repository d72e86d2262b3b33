// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_LOSSES_HPP
#define MRAC_LOSSES_HPP

#include <array>
#include <span>
#include <vector>

#include "mrac/assignment.hpp"
#include "mrac/core.hpp"

namespace mrac::loss {

// Training-loss arithmetic for the counting model as plain value functions
// with analytic gradients. Nothing here owns parameters or optimizer state.

struct ValueAndGrad {
  double value = 0.0;
  double grad = 0.0;
};

/// Sigmoid focal loss of a logit against a binary target, with d/d logit.
ValueAndGrad sigmoid_focal(double logit, int target, double alpha = 0.25, double gamma = 2.0);

struct FrameSize {
  double width = 1.0;
  double height = 1.0;
};

struct BoxLossWeights {
  double l1 = 5.0;
  double giou = 2.0;
};

/// Mean absolute difference of the four coordinates, x normalized by the
/// frame width and y by the frame height.
double normalized_l1(const BoundingBox& pred, const BoundingBox& gt, const FrameSize& frame);

struct BoxLoss {
  double value = 0.0;
  /// d value / d (x1, y1, x2, y2) of the prediction.
  std::array<double, 4> grad{};
};

/// weights.l1 * normalized_l1 + weights.giou * (1 - giou). The gradient is
/// exact away from ties between coordinates of the two boxes. Throws
/// DomainError for a zero-area hull or union.
BoxLoss box_loss(const BoundingBox& pred, const BoundingBox& gt, const FrameSize& frame,
                 const BoxLossWeights& weights = {});

/// Multi-class cross-entropy of a lag distribution over 1..scores.size()
/// against the ground-truth lag. Throws DomainError for a lag out of range.
double period_ce(std::span<const double> lag_scores, int gt_lag);

inline constexpr double kBceEpsilon = 1e-7;

/// Binary cross-entropy with the probability clipped to [eps, 1 - eps].
double periodicity_bce(double phi, int target);

struct LossWeights {
  double lambda = 1.0;  // period velocity
  double mu = 5.0;      // periodicity
};

struct LossBreakdown {
  double l_inst = 0.0;
  double l_period = 0.0;
  double l_periodicity = 0.0;
  double total = 0.0;
  LossWeights weights;
};

LossBreakdown combine(double l_inst, double l_period, double l_periodicity,
                      const LossWeights& weights = {});

/// Matched-pair training loss. l_inst reuses the matching cost, l_period is
/// the mean lag cross-entropy over ground-truth periodic frames and
/// l_periodicity the mean BCE over all frames; each is averaged over pairs.
LossBreakdown total_loss(const std::vector<InstanceRecord>& preds,
                         const std::vector<InstanceRecord>& gts, const assign::Matching& matching,
                         int num_frames, const LossWeights& weights = {},
                         const assign::MatchCostParams& cost_params = {});

}  // namespace mrac::loss

#endif  // MRAC_LOSSES_HPP
