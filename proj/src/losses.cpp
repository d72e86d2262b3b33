// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrac/geometry.hpp"

namespace mrac::loss {

namespace {

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ValueAndGrad sigmoid_focal(double logit, int target, double alpha, double gamma) {
  // Rewrite in terms of the logit of the true class, z, so p_t = sigmoid(z).
  const double sign = target == 1 ? 1.0 : -1.0;
  const double z = sign * logit;
  const double alpha_t = target == 1 ? alpha : 1.0 - alpha;
  const double p_t = sigmoid(z);
  const double q = sigmoid(-z);  // 1 - p_t without cancellation
  const double log_p = log_sigmoid(z);
  const double q_gamma = std::pow(q, gamma);
  ValueAndGrad out;
  out.value = -alpha_t * q_gamma * log_p;
  // d/dz [-a q^g log p] = a (g p q^g log p - q^(g+1)), using dp/dz = p q.
  out.grad = sign * alpha_t * (gamma * p_t * q_gamma * log_p - q_gamma * q);
  return out;
}

double normalized_l1(const BoundingBox& pred, const BoundingBox& gt, const FrameSize& frame) {
  return (std::abs(pred.x1 - gt.x1) / frame.width + std::abs(pred.y1 - gt.y1) / frame.height +
          std::abs(pred.x2 - gt.x2) / frame.width + std::abs(pred.y2 - gt.y2) / frame.height) /
         4.0;
}

BoxLoss box_loss(const BoundingBox& pred, const BoundingBox& gt, const FrameSize& frame,
                 const BoxLossWeights& weights) {
  const double hull_w = std::max(pred.x2, gt.x2) - std::min(pred.x1, gt.x1);
  const double hull_h = std::max(pred.y2, gt.y2) - std::min(pred.y1, gt.y1);
  const double hull = hull_w * hull_h;
  if (!(hull > 0.0)) throw DomainError("box_loss: enclosing hull has zero area");

  const double iw_raw = std::min(pred.x2, gt.x2) - std::max(pred.x1, gt.x1);
  const double ih_raw = std::min(pred.y2, gt.y2) - std::max(pred.y1, gt.y1);
  const bool overlap = iw_raw > 0.0 && ih_raw > 0.0;
  const double iw = overlap ? iw_raw : 0.0;
  const double ih = overlap ? ih_raw : 0.0;
  const double inter = iw * ih;
  const double pw = pred.width();
  const double ph = pred.height();
  const double uni = pw * ph + gt.area() - inter;
  if (!(uni > 0.0)) throw DomainError("box_loss: union has zero area");

  const double giou = inter / uni - (hull - uni) / hull;
  BoxLoss out;
  out.value = weights.l1 * normalized_l1(pred, gt, frame) + weights.giou * (1.0 - giou);

  // Partial derivatives with respect to (x1, y1, x2, y2) of the prediction.
  const std::array<double, 4> d_area{-ph, -pw, ph, pw};
  std::array<double, 4> d_iw{}, d_ih{}, d_hw{}, d_hh{};
  if (overlap) {
    d_iw[0] = pred.x1 > gt.x1 ? -1.0 : 0.0;
    d_iw[2] = pred.x2 < gt.x2 ? 1.0 : 0.0;
    d_ih[1] = pred.y1 > gt.y1 ? -1.0 : 0.0;
    d_ih[3] = pred.y2 < gt.y2 ? 1.0 : 0.0;
  }
  d_hw[0] = pred.x1 < gt.x1 ? -1.0 : 0.0;
  d_hw[2] = pred.x2 > gt.x2 ? 1.0 : 0.0;
  d_hh[1] = pred.y1 < gt.y1 ? -1.0 : 0.0;
  d_hh[3] = pred.y2 > gt.y2 ? 1.0 : 0.0;

  const std::array<double, 4> pred_c{pred.x1, pred.y1, pred.x2, pred.y2};
  const std::array<double, 4> gt_c{gt.x1, gt.y1, gt.x2, gt.y2};
  const std::array<double, 4> scale{frame.width, frame.height, frame.width, frame.height};
  for (int k = 0; k < 4; ++k) {
    const double d_inter = d_iw[k] * ih + iw * d_ih[k];
    const double d_uni = d_area[k] - d_inter;
    const double d_hull = d_hw[k] * hull_h + hull_w * d_hh[k];
    // giou = I/U - 1 + U/H
    const double d_giou = (d_inter * uni - inter * d_uni) / (uni * uni) +
                          (d_uni * hull - uni * d_hull) / (hull * hull);
    const double diff = pred_c[k] - gt_c[k];
    const double d_l1 = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / (4.0 * scale[k]);
    out.grad[k] = weights.l1 * d_l1 - weights.giou * d_giou;
  }
  return out;
}

double period_ce(std::span<const double> lag_scores, int gt_lag) {
  if (gt_lag < 1 || gt_lag > static_cast<int>(lag_scores.size())) {
    throw DomainError("period_ce: ground-truth lag " + std::to_string(gt_lag) +
                      " outside [1, " + std::to_string(lag_scores.size()) + "]");
  }
  return -std::log(std::max(lag_scores[gt_lag - 1], kBceEpsilon));
}

double periodicity_bce(double phi, int target) {
  const double p = std::clamp(phi, kBceEpsilon, 1.0 - kBceEpsilon);
  return target == 1 ? -std::log(p) : -std::log1p(-p);
}

LossBreakdown combine(double l_inst, double l_period, double l_periodicity,
                      const LossWeights& weights) {
  LossBreakdown out;
  out.l_inst = l_inst;
  out.l_period = l_period;
  out.l_periodicity = l_periodicity;
  out.weights = weights;
  out.total = l_inst + weights.lambda * l_period + weights.mu * l_periodicity;
  return out;
}

namespace {

// Lag distribution of a prediction at frame t; a one-hot on the rounded
// scalar velocity when no scores were predicted.
std::vector<double> lag_distribution(const PeriodSignal& signal, int t, int cap) {
  if (signal.has_lag_scores()) {
    std::vector<double> row = signal.lag_scores[t];
    row.resize(cap, 0.0);
    return row;
  }
  std::vector<double> row(cap, 0.0);
  const int lag = std::clamp(static_cast<int>(std::lround(signal.velocity[t])), 1, cap);
  row[lag - 1] = 1.0;
  return row;
}

}  // namespace

LossBreakdown total_loss(const std::vector<InstanceRecord>& preds,
                         const std::vector<InstanceRecord>& gts, const assign::Matching& matching,
                         int num_frames, const LossWeights& weights,
                         const assign::MatchCostParams& cost_params) {
  double inst = 0.0;
  double period = 0.0;
  double periodicity = 0.0;
  const int cap = max_period(num_frames);
  for (const auto& [pi, gi] : matching.pairs) {
    const InstanceRecord& pred = preds.at(pi);
    const InstanceRecord& gt = gts.at(gi);
    inst += assign::hungarian_cost(pred, gt, num_frames, cost_params);
    if (!pred.period) {
      throw ValidationError("total_loss: prediction " + std::to_string(pred.track.instance_id) +
                            " carries no period signal");
    }
    const PeriodSignal target = gt.period ? *gt.period : signal_from_cycles(gt.cycles, num_frames);
    double ce = 0.0;
    int periodic_frames = 0;
    double bce = 0.0;
    for (int t = 0; t < num_frames; ++t) {
      const int phi_target = target.periodicity[t] >= 0.5 ? 1 : 0;
      bce += periodicity_bce(pred.period->periodicity[t], phi_target);
      if (phi_target == 1) {
        const auto row = lag_distribution(*pred.period, t, cap);
        ce += period_ce(row, static_cast<int>(std::lround(target.velocity[t])));
        ++periodic_frames;
      }
    }
    if (periodic_frames > 0) period += ce / periodic_frames;
    if (num_frames > 0) periodicity += bce / num_frames;
  }
  const auto pairs = static_cast<double>(matching.pairs.size());
  if (pairs == 0.0) return combine(0.0, 0.0, 0.0, weights);
  return combine(inst / pairs, period / pairs, periodicity / pairs, weights);
}

}  // namespace mrac::loss
