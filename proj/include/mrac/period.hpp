// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_PERIOD_HPP
#define MRAC_PERIOD_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mrac/core.hpp"

namespace mrac::period {

/// (T, C) embeddings of one instance, one row per frame.
using FrameMatrix = Eigen::MatrixXd;

FrameMatrix instance_features(const FeatureStream& stream, std::uint32_t instance);

/// Row-wise softmax of pairwise cosine similarity scaled by 1/sqrt(C),
/// followed by an elementwise ReLU (which never changes a softmax output).
/// Throws DomainError naming the first zero-norm frame.
Eigen::MatrixXd self_similarity(const FrameMatrix& features);

/// Row-wise softmax of (X Wq)(X Wk)^T / sqrt(C').
Eigen::MatrixXd attention_scores(const FrameMatrix& features, const Eigen::MatrixXd& query,
                                 const Eigen::MatrixXd& key);
/// Identity projections.
Eigen::MatrixXd attention_scores(const FrameMatrix& features);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// How the forward (t + l) and backward (t - l) similarities of a lag are
/// combined. Out-of-range partners are dropped in both modes.
enum class LagCombine { Mean, Max };

/// Deterministic stand-in for a learned period head.
///
/// For every frame the lag curve over 1..T/2 is read off the self-similarity
/// row. The chosen lag is the first local maximum whose height above the row
/// mean is within `peak_tolerance` of the global maximum. A frame is periodic
/// when that peak's prominence, (peak - mean) / (diagonal - mean), reaches
/// `peak_threshold` and the curve dips below the row mean at a shorter lag.
/// Both outputs are then median-filtered over `median_window` frames.
struct EstimatorParams {
  double peak_threshold = 0.6;
  double peak_tolerance = 0.15;
  int median_window = 5;
  LagCombine combine = LagCombine::Max;
};

/// Throws DomainError for fewer than four frames.
PeriodSignal estimate_period(const FrameMatrix& features, const EstimatorParams& params = {});

inline constexpr double kPeriodicityCutoff = 0.5;

/// Splits each periodic run into cycles by accumulating phase sum(1/psi) and
/// cutting whenever it crosses an integer. Trailing partial cycles are
/// dropped. Confidence is the mean periodicity of the cycle times
/// `track_score`.
std::vector<RepetitionProposal> extract_proposals(const PeriodSignal& signal,
                                                  double track_score = 1.0);

/// Repetition count: sum of 1/psi over periodic frames.
double derive_count(const PeriodSignal& signal);

/// Projection of the centered embeddings onto their top principal direction
/// (power iteration, relative tolerance 1e-8). The sign is chosen so the
/// first non-zero entry is positive. Throws DomainError for T < 2 or zero
/// variance.
std::vector<double> speed_profile(const FrameMatrix& features);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// The k gallery rows nearest to `query` in Euclidean distance, closest
/// first, ties to the lower index.
std::vector<Neighbor> retrieve_nn(const Eigen::VectorXd& query, const Eigen::MatrixXd& gallery,
                                  std::size_t k = 1);
/// Gallery rows are every (instance, frame) vector, numbered n * T + t.
std::vector<Neighbor> retrieve_nn(const Eigen::VectorXd& query, const FeatureStream& gallery,
                                  std::size_t k = 1);

}  // namespace mrac::period

#endif  // MRAC_PERIOD_HPP
