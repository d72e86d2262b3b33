// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_METRICS_HPP
#define MRAC_METRICS_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrac/core.hpp"
#include "mrac/geometry.hpp"

namespace mrac::metrics {

enum class OboMode { PerInstance, PerVideo };
enum class MaeMode { Absolute, Signed };

std::string_view to_string(OboMode mode);
std::string_view to_string(MaeMode mode);
OboMode obo_mode_from_string(std::string_view name);
MaeMode mae_mode_from_string(std::string_view name);

/// 0.50, 0.55, ..., 0.95.
std::vector<double> map_threshold_grid();

struct EvalConfig {
  std::vector<double> ap_thresholds{0.5, 0.75};
  std::vector<double> map_thresholds = map_threshold_grid();
  geometry::TubeOverlapMode siou_mode = geometry::TubeOverlapMode::Spatiotemporal;
  OboMode obo_mode = OboMode::PerInstance;
  MaeMode mae_mode = MaeMode::Absolute;
  /// Minimum whole-video tube sIoU for a predicted instance to take over a
  /// ground-truth instance in the counting metrics.
  double instance_match_threshold = 0.3;
  int threads = 1;

  /// Thresholds must lie in (0, 1] and increase strictly.
  void validate() const;
};

/// Ground truth and predictions of one video.
struct EvalVideo {
  std::string video_id;
  int num_frames = 0;
  std::vector<InstanceRecord> gt;
  std::vector<InstanceRecord> pred;
};

struct ApResult {
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
  std::size_t num_tp = 0;
};

/// Period-AP at one sIoU threshold. Proposals are pooled over all videos,
/// ranked by confidence (ties: video id, start, end, instance id), and each
/// is matched to the unmatched ground-truth proposal of its own video with
/// the highest sIoU; AP is the area under the all-point interpolated
/// precision/recall curve. AP is 0 when there is no ground-truth proposal.
ApResult period_ap_detail(std::span<const EvalVideo> videos, double threshold,
                          geometry::TubeOverlapMode mode = geometry::TubeOverlapMode::Spatiotemporal);
double period_ap(std::span<const EvalVideo> videos, double threshold,
                 geometry::TubeOverlapMode mode = geometry::TubeOverlapMode::Spatiotemporal);

/// Mean Period-AP over config.map_thresholds.
double period_map(std::span<const EvalVideo> videos, const EvalConfig& config = {});

/// One-to-one assignment of predicted to ground-truth instances by Hungarian
/// over whole-video tube sIoU; pairs below the threshold are rejected.
struct InstanceMatch {
  std::vector<std::optional<std::size_t>> pred_for_gt;
  std::vector<double> siou_for_gt;
  std::vector<std::size_t> unmatched_preds;
};
InstanceMatch match_instances(const EvalVideo& video, double min_siou = 0.3);

struct InstanceCountRow {
  int gt_instance_id = 0;
  std::optional<int> pred_instance_id;
  double match_siou = 0.0;
  double gt_count = 0.0;
  double pred_count = 0.0;
  double abs_error = 0.0;
  double relative_error = 0.0;  // |gt - pred| / gt
  double signed_relative_error = 0.0;  // (gt - pred) / gt
  bool off_by_one = false;
};

struct VideoCounts {
  std::string video_id;
  std::vector<InstanceCountRow> rows;
  std::vector<int> false_positive_instances;
  double mae = 0.0;
  double signed_mae = 0.0;
  double obo_per_instance = 0.0;
  double obo_per_video = 0.0;
};

/// Count comparison for one video. Throws ValidationError when a
/// ground-truth count is zero.
VideoCounts video_counts(const EvalVideo& video, double min_siou = 0.3);

/// Mean over videos of the mean relative count error over ground-truth
/// instances. Videos without ground-truth instances are skipped.
double avg_mae(std::span<const EvalVideo> videos, MaeMode mode = MaeMode::Absolute,
               double min_siou = 0.3);

/// PerInstance: mean over videos of the fraction of instances within one
/// count. PerVideo: mean over videos of [mean absolute count error <= 1].
double avg_obo(std::span<const EvalVideo> videos, OboMode mode = OboMode::PerInstance,
               double min_siou = 0.3);

struct EvalReport {
  EvalConfig config;
  std::vector<std::pair<double, double>> period_ap;  // (threshold, AP) for ap_thresholds
  std::vector<std::pair<double, double>> period_ap_grid;  // over map_thresholds
  double period_map = 0.0;
  double avg_mae = 0.0;
  double avg_obo = 0.0;
  double avg_mae_absolute = 0.0;
  double avg_mae_signed = 0.0;
  double avg_obo_per_instance = 0.0;
  double avg_obo_per_video = 0.0;
  std::size_t num_videos = 0;
  std::size_t num_gt_proposals = 0;
  std::size_t num_pred_proposals = 0;
  std::vector<VideoCounts> videos;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  /// One row per ground-truth instance, comma separated, with a header.
  std::string to_table() const;
  /// "period_map=<x> avg_mae=<y> avg_obo=<z>".
  std::string headline() const;
};

EvalReport evaluate(std::span<const EvalVideo> videos, const EvalConfig& config = {});

/// Loads both corpora, pairs videos by id and evaluates. Throws
/// ValidationError listing ids present on one side only.
EvalReport evaluate_files(const std::filesystem::path& pred, const std::filesystem::path& gt,
                          const EvalConfig& config = {});

/// Shortest round-trip decimal, always with a fractional part ("1.0").
std::string format_number(double value);

}  // namespace mrac::metrics

#endif  // MRAC_METRICS_HPP
