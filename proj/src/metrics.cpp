// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "mrac/assignment.hpp"
#include "mrac/io.hpp"
#include "mrac/parallel.hpp"

namespace mrac::metrics {

std::string_view to_string(OboMode mode) {
  return mode == OboMode::PerInstance ? "per-instance" : "per-video";
}

std::string_view to_string(MaeMode mode) {
  return mode == MaeMode::Absolute ? "absolute" : "signed";
}

OboMode obo_mode_from_string(std::string_view name) {
  if (name == "per-instance") return OboMode::PerInstance;
  if (name == "per-video") return OboMode::PerVideo;
  throw ValidationError("unknown OBO mode '" + std::string(name) +
                        "' (expected per-instance or per-video)");
}

MaeMode mae_mode_from_string(std::string_view name) {
  if (name == "absolute") return MaeMode::Absolute;
  if (name == "signed") return MaeMode::Signed;
  throw ValidationError("unknown MAE mode '" + std::string(name) +
                        "' (expected absolute or signed)");
}

std::vector<double> map_threshold_grid() {
  std::vector<double> grid;
  for (int pct = 50; pct <= 95; pct += 5) grid.push_back(pct / 100.0);
  return grid;
}

namespace {

void check_thresholds(const std::vector<double>& values, const char* name) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0 && values[i] <= 1.0)) {
      throw ValidationError(std::string(name) + ": thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw ValidationError(std::string(name) + ": thresholds must increase strictly");
    }
  }
}

}  // namespace

void EvalConfig::validate() const {
  check_thresholds(ap_thresholds, "ap_thresholds");
  check_thresholds(map_thresholds, "map_thresholds");
  if (map_thresholds.empty()) throw ValidationError("map_thresholds must not be empty");
  if (!(instance_match_threshold >= 0.0 && instance_match_threshold <= 1.0)) {
    throw ValidationError("instance_match_threshold must lie in [0, 1]");
  }
}

namespace {

// sIoU of every predicted proposal against every ground-truth proposal,
// per video.
struct VideoOverlaps {
  std::vector<std::pair<std::size_t, std::size_t>> gt_refs;  // (instance, proposal)
  std::vector<std::pair<std::size_t, std::size_t>> pred_refs;
  std::vector<double> siou;  // pred_refs.size() x gt_refs.size()
};

VideoOverlaps video_overlaps(const EvalVideo& video, geometry::TubeOverlapMode mode) {
  VideoOverlaps out;
  for (std::size_t i = 0; i < video.gt.size(); ++i) {
    for (std::size_t k = 0; k < video.gt[i].cycles.size(); ++k) out.gt_refs.emplace_back(i, k);
  }
  for (std::size_t i = 0; i < video.pred.size(); ++i) {
    for (std::size_t k = 0; k < video.pred[i].cycles.size(); ++k) out.pred_refs.emplace_back(i, k);
  }
  out.siou.resize(out.pred_refs.size() * out.gt_refs.size());
  for (std::size_t p = 0; p < out.pred_refs.size(); ++p) {
    const auto& pi = video.pred[out.pred_refs[p].first];
    const auto& ps = pi.cycles[out.pred_refs[p].second];
    for (std::size_t g = 0; g < out.gt_refs.size(); ++g) {
      const auto& gi = video.gt[out.gt_refs[g].first];
      const auto& gs = gi.cycles[out.gt_refs[g].second];
      out.siou[p * out.gt_refs.size() + g] =
          geometry::tube_siou({pi.track, ps}, {gi.track, gs}, mode);
    }
  }
  return out;
}

struct Ranked {
  std::size_t video;
  std::size_t row;  // index into VideoOverlaps::pred_refs
  double confidence;
};

std::vector<Ranked> rank_predictions(std::span<const EvalVideo> videos,
                                     const std::vector<VideoOverlaps>& overlaps) {
  std::vector<Ranked> ranked;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    for (std::size_t r = 0; r < overlaps[v].pred_refs.size(); ++r) {
      const auto [inst, prop] = overlaps[v].pred_refs[r];
      ranked.push_back({v, r, videos[v].pred[inst].cycles[prop].confidence});
    }
  }
  auto key = [&](const Ranked& x) {
    const auto [inst, prop] = overlaps[x.video].pred_refs[x.row];
    const auto& rec = videos[x.video].pred[inst];
    const auto& c = rec.cycles[prop];
    return std::make_tuple(-x.confidence, std::string_view(videos[x.video].video_id), c.start,
                           c.end, rec.track.instance_id, prop);
  };
  std::sort(ranked.begin(), ranked.end(),
            [&](const Ranked& a, const Ranked& b) { return key(a) < key(b); });
  return ranked;
}

ApResult ap_from_ranking(std::span<const EvalVideo> videos,
                         const std::vector<VideoOverlaps>& overlaps,
                         const std::vector<Ranked>& ranked, double threshold) {
  ApResult out;
  out.num_pred = ranked.size();
  std::vector<std::vector<char>> gt_used(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) {
    gt_used[v].assign(overlaps[v].gt_refs.size(), 0);
    out.num_gt += overlaps[v].gt_refs.size();
  }
  if (out.num_gt == 0) return out;

  std::vector<char> is_tp(ranked.size(), 0);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& ov = overlaps[ranked[k].video];
    auto& used = gt_used[ranked[k].video];
    const std::size_t ng = ov.gt_refs.size();
    double best = -1.0;
    std::size_t best_g = ng;
    for (std::size_t g = 0; g < ng; ++g) {
      if (used[g]) continue;
      const double s = ov.siou[ranked[k].row * ng + g];
      if (s > best) {
        best = s;
        best_g = g;
      }
    }
    if (best_g < ng && best >= threshold) {
      used[best_g] = 1;
      is_tp[k] = 1;
      ++out.num_tp;
    }
  }

  // All-point interpolation: precision envelope from the right.
  std::vector<double> precision(ranked.size()), recall(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    tp += is_tp[k];
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(out.num_gt);
  }
  for (std::size_t k = ranked.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double previous_recall = 0.0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (!is_tp[k]) continue;
    out.ap += (recall[k] - previous_recall) * precision[k];
    previous_recall = recall[k];
  }
  return out;
}

std::vector<VideoOverlaps> all_overlaps(std::span<const EvalVideo> videos,
                                        geometry::TubeOverlapMode mode, int threads) {
  std::vector<VideoOverlaps> overlaps(videos.size());
  parallel_for(videos.size(), threads,
               [&](std::size_t v) { overlaps[v] = video_overlaps(videos[v], mode); });
  return overlaps;
}

}  // namespace

ApResult period_ap_detail(std::span<const EvalVideo> videos, double threshold,
                          geometry::TubeOverlapMode mode) {
  const auto overlaps = all_overlaps(videos, mode, 1);
  return ap_from_ranking(videos, overlaps, rank_predictions(videos, overlaps), threshold);
}

double period_ap(std::span<const EvalVideo> videos, double threshold,
                 geometry::TubeOverlapMode mode) {
  return period_ap_detail(videos, threshold, mode).ap;
}

double period_map(std::span<const EvalVideo> videos, const EvalConfig& config) {
  config.validate();
  const auto overlaps = all_overlaps(videos, config.siou_mode, config.threads);
  const auto ranked = rank_predictions(videos, overlaps);
  double sum = 0.0;
  for (double thr : config.map_thresholds) {
    sum += ap_from_ranking(videos, overlaps, ranked, thr).ap;
  }
  return sum / static_cast<double>(config.map_thresholds.size());
}

InstanceMatch match_instances(const EvalVideo& video, double min_siou) {
  InstanceMatch out;
  out.pred_for_gt.assign(video.gt.size(), std::nullopt);
  out.siou_for_gt.assign(video.gt.size(), 0.0);
  assign::CostMatrix costs(video.pred.size(), video.gt.size());
  std::vector<double> siou(video.pred.size() * video.gt.size());
  for (std::size_t p = 0; p < video.pred.size(); ++p) {
    for (std::size_t g = 0; g < video.gt.size(); ++g) {
      const double s =
          geometry::track_siou(video.pred[p].track, video.gt[g].track, video.num_frames);
      siou[p * video.gt.size() + g] = s;
      const bool ok = s > 0.0 && s >= min_siou;
      costs(p, g) = ok ? 1.0 - s : assign::kForbiddenCost;
    }
  }
  const auto matching = assign::hungarian(costs);
  std::vector<char> pred_used(video.pred.size(), 0);
  for (const auto& [p, g] : matching.pairs) {
    out.pred_for_gt[g] = p;
    out.siou_for_gt[g] = siou[p * video.gt.size() + g];
    pred_used[p] = 1;
  }
  for (std::size_t p = 0; p < video.pred.size(); ++p) {
    if (!pred_used[p]) out.unmatched_preds.push_back(p);
  }
  return out;
}

VideoCounts video_counts(const EvalVideo& video, double min_siou) {
  VideoCounts out;
  out.video_id = video.video_id;
  const InstanceMatch match = match_instances(video, min_siou);
  double mae = 0.0, signed_mae = 0.0, abs_err = 0.0;
  int within = 0;
  for (std::size_t g = 0; g < video.gt.size(); ++g) {
    const auto& gt = video.gt[g];
    if (!(gt.count > 0.0)) {
      throw ValidationError(video.video_id + ": ground-truth instance " +
                            std::to_string(gt.track.instance_id) +
                            " has count 0; counting metrics need at least one cycle");
    }
    InstanceCountRow row;
    row.gt_instance_id = gt.track.instance_id;
    row.gt_count = gt.count;
    if (match.pred_for_gt[g]) {
      const auto& pred = video.pred[*match.pred_for_gt[g]];
      row.pred_instance_id = pred.track.instance_id;
      row.pred_count = pred.count;
      row.match_siou = match.siou_for_gt[g];
    }
    row.abs_error = std::abs(row.gt_count - row.pred_count);
    row.relative_error = row.abs_error / row.gt_count;
    row.signed_relative_error = (row.gt_count - row.pred_count) / row.gt_count;
    row.off_by_one = row.abs_error <= 1.0;
    mae += row.relative_error;
    signed_mae += row.signed_relative_error;
    abs_err += row.abs_error;
    within += row.off_by_one ? 1 : 0;
    out.rows.push_back(row);
  }
  for (std::size_t p : match.unmatched_preds) {
    out.false_positive_instances.push_back(video.pred[p].track.instance_id);
  }
  if (!video.gt.empty()) {
    const double m = static_cast<double>(video.gt.size());
    out.mae = mae / m;
    out.signed_mae = signed_mae / m;
    out.obo_per_instance = within / m;
    out.obo_per_video = abs_err / m <= 1.0 ? 1.0 : 0.0;
  }
  return out;
}

namespace {

struct CountSummary {
  double mae_abs = 0.0;
  double mae_signed = 0.0;
  double obo_instance = 0.0;
  double obo_video = 0.0;
};

CountSummary summarize(const std::vector<VideoCounts>& per_video) {
  CountSummary s;
  std::size_t n = 0;
  for (const auto& v : per_video) {
    if (v.rows.empty()) continue;
    s.mae_abs += v.mae;
    s.mae_signed += v.signed_mae;
    s.obo_instance += v.obo_per_instance;
    s.obo_video += v.obo_per_video;
    ++n;
  }
  if (n > 0) {
    const double d = static_cast<double>(n);
    s.mae_abs /= d;
    s.mae_signed /= d;
    s.obo_instance /= d;
    s.obo_video /= d;
  }
  return s;
}

std::vector<VideoCounts> all_counts(std::span<const EvalVideo> videos, double min_siou,
                                    int threads) {
  std::vector<VideoCounts> out(videos.size());
  parallel_for(videos.size(), threads,
               [&](std::size_t v) { out[v] = video_counts(videos[v], min_siou); });
  return out;
}

}  // namespace

double avg_mae(std::span<const EvalVideo> videos, MaeMode mode, double min_siou) {
  const auto s = summarize(all_counts(videos, min_siou, 1));
  return mode == MaeMode::Absolute ? s.mae_abs : s.mae_signed;
}

double avg_obo(std::span<const EvalVideo> videos, OboMode mode, double min_siou) {
  const auto s = summarize(all_counts(videos, min_siou, 1));
  return mode == OboMode::PerInstance ? s.obo_instance : s.obo_video;
}

EvalReport evaluate(std::span<const EvalVideo> videos, const EvalConfig& config) {
  config.validate();
  EvalReport report;
  report.config = config;
  report.num_videos = videos.size();

  const auto overlaps = all_overlaps(videos, config.siou_mode, config.threads);
  const auto ranked = rank_predictions(videos, overlaps);
  for (double thr : config.ap_thresholds) {
    report.period_ap.emplace_back(thr, ap_from_ranking(videos, overlaps, ranked, thr).ap);
  }
  double sum = 0.0;
  for (double thr : config.map_thresholds) {
    const auto r = ap_from_ranking(videos, overlaps, ranked, thr);
    report.period_ap_grid.emplace_back(thr, r.ap);
    report.num_gt_proposals = r.num_gt;
    report.num_pred_proposals = r.num_pred;
    sum += r.ap;
  }
  report.period_map = sum / static_cast<double>(config.map_thresholds.size());
  if (report.num_gt_proposals == 0) {
    report.warnings.push_back("no ground-truth proposals; Period-AP is reported as 0");
  }

  report.videos = all_counts(videos, config.instance_match_threshold, config.threads);
  for (const auto& v : report.videos) {
    if (v.rows.empty()) {
      report.warnings.push_back(v.video_id + ": no ground-truth instances; skipped by counting metrics");
    }
  }
  const auto s = summarize(report.videos);
  report.avg_mae_absolute = s.mae_abs;
  report.avg_mae_signed = s.mae_signed;
  report.avg_obo_per_instance = s.obo_instance;
  report.avg_obo_per_video = s.obo_video;
  report.avg_mae = config.mae_mode == MaeMode::Absolute ? s.mae_abs : s.mae_signed;
  report.avg_obo = config.obo_mode == OboMode::PerInstance ? s.obo_instance : s.obo_video;
  return report;
}

EvalReport evaluate_files(const std::filesystem::path& pred, const std::filesystem::path& gt,
                          const EvalConfig& config) {
  const auto gts = io::load_annotation_corpus(gt);
  const auto preds = io::load_prediction_corpus(pred);
  std::map<std::string, const io::PredictedVideo*> by_id;
  for (const auto& p : preds) by_id.emplace(p.record.video_id, &p);
  std::vector<std::string> missing, extra;
  std::vector<EvalVideo> videos;
  int clamped = 0;
  for (const auto& g : gts) {
    auto it = by_id.find(g.video_id);
    if (it == by_id.end()) {
      missing.push_back(g.video_id);
      continue;
    }
    const auto& p = *it->second;
    if (p.record.num_frames != g.num_frames) {
      throw ValidationError(g.video_id + ": prediction has " +
                            std::to_string(p.record.num_frames) + " frames, ground truth " +
                            std::to_string(g.num_frames));
    }
    clamped += p.clamped_frames;
    videos.push_back({g.video_id, g.num_frames, g.instances, p.record.instances});
    by_id.erase(it);
  }
  for (const auto& [id, _] : by_id) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream os;
    os << "video ids differ between predictions and ground truth.";
    if (!missing.empty()) {
      os << " Missing predictions:";
      for (const auto& id : missing) os << ' ' << id;
      os << '.';
    }
    if (!extra.empty()) {
      os << " Unknown predicted videos:";
      for (const auto& id : extra) os << ' ' << id;
      os << '.';
    }
    throw ValidationError(os.str());
  }
  EvalReport report = evaluate(videos, config);
  if (clamped > 0) {
    report.warnings.push_back(std::to_string(clamped) +
                              " predicted period velocities were clamped into [1, T/2]");
  }
  return report;
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string s(buf, end);
  if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string threshold_key(double thr) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << thr;
  return os.str();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  using nlohmann::json;
  json cfg;
  cfg["ap_thresholds"] = config.ap_thresholds;
  cfg["map_thresholds"] = config.map_thresholds;
  cfg["siou_mode"] = std::string(geometry::to_string(config.siou_mode));
  cfg["obo_mode"] = std::string(to_string(config.obo_mode));
  cfg["mae_mode"] = std::string(to_string(config.mae_mode));
  cfg["instance_match_threshold"] = config.instance_match_threshold;
  cfg["ap_pooling"] = "global";
  cfg["pr_interpolation"] = "all-point";

  json doc;
  doc["config"] = std::move(cfg);
  json ap = json::object();
  for (const auto& [thr, v] : period_ap) ap[threshold_key(thr)] = v;
  doc["period_ap"] = std::move(ap);
  json grid = json::object();
  for (const auto& [thr, v] : period_ap_grid) grid[threshold_key(thr)] = v;
  doc["period_ap_grid"] = std::move(grid);
  doc["period_map"] = period_map;
  doc["avg_mae"] = avg_mae;
  doc["avg_obo"] = avg_obo;
  doc["avg_mae_absolute"] = avg_mae_absolute;
  doc["avg_mae_signed"] = avg_mae_signed;
  doc["avg_obo_per_instance"] = avg_obo_per_instance;
  doc["avg_obo_per_video"] = avg_obo_per_video;
  doc["num_videos"] = num_videos;
  doc["num_gt_proposals"] = num_gt_proposals;
  doc["num_pred_proposals"] = num_pred_proposals;
  doc["notes"] = json::array(
      {"avg_mae default mode uses the absolute relative error; the signed form is avg_mae_signed",
       "avg_obo default mode is per-instance; the per-video indicator form is avg_obo_per_video",
       "Period-AP pools proposals over all videos"});
  json per_video = json::array();
  for (const auto& v : videos) {
    json jv;
    jv["video_id"] = v.video_id;
    jv["mae"] = v.mae;
    jv["signed_mae"] = v.signed_mae;
    jv["obo_per_instance"] = v.obo_per_instance;
    jv["obo_per_video"] = v.obo_per_video;
    jv["false_positive_instances"] = v.false_positive_instances;
    json rows = json::array();
    for (const auto& r : v.rows) {
      json jr;
      jr["gt_instance_id"] = r.gt_instance_id;
      jr["pred_instance_id"] = r.pred_instance_id ? json(*r.pred_instance_id) : json(nullptr);
      jr["match_siou"] = r.match_siou;
      jr["gt_count"] = r.gt_count;
      jr["pred_count"] = r.pred_count;
      jr["abs_error"] = r.abs_error;
      jr["relative_error"] = r.relative_error;
      jr["off_by_one"] = r.off_by_one;
      rows.push_back(std::move(jr));
    }
    jv["instances"] = std::move(rows);
    per_video.push_back(std::move(jv));
  }
  doc["videos"] = std::move(per_video);
  doc["warnings"] = warnings;
  return doc;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "video_id,gt_instance_id,pred_instance_id,match_siou,gt_count,pred_count,abs_error,"
        "relative_error,off_by_one\n";
  for (const auto& v : videos) {
    for (const auto& r : v.rows) {
      os << v.video_id << ',' << r.gt_instance_id << ','
         << (r.pred_instance_id ? std::to_string(*r.pred_instance_id) : std::string()) << ','
         << format_number(r.match_siou) << ',' << format_number(r.gt_count) << ','
         << format_number(r.pred_count) << ',' << format_number(r.abs_error) << ','
         << format_number(r.relative_error) << ',' << (r.off_by_one ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::string EvalReport::headline() const {
  return "period_map=" + format_number(period_map) + " avg_mae=" + format_number(avg_mae) +
         " avg_obo=" + format_number(avg_obo);
}

}  // namespace mrac::metrics
