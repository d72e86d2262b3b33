// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mrac/assignment.hpp"
#include "mrac/io.hpp"
#include "mrac/parallel.hpp"

namespace mrac::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_value(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: bad value for '" + key + "': " + e.what());
  }
}

void require_object(const json& doc, const std::string& name) {
  if (!doc.is_object()) throw ValidationError("config: '" + name + "' must be an object");
}

void apply_eval(metrics::EvalConfig& c, const json& doc) {
  require_object(doc, "eval");
  for (const auto& [key, value] : doc.items()) {
    if (key == "ap_thresholds") {
      c.ap_thresholds = get_value<std::vector<double>>(value, key);
    } else if (key == "map_thresholds") {
      c.map_thresholds = get_value<std::vector<double>>(value, key);
    } else if (key == "siou_mode") {
      c.siou_mode = geometry::tube_mode_from_string(get_value<std::string>(value, key));
    } else if (key == "obo_mode") {
      c.obo_mode = metrics::obo_mode_from_string(get_value<std::string>(value, key));
    } else if (key == "mae_mode") {
      c.mae_mode = metrics::mae_mode_from_string(get_value<std::string>(value, key));
    } else if (key == "instance_match_threshold") {
      c.instance_match_threshold = get_value<double>(value, key);
    } else {
      throw ValidationError("config: unknown key 'eval." + key + "'");
    }
  }
}

period::LagCombine combine_from_string(const std::string& name) {
  if (name == "max") return period::LagCombine::Max;
  if (name == "mean") return period::LagCombine::Mean;
  throw ValidationError("unknown lag combine '" + name + "' (expected max or mean)");
}

stitch::LinkStrategy strategy_from_string(const std::string& name) {
  if (name == "greedy") return stitch::LinkStrategy::Greedy;
  if (name == "hungarian") return stitch::LinkStrategy::Hungarian;
  throw ValidationError("unknown link strategy '" + name + "' (expected greedy or hungarian)");
}

void apply_estimator(period::EstimatorParams& p, const json& doc) {
  require_object(doc, "estimator");
  for (const auto& [key, value] : doc.items()) {
    if (key == "peak_threshold") p.peak_threshold = get_value<double>(value, key);
    else if (key == "peak_tolerance") p.peak_tolerance = get_value<double>(value, key);
    else if (key == "median_window") p.median_window = get_value<int>(value, key);
    else if (key == "combine") p.combine = combine_from_string(get_value<std::string>(value, key));
    else throw ValidationError("config: unknown key 'estimator." + key + "'");
  }
}

void apply_link(stitch::LinkParams& p, const json& doc) {
  require_object(doc, "link");
  for (const auto& [key, value] : doc.items()) {
    if (key == "iou_threshold") p.iou_threshold = get_value<double>(value, key);
    else if (key == "strategy") p.strategy = strategy_from_string(get_value<std::string>(value, key));
    else if (key == "clip_length") p.clip_length = get_value<int>(value, key);
    else throw ValidationError("config: unknown key 'link." + key + "'");
  }
}

LogLevel log_level_from_string(const std::string& name) {
  if (name == "error") return LogLevel::Error;
  if (name == "warn") return LogLevel::Warn;
  if (name == "info") return LogLevel::Info;
  if (name == "debug") return LogLevel::Debug;
  throw ValidationError("unknown log level '" + name + "' (expected error, warn, info, debug)");
}

class Logger {
 public:
  Logger(std::ostream& err, LogLevel level) : err_(err), level_(level) {}
  void warn(const std::string& msg) const { emit(LogLevel::Warn, "warning", msg); }
  void info(const std::string& msg) const { emit(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) const { emit(LogLevel::Debug, "debug", msg); }

 private:
  void emit(LogLevel level, const char* tag, const std::string& msg) const {
    if (level <= level_) err_ << tag << ": " << msg << "\n";
  }
  std::ostream& err_;
  LogLevel level_;
};

void require_exists(const fs::path& path, const std::string& flag) {
  if (path.empty()) throw ValidationError("missing required option " + flag);
  if (!fs::exists(path)) throw ValidationError(flag + ": no such file or directory: " + path.string());
}

std::array<int, 3> parse_ratio(const std::string& text) {
  std::array<int, 3> ratio{};
  std::istringstream is(text);
  char sep1 = 0;
  char sep2 = 0;
  if (!(is >> ratio[0] >> sep1 >> ratio[1] >> sep2 >> ratio[2]) || sep1 != ':' || sep2 != ':' ||
      !is.eof()) {
    throw ValidationError("split ratio must look like 7:2:1, got '" + text + "'");
  }
  if (ratio[0] < 0 || ratio[1] < 0 || ratio[2] < 0 || ratio[0] + ratio[1] + ratio[2] <= 0) {
    throw ValidationError("split ratio '" + text + "' needs non-negative parts with a positive sum");
  }
  return ratio;
}

void zero_invisible(InstanceRecord& rec, int offset, int length) {
  for (int f = 0; f < length; ++f) {
    if (!rec.track.visible(offset + f)) rec.period->periodicity[f] = 0.0;
  }
}

// Features of each video, keyed by video id: a single file when `path` is a
// file, otherwise <dir>/<video_id>.feat.
FeatureStream features_for(const fs::path& path, const std::string& video_id, bool single) {
  if (single) return io::load_features(path);
  const fs::path file = path / (video_id + ".feat");
  if (!fs::exists(file)) throw ValidationError("no feature file for video '" + video_id + "': " + file.string());
  return io::load_features(file);
}

}  // namespace

void apply_config(RunConfig& config, const json& doc) {
  require_object(doc, "config");
  for (const auto& [key, value] : doc.items()) {
    if (key == "eval") apply_eval(config.eval, value);
    else if (key == "scenario") config.scenario = datagen::ScenarioConfig::from_json(value, config.scenario);
    else if (key == "estimator") apply_estimator(config.estimator, value);
    else if (key == "link") apply_link(config.link, value);
    else if (key == "threads") config.threads = get_value<int>(value, key);
    else if (key == "seed") config.scenario.seed = get_value<std::uint64_t>(value, key);
    else throw ValidationError("config: unknown key '" + key + "'");
  }
}

std::vector<InstanceRecord> count_video(const VideoRecord& tracks, const FeatureStream& features,
                                        const period::EstimatorParams& estimator,
                                        const stitch::LinkParams& link) {
  const int T = tracks.num_frames;
  if (features.instances() != tracks.instances.size()) {
    throw ValidationError("video '" + tracks.video_id + "': " +
                          std::to_string(tracks.instances.size()) + " tracks but " +
                          std::to_string(features.instances()) + " feature instances");
  }
  if (static_cast<int>(features.frames()) != T) {
    throw ValidationError("video '" + tracks.video_id + "': tracks span " + std::to_string(T) +
                          " frames but features span " + std::to_string(features.frames()));
  }
  std::vector<period::FrameMatrix> feats;
  for (std::uint32_t n = 0; n < features.instances(); ++n) {
    feats.push_back(period::instance_features(features, n));
  }

  auto estimate = [&](const InstanceRecord& rec, std::size_t n, int offset, int length) {
    InstanceRecord out;
    out.track = rec.track;
    out.period = period::estimate_period(feats[n].middleRows(offset, length), estimator);
    zero_invisible(out, 0, length);
    out.cycles = period::extract_proposals(*out.period, out.track.score);
    out.count = period::derive_count(*out.period);
    return out;
  };

  if (T <= link.clip_length) {
    std::vector<InstanceRecord> out;
    for (std::size_t n = 0; n < tracks.instances.size(); ++n) {
      InstanceRecord track_only;
      track_only.track = tracks.instances[n].track;
      out.push_back(estimate(track_only, n, 0, T));
    }
    return out;
  }
  std::vector<stitch::WindowPrediction> windows;
  for (int offset : stitch::window_plan(T, link.clip_length, link.clip_length / 2)) {
    stitch::WindowPrediction w;
    w.offset = offset;
    w.length = std::min(link.clip_length, T - offset);
    for (std::size_t n = 0; n < tracks.instances.size(); ++n) {
      InstanceRecord track_only;
      track_only.track = tracks.instances[n].track;
      auto local = stitch::restrict_to_window(track_only, offset, w.length);
      if (!local) continue;
      w.fragments.push_back(estimate(*local, n, offset, w.length));
    }
    windows.push_back(std::move(w));
  }
  return stitch::link_windows(windows, T, link);
}

int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  Logger log(err, config.log_level);
  if (config.output.empty()) throw ValidationError("missing required option --out");
  config.scenario.validate();
  const auto corpus = datagen::generate_corpus(config.scenario, config.threads);
  datagen::write_corpus(corpus, config.scenario, config.output);
  if (config.stats) out << corpus.stats.to_text();
  out << "videos=" << corpus.scenes.size() << " instances="
      << 2 * corpus.stats.two_instance_videos + 3 * corpus.stats.three_instance_videos
      << " periodic_events=" << corpus.stats.total_cycles
      << " train=" << corpus.manifest.train.size() << " val=" << corpus.manifest.val.size()
      << " test=" << corpus.manifest.test.size() << "\n";
  log.info("corpus written to " + config.output.string());
  return kExitOk;
}

int cmd_count(const RunConfig& config, std::ostream& out, std::ostream& err) {
  Logger log(err, config.log_level);
  require_exists(config.tracks, "--tracks");
  require_exists(config.features, "--features");
  if (config.output.empty()) throw ValidationError("missing required option --out");
  const bool single = !fs::is_directory(config.features);
  const auto tracks = io::load_prediction_corpus(config.tracks);
  if (single && tracks.size() != 1) {
    throw ValidationError("a single feature file needs exactly one tracks video, got " +
                          std::to_string(tracks.size()));
  }
  std::vector<VideoRecord> results(tracks.size());
  parallel_for(tracks.size(), config.threads, [&](std::size_t i) {
    const VideoRecord& video = tracks[i].record;
    VideoRecord pred = video;
    pred.instances = count_video(video, features_for(config.features, video.video_id, single),
                                 config.estimator, config.link);
    results[i] = std::move(pred);
  });

  for (const auto& v : results) {
    const int T = v.num_frames;
    const std::size_t windows =
        T <= config.link.clip_length
            ? 1
            : stitch::window_plan(T, config.link.clip_length, config.link.clip_length / 2).size();
    log.debug(v.video_id + ": " + std::to_string(T) + " frames, " + std::to_string(windows) +
              (windows == 1 ? " window" : " windows"));
  }

  const bool to_dir = fs::is_directory(config.output) || fs::is_directory(config.tracks);
  if (to_dir) {
    fs::create_directories(config.output);
    for (const auto& v : results) io::save_video(config.output / (v.video_id + ".json"), v);
  } else if (results.size() == 1) {
    io::save_video(config.output, results.front());
  } else {
    json doc;
    doc["videos"] = json::array();
    for (const auto& v : results) doc["videos"].push_back(io::to_json(v));
    io::write_text(config.output, io::canonical_text(doc));
  }
  std::size_t instances = 0;
  double total = 0.0;
  for (const auto& v : results) {
    instances += v.instances.size();
    for (const auto& rec : v.instances) total += rec.count;
  }
  out << "videos=" << results.size() << " instances=" << instances
      << " total_count=" << metrics::format_number(total) << "\n";
  log.info("predictions written to " + config.output.string());
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  Logger log(err, config.log_level);
  require_exists(config.pred, "--pred");
  require_exists(config.gt, "--gt");
  metrics::EvalConfig eval = config.eval;
  eval.threads = config.threads;
  const auto report = metrics::evaluate_files(config.pred, config.gt, eval);
  for (const auto& w : report.warnings) log.warn(w);
  if (!config.output.empty()) io::write_text(config.output, io::canonical_text(report.to_json()));
  if (!config.table.empty()) io::write_text(config.table, report.to_table());
  out << report.headline() << "\n";
  return kExitOk;
}

int cmd_match(const RunConfig& config, std::ostream& out, std::ostream&) {
  require_exists(config.pred, "--pred");
  require_exists(config.gt, "--gt");
  const auto preds = io::load_prediction_corpus(config.pred);
  const auto gts = io::load_annotation_corpus(config.gt);
  std::map<std::string, const VideoRecord*> pred_by_id;
  for (const auto& p : preds) pred_by_id[p.record.video_id] = &p.record;

  json doc;
  doc["videos"] = json::array();
  for (const auto& gt : gts) {
    auto it = pred_by_id.find(gt.video_id);
    if (it == pred_by_id.end()) throw ValidationError("no predictions for video '" + gt.video_id + "'");
    assign::MatchCostParams params;
    if (gt.width > 0.0) params.frame_width = gt.width;
    if (gt.height > 0.0) params.frame_height = gt.height;
    const auto costs = assign::build_cost_matrix(it->second->instances, gt.instances,
                                                 gt.num_frames, params);
    const auto matching = assign::hungarian(costs);
    json v;
    v["video_id"] = gt.video_id;
    json rows = json::array();
    for (std::size_t r = 0; r < costs.rows(); ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < costs.cols(); ++c) row.push_back(costs(r, c));
      rows.push_back(std::move(row));
    }
    v["costs"] = std::move(rows);
    json pairs = json::array();
    for (const auto& [p, g] : matching.pairs) {
      pairs.push_back({{"pred", it->second->instances[p].track.instance_id},
                       {"gt", gt.instances[g].track.instance_id},
                       {"cost", costs(p, g)}});
    }
    v["pairs"] = std::move(pairs);
    v["total_cost"] = matching.total_cost(costs);
    doc["videos"].push_back(std::move(v));
  }
  const std::string text = io::canonical_text(doc);
  if (config.output.empty()) out << text;
  else io::write_text(config.output, text);
  return kExitOk;
}

int cmd_stitch(const RunConfig& config, std::ostream& out, std::ostream&) {
  require_exists(config.input, "--input");
  if (config.output.empty()) throw ValidationError("missing required option --out");
  const auto docs = io::read_video_documents(config.input);
  struct Group {
    VideoRecord header;
    std::vector<stitch::WindowPrediction> windows;
  };
  std::map<std::string, Group> groups;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto parsed = io::parse_predicted_video(docs[i], config.input.string());
    if (!parsed.window_offset) {
      throw ValidationError("window document for video '" + parsed.record.video_id +
                            "' lacks window_offset");
    }
    auto& g = groups[parsed.record.video_id];
    if (g.windows.empty()) g.header = parsed.record;
    stitch::WindowPrediction w;
    w.offset = *parsed.window_offset;
    w.length = parsed.record.num_frames;
    w.fragments = std::move(parsed.record.instances);
    g.header.num_frames = std::max(g.header.num_frames, w.offset + w.length);
    g.windows.push_back(std::move(w));
  }
  std::vector<VideoRecord> results;
  for (auto& [id, g] : groups) {
    std::sort(g.windows.begin(), g.windows.end(),
              [](const auto& a, const auto& b) { return a.offset < b.offset; });
    VideoRecord v = g.header;
    v.instances = stitch::link_windows(g.windows, v.num_frames, config.link);
    results.push_back(std::move(v));
  }
  if (results.size() == 1) {
    io::save_video(config.output, results.front());
  } else {
    json doc;
    doc["videos"] = json::array();
    for (const auto& v : results) doc["videos"].push_back(io::to_json(v));
    io::write_text(config.output, io::canonical_text(doc));
  }
  out << "videos=" << results.size() << "\n";
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  CLI::App app{"Multi-instance repetition counting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  fs::path config_file;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::string log_level;
  app.add_option("--config", config_file, "JSON config file overriding defaults");
  app.add_option("--threads", threads, "Worker threads (also MRAC_THREADS)");
  app.add_option("--log-level", log_level, "error, warn, info or debug (also MRAC_LOG_LEVEL)");

  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus");
  std::optional<int> num_videos;
  std::optional<double> noise;
  std::optional<double> pause_probability;
  std::optional<double> inout_probability;
  std::string ratio;
  gen->add_option("--out", config.output, "Output directory")->required();
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--num-videos", num_videos, "Number of scenes");
  gen->add_option("--noise", noise, "Embedding noise sigma");
  gen->add_option("--pause-prob", pause_probability, "Per-instance pause probability");
  gen->add_option("--inout-prob", inout_probability, "Per-instance absence probability");
  gen->add_option("--ratio", ratio, "Split ratio, e.g. 7:2:1");
  gen->add_flag("--stats", config.stats, "Print corpus statistics");

  auto* count = app.add_subcommand("count", "Estimate counts from features and tracks");
  count->add_option("--features", config.features, "Feature file or directory")->required();
  count->add_option("--tracks", config.tracks, "Track file or directory")->required();
  count->add_option("--out", config.output, "Prediction file or directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string siou_mode;
  std::string obo_mode;
  std::string mae_mode;
  evaluate->add_option("--pred", config.pred, "Prediction file or directory")->required();
  evaluate->add_option("--gt", config.gt, "Ground-truth file or directory")->required();
  evaluate->add_option("--report", config.output, "Report JSON output");
  evaluate->add_option("--table", config.table, "Per-instance CSV output");
  evaluate->add_option("--siou-mode", siou_mode, "spatiotemporal or temporal");
  evaluate->add_option("--obo-mode", obo_mode, "per-instance or per-video");
  evaluate->add_option("--mae-mode", mae_mode, "absolute or signed");

  auto* match = app.add_subcommand("match", "Print Hungarian cost matrices");
  match->add_option("--pred", config.pred, "Prediction file or directory")->required();
  match->add_option("--gt", config.gt, "Ground-truth file or directory")->required();
  match->add_option("--out", config.output, "Output file (default stdout)");

  auto* stitch_cmd = app.add_subcommand("stitch", "Link window predictions into whole videos");
  stitch_cmd->add_option("--input", config.input, "Window documents (file or directory)")->required();
  stitch_cmd->add_option("--out", config.output, "Output file")->required();

  std::vector<std::string> argv_rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (const char* env = std::getenv("MRAC_THREADS"); env && *env) {
      try {
        config.threads = std::stoi(env);
      } catch (const std::exception&) {
        throw ValidationError(std::string("MRAC_THREADS must be an integer, got '") + env + "'");
      }
    }
    if (const char* env = std::getenv("MRAC_LOG_LEVEL"); env && *env) {
      config.log_level = log_level_from_string(env);
    }
    if (!config_file.empty()) {
      require_exists(config_file, "--config");
      json doc;
      try {
        doc = json::parse(io::read_text(config_file));
      } catch (const json::parse_error& e) {
        throw ParseError(config_file.string() + ": " + e.what());
      }
      apply_config(config, doc);
    }
    if (!log_level.empty()) config.log_level = log_level_from_string(log_level);
    if (threads) config.threads = *threads;
    if (config.threads < 1) throw ValidationError("thread count must be at least 1");
    if (seed) config.scenario.seed = *seed;
    if (num_videos) config.scenario.num_videos = *num_videos;
    if (noise) config.scenario.noise_sigma = *noise;
    if (pause_probability) config.scenario.pause_probability = *pause_probability;
    if (inout_probability) config.scenario.inout_probability = *inout_probability;
    if (!ratio.empty()) config.scenario.split_ratio = parse_ratio(ratio);
    if (!siou_mode.empty()) config.eval.siou_mode = geometry::tube_mode_from_string(siou_mode);
    if (!obo_mode.empty()) config.eval.obo_mode = metrics::obo_mode_from_string(obo_mode);
    if (!mae_mode.empty()) config.eval.mae_mode = metrics::mae_mode_from_string(mae_mode);

    if (gen->parsed()) return cmd_generate(config, out, err);
    if (count->parsed()) return cmd_count(config, out, err);
    if (evaluate->parsed()) return cmd_evaluate(config, out, err);
    if (match->parsed()) return cmd_match(config, out, err);
    if (stitch_cmd->parsed()) return cmd_stitch(config, out, err);
    err << "error: no subcommand\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace mrac::cli
