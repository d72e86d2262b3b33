// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mrac/io.hpp"
#include "mrac/parallel.hpp"

namespace mrac::datagen {

Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  std::uint64_t tag_hash = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : tag) {
    tag_hash ^= ch;
    tag_hash *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag_hash),
                    static_cast<std::uint32_t>(tag_hash >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace {

void validate_ranges(const ScenarioConfig& c) {
  auto fail = [](const std::string& what) { throw ValidationError("scenario config: " + what); };
  if (c.num_videos < 1) fail("num_videos must be positive");
  if (c.instances_min < 1 || c.instances_min > c.instances_max) {
    fail("instances range is empty");
  }
  if (c.active_frames_min < 1 || c.active_frames_min > c.active_frames_max) {
    fail("active frame range is empty");
  }
  if (c.fps_set.empty()) fail("fps set is empty");
  for (double f : c.fps_set) {
    if (!(f > 0.0)) fail("fps values must be positive");
  }
  if (!(c.period_min >= 2.0) || c.period_min > c.period_max) {
    fail("period range must satisfy 2 <= min <= max");
  }
  if (2.0 * std::lround(c.period_max) > c.active_frames_min) {
    fail("active_frames_min must hold two cycles of period_max");
  }
  if (!(c.period_drift >= 0.0 && c.period_drift < 1.0)) fail("period_drift must lie in [0, 1)");
  if (c.lead_in_max < 0) fail("lead_in_max must be non-negative");
  if (!(c.pause_probability >= 0.0 && c.pause_probability <= 1.0)) {
    fail("pause_probability must lie in [0, 1]");
  }
  if (c.pause_min < 1 || c.pause_min > c.pause_max) fail("pause range is empty");
  if (!(c.inout_probability >= 0.0 && c.inout_probability <= 1.0)) {
    fail("inout_probability must lie in [0, 1]");
  }
  if (c.absence_min < 1 || c.absence_min > c.absence_max) fail("absence range is empty");
  if (!(c.lane_width > 0.0) || !(c.frame_height > 0.0)) fail("lane extent must be positive");
  if (!(c.box_wander >= 0.0)) fail("box_wander must be non-negative");
  if (c.channels < 3) fail("channels must be at least 3");
  if (!(c.noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
  if (c.num_sources < 0) fail("num_sources must be non-negative");
}

}  // namespace

void ScenarioConfig::validate() const {
  validate_ranges(*this);
  if (!seed) throw ValidationError("scenario config: a seed is required");
  if (split_ratio[0] < 0 || split_ratio[1] < 0 || split_ratio[2] < 0 ||
      split_ratio[0] + split_ratio[1] + split_ratio[2] <= 0) {
    throw ValidationError("scenario config: split ratio needs non-negative parts with a positive sum");
  }
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  j["num_videos"] = num_videos;
  j["instances_min"] = instances_min;
  j["instances_max"] = instances_max;
  j["active_frames_min"] = active_frames_min;
  j["active_frames_max"] = active_frames_max;
  j["fps_set"] = fps_set;
  j["period_min"] = period_min;
  j["period_max"] = period_max;
  j["period_drift"] = period_drift;
  j["lead_in_max"] = lead_in_max;
  j["pause_probability"] = pause_probability;
  j["pause_min"] = pause_min;
  j["pause_max"] = pause_max;
  j["inout_probability"] = inout_probability;
  j["absence_min"] = absence_min;
  j["absence_max"] = absence_max;
  j["lane_width"] = lane_width;
  j["frame_height"] = frame_height;
  j["box_wander"] = box_wander;
  j["channels"] = channels;
  j["noise_sigma"] = noise_sigma;
  j["num_sources"] = num_sources;
  j["split_ratio"] = split_ratio;
  if (seed) j["seed"] = *seed;
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& doc, ScenarioConfig c) {
  if (!doc.is_object()) throw ValidationError("scenario config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "num_videos") c.num_videos = value.get<int>();
      else if (key == "instances_min") c.instances_min = value.get<int>();
      else if (key == "instances_max") c.instances_max = value.get<int>();
      else if (key == "active_frames_min") c.active_frames_min = value.get<int>();
      else if (key == "active_frames_max") c.active_frames_max = value.get<int>();
      else if (key == "fps_set") c.fps_set = value.get<std::vector<double>>();
      else if (key == "period_min") c.period_min = value.get<double>();
      else if (key == "period_max") c.period_max = value.get<double>();
      else if (key == "period_drift") c.period_drift = value.get<double>();
      else if (key == "lead_in_max") c.lead_in_max = value.get<int>();
      else if (key == "pause_probability") c.pause_probability = value.get<double>();
      else if (key == "pause_min") c.pause_min = value.get<int>();
      else if (key == "pause_max") c.pause_max = value.get<int>();
      else if (key == "inout_probability") c.inout_probability = value.get<double>();
      else if (key == "absence_min") c.absence_min = value.get<int>();
      else if (key == "absence_max") c.absence_max = value.get<int>();
      else if (key == "lane_width") c.lane_width = value.get<double>();
      else if (key == "frame_height") c.frame_height = value.get<double>();
      else if (key == "box_wander") c.box_wander = value.get<double>();
      else if (key == "channels") c.channels = value.get<int>();
      else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
      else if (key == "num_sources") c.num_sources = value.get<int>();
      else if (key == "split_ratio") c.split_ratio = value.get<std::array<int, 3>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ValidationError("scenario config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("scenario config: bad value for '" + key + "': " + e.what());
    }
  }
  return c;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& doc) {
  return from_json(doc, ScenarioConfig{});
}

namespace {

struct Gap {
  int before_cycle = 0;
  int length = 0;
  bool absent = false;
};

Eigen::MatrixXd orthonormal_frame(Rng& rng, int channels, int columns) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(channels, columns);
  for (int c = 0; c < columns; ++c) {
    for (int r = 0; r < channels; ++r) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(channels, columns);
}

}  // namespace

GeneratedInstance generate_instance(const ScenarioConfig& config, Rng& rng,
                                    std::string source_id, double fps) {
  validate_ranges(config);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const double base_period = config.period_min + (config.period_max - config.period_min) * unit(rng);
  const int active = uniform_int(config.active_frames_min, config.active_frames_max);
  const int lead = uniform_int(0, config.lead_in_max);

  std::vector<int> lengths;
  double period = base_period;
  int used = 0;
  for (;;) {
    const int len = std::max(2, static_cast<int>(std::lround(period)));
    if (used + len > active) break;
    lengths.push_back(len);
    used += len;
    const double step = config.period_drift * (2.0 * unit(rng) - 1.0);
    period = std::clamp(period * (1.0 + step), config.period_min, config.period_max);
  }
  if (lengths.empty()) {
    throw DomainError("generate_instance: no whole cycle of period " +
                      std::to_string(base_period) + " fits in " + std::to_string(active) +
                      " frames");
  }
  const int cycles_n = static_cast<int>(lengths.size());

  std::vector<Gap> gaps;
  const bool pause = unit(rng) < config.pause_probability;
  const int pause_len = uniform_int(config.pause_min, config.pause_max);
  const int pause_at = uniform_int(1, std::max(1, cycles_n - 1));
  const bool absence = unit(rng) < config.inout_probability;
  const int absence_len = uniform_int(config.absence_min, config.absence_max);
  const int absence_at = uniform_int(1, std::max(1, cycles_n - 1));
  if (pause && cycles_n >= 2) gaps.push_back({pause_at, pause_len, false});
  if (absence && cycles_n >= 2) gaps.push_back({absence_at, absence_len, true});

  GeneratedInstance out;
  out.source_id = std::move(source_id);
  out.fps = fps;
  InstanceRecord& rec = out.record;
  std::vector<char> absent_frame;
  int t = lead;
  for (int k = 0; k < cycles_n; ++k) {
    for (const auto& g : gaps) {
      if (g.before_cycle != k) continue;
      if (g.absent) {
        absent_frame.resize(t + g.length, 0);
        std::fill(absent_frame.begin() + t, absent_frame.end(), 1);
      }
      t += g.length;
    }
    rec.cycles.push_back({t, t + lengths[k], 1.0});
    t += lengths[k];
  }
  const int frames = t + (active - used);
  out.num_frames = frames;
  absent_frame.resize(frames, 0);
  rec.count = static_cast<double>(cycles_n);
  rec.period = signal_from_cycles(rec.cycles, frames);

  // Embeddings: phase on the (u, v) circle, idle frames on w.
  const int channels = config.channels;
  const Eigen::MatrixXd basis = orthonormal_frame(rng, channels, 3);
  out.idle = basis.col(2);
  out.features.resize(frames, channels);
  std::vector<double> phase(frames, -1.0);
  for (int k = 0; k < cycles_n; ++k) {
    const auto& c = rec.cycles[k];
    for (int f = c.start; f < c.end; ++f) {
      phase[f] = k + static_cast<double>(f - c.start) / c.length();
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int f = 0; f < frames; ++f) {
    Eigen::VectorXd e;
    if (phase[f] >= 0.0) {
      const double angle = 2.0 * std::numbers::pi * phase[f];
      e = std::cos(angle) * basis.col(0) + std::sin(angle) * basis.col(1);
    } else {
      e = out.idle;
    }
    for (int c = 0; c < channels; ++c) e[c] += config.noise_sigma * normal(rng);
    out.features.row(f) = e.transpose();
  }

  // Slowly wandering box inside the lane.
  const double w = config.lane_width * (0.3 + 0.2 * unit(rng));
  const double h = config.frame_height * (0.65 + 0.2 * unit(rng));
  const double drift_period = 60.0 + 100.0 * unit(rng);
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  for (int f = 0; f < frames; ++f) {
    if (absent_frame[f]) continue;
    const double a = 2.0 * std::numbers::pi * f / drift_period + theta;
    const double cx = std::clamp(config.lane_width / 2.0 + config.box_wander * std::sin(a),
                                 w / 2.0, config.lane_width - w / 2.0);
    const double cy = std::clamp(config.frame_height / 2.0 + 0.5 * config.box_wander * std::cos(a),
                                 h / 2.0, config.frame_height - h / 2.0);
    rec.track.boxes.emplace(f, BoundingBox{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0});
  }
  return out;
}

FeatureStream Scene::feature_stream() const {
  if (features.empty()) return FeatureStream(0, record.num_frames, 1, {});
  const auto frames = static_cast<std::uint32_t>(features.front().rows());
  const auto channels = static_cast<std::uint32_t>(features.front().cols());
  std::vector<float> values;
  values.reserve(features.size() * frames * channels);
  for (const auto& m : features) {
    for (std::uint32_t t = 0; t < frames; ++t) {
      for (std::uint32_t c = 0; c < channels; ++c) values.push_back(static_cast<float>(m(t, c)));
    }
  }
  return FeatureStream(static_cast<std::uint32_t>(features.size()), frames, channels,
                       std::move(values));
}

std::string canonical_scene_id(std::span<const GeneratedInstance> instances) {
  std::vector<std::string> ids;
  for (const auto& inst : instances) ids.push_back(inst.source_id);
  std::sort(ids.begin(), ids.end());
  std::string out = "mr";
  for (const auto& id : ids) out += (out.size() == 2 ? "-" : "+") + id;
  return out;
}

Scene compose_scene(std::span<const GeneratedInstance> instances, double lane_width,
                    double frame_height) {
  if (instances.empty()) throw ValidationError("compose_scene: no instances");
  for (const auto& inst : instances) {
    if (inst.fps != instances.front().fps) {
      throw ValidationError("compose_scene: instances mix fps " +
                            std::to_string(instances.front().fps) + " and " +
                            std::to_string(inst.fps));
    }
  }
  Scene scene;
  VideoRecord& video = scene.record;
  video.video_id = canonical_scene_id(instances);
  video.fps = instances.front().fps;
  for (const auto& inst : instances) video.num_frames = std::max(video.num_frames, inst.num_frames);
  video.width = lane_width * static_cast<double>(instances.size());
  double max_y = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    InstanceRecord rec;
    rec.track.instance_id = static_cast<int>(i);
    rec.track.score = inst.record.track.score;
    const double dx = lane_width * static_cast<double>(i);
    for (const auto& [t, b] : inst.record.track.boxes) {
      rec.track.boxes.emplace(t, BoundingBox{b.x1 + dx, b.y1, b.x2 + dx, b.y2});
      max_y = std::max(max_y, b.y2);
    }
    rec.cycles = inst.record.cycles;
    rec.count = inst.record.count;
    rec.period = signal_from_cycles(rec.cycles, video.num_frames);
    video.instances.push_back(std::move(rec));

    Eigen::MatrixXd feats(video.num_frames, inst.features.cols());
    feats.topRows(inst.num_frames) = inst.features;
    for (int t = inst.num_frames; t < video.num_frames; ++t) feats.row(t) = inst.idle.transpose();
    scene.features.push_back(std::move(feats));
  }
  video.height = frame_height > 0.0 ? frame_height : max_y;
  return scene;
}

VideoRecord augment(const VideoRecord& record, AugmentKind kind, double factor) {
  VideoRecord out = record;
  if (kind == AugmentKind::Scale) {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw ValidationError("augment: scale factor must be positive");
    }
    out.width *= factor;
    out.height *= factor;
    for (auto& inst : out.instances) {
      for (auto& [t, b] : inst.track.boxes) b = {b.x1 * factor, b.y1 * factor, b.x2 * factor, b.y2 * factor};
    }
    return out;
  }
  double width = record.width;
  if (!(width > 0.0)) {
    for (const auto& inst : record.instances) {
      for (const auto& [t, b] : inst.track.boxes) width = std::max(width, b.x2);
    }
  }
  for (auto& inst : out.instances) {
    for (auto& [t, b] : inst.track.boxes) b = {width - b.x2, b.y1, width - b.x1, b.y2};
  }
  return out;
}

nlohmann::json SplitManifest::to_json() const {
  nlohmann::json j;
  j["train"] = train;
  j["val"] = val;
  j["test"] = test;
  j["ratio"] = std::to_string(ratio[0]) + ":" + std::to_string(ratio[1]) + ":" +
               std::to_string(ratio[2]);
  j["sizes"] = {train.size(), val.size(), test.size()};
  return j;
}

SplitManifest make_splits(std::vector<std::string> video_ids, std::array<int, 3> ratio,
                          std::uint64_t seed) {
  if (video_ids.size() < 10) {
    throw ValidationError("make_splits needs at least 10 videos, got " +
                          std::to_string(video_ids.size()));
  }
  const int parts = ratio[0] + ratio[1] + ratio[2];
  if (ratio[0] < 0 || ratio[1] < 0 || ratio[2] < 0 || parts <= 0) {
    throw ValidationError("make_splits: ratio needs non-negative parts with a positive sum");
  }
  std::sort(video_ids.begin(), video_ids.end());
  Rng rng = substream(seed, "splits", 0);
  std::shuffle(video_ids.begin(), video_ids.end(), rng);

  // Largest remainder: floor shares first, leftovers to the largest
  // fractional parts (earlier split first on ties).
  const auto n = static_cast<long long>(video_ids.size());
  std::array<long long, 3> size{};
  std::array<long long, 3> remainder{};
  long long assigned = 0;
  for (int i = 0; i < 3; ++i) {
    size[i] = n * ratio[i] / parts;
    remainder[i] = n * ratio[i] % parts;
    assigned += size[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) ++size[order[k % 3]];

  SplitManifest m;
  m.ratio = ratio;
  auto first = video_ids.begin();
  m.train.assign(first, first + size[0]);
  m.val.assign(first + size[0], first + size[0] + size[1]);
  m.test.assign(first + size[0] + size[1], video_ids.end());
  return m;
}

std::string CorpusStats::to_text() const {
  std::ostringstream os;
  os << "videos with 2 instances: " << two_instance_videos << "\n";
  os << "videos with 3 instances: " << three_instance_videos << "\n";
  os << "periodic events: " << total_cycles << "\n";
  os << "cycle-count histogram (cycles per instance: instances)\n";
  for (const auto& [k, v] : cycle_count_histogram) os << "  " << k << ": " << v << "\n";
  os << "period histogram (cycle length in frames: cycles)\n";
  for (const auto& [k, v] : period_histogram) os << "  " << k << ": " << v << "\n";
  return os.str();
}

namespace {

std::string source_name(int index) {
  std::ostringstream os;
  os << 's';
  os.width(5);
  os.fill('0');
  os << index;
  return os.str();
}

// Which sources each scene uses: first a pass covering every source, then
// random same-fps draws until enough distinct scenes exist.
std::vector<std::vector<int>> plan_scenes(const ScenarioConfig& config,
                                          const std::vector<GeneratedInstance>& sources) {
  Rng rng = substream(*config.seed, "plan", 0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::map<double, std::vector<int>> by_fps;
  for (int j = 0; j < static_cast<int>(sources.size()); ++j) by_fps[sources[j].fps].push_back(j);
  std::vector<std::vector<int>> groups;
  for (auto& [fps, members] : by_fps) {
    if (static_cast<int>(members.size()) >= config.instances_min) groups.push_back(members);
  }
  if (groups.empty()) {
    throw ValidationError("scenario config: no fps group has enough sources for one scene");
  }

  SceneDeduplicator dedup;
  std::vector<std::vector<int>> planned;
  auto try_add = [&](std::vector<int> combo) {
    std::vector<std::string> ids;
    for (int j : combo) ids.push_back(sources[j].source_id);
    std::sort(ids.begin(), ids.end());
    std::string key;
    for (const auto& id : ids) key += id + "+";
    if (dedup.insert(key)) planned.push_back(std::move(combo));
  };
  auto draw_from = [&](const std::vector<int>& members, int k, std::vector<int> combo) {
    while (static_cast<int>(combo.size()) < k) {
      const int pick = members[uniform_int(0, static_cast<int>(members.size()) - 1)];
      if (std::find(combo.begin(), combo.end(), pick) == combo.end()) combo.push_back(pick);
    }
    return combo;
  };

  std::vector<std::vector<int>> coverage;
  for (const auto& members : groups) {
    std::vector<int> order = members;
    std::shuffle(order.begin(), order.end(), rng);
    const int size = static_cast<int>(order.size());
    for (int pos = 0; pos < size;) {
      const int k = std::min(uniform_int(config.instances_min, config.instances_max), size);
      std::vector<int> combo(order.begin() + pos, order.begin() + std::min(size, pos + k));
      pos += static_cast<int>(combo.size());
      coverage.push_back(draw_from(members, std::max(k, config.instances_min), std::move(combo)));
    }
  }
  std::shuffle(coverage.begin(), coverage.end(), rng);
  for (auto& combo : coverage) {
    if (static_cast<int>(planned.size()) >= config.num_videos) break;
    try_add(std::move(combo));
  }
  const long long max_attempts = 1000LL * config.num_videos + 1000;
  for (long long attempt = 0;
       static_cast<int>(planned.size()) < config.num_videos && attempt < max_attempts; ++attempt) {
    const auto& members = groups[uniform_int(0, static_cast<int>(groups.size()) - 1)];
    const int k = std::min(uniform_int(config.instances_min, config.instances_max),
                           static_cast<int>(members.size()));
    if (k < config.instances_min) continue;
    try_add(draw_from(members, k, {}));
  }
  if (static_cast<int>(planned.size()) < config.num_videos) {
    throw ValidationError("scenario config: cannot draw " + std::to_string(config.num_videos) +
                          " distinct scenes from " + std::to_string(sources.size()) + " sources");
  }
  return planned;
}

}  // namespace

Corpus generate_corpus(const ScenarioConfig& config, int threads) {
  config.validate();
  const int num_sources = config.num_sources > 0
                              ? config.num_sources
                              : std::max(2 * config.instances_max, (5 * config.num_videos + 3) / 4);
  std::vector<GeneratedInstance> sources(num_sources);
  parallel_for(sources.size(), threads, [&](std::size_t j) {
    Rng rng = substream(*config.seed, "source", j);
    const double fps = config.fps_set[j % config.fps_set.size()];
    sources[j] = generate_instance(config, rng, source_name(static_cast<int>(j)), fps);
  });

  const auto planned = plan_scenes(config, sources);
  Corpus corpus;
  corpus.scenes.resize(planned.size());
  parallel_for(planned.size(), threads, [&](std::size_t i) {
    std::vector<GeneratedInstance> members;
    for (int j : planned[i]) members.push_back(sources[j]);
    corpus.scenes[i] = compose_scene(members, config.lane_width, config.frame_height);
  });
  std::sort(corpus.scenes.begin(), corpus.scenes.end(), [](const Scene& a, const Scene& b) {
    return a.record.video_id < b.record.video_id;
  });

  std::vector<std::string> ids;
  for (const auto& s : corpus.scenes) ids.push_back(s.record.video_id);
  if (ids.size() >= 10) {
    corpus.manifest = make_splits(ids, config.split_ratio, *config.seed);
  } else {
    corpus.manifest.train = ids;
    corpus.manifest.ratio = config.split_ratio;
  }

  for (const auto& s : corpus.scenes) {
    const auto n = s.record.instances.size();
    if (n == 2) ++corpus.stats.two_instance_videos;
    if (n == 3) ++corpus.stats.three_instance_videos;
    for (const auto& inst : s.record.instances) {
      ++corpus.stats.cycle_count_histogram[static_cast<int>(inst.cycles.size())];
      corpus.stats.total_cycles += inst.cycles.size();
      for (const auto& c : inst.cycles) ++corpus.stats.period_histogram[c.length()];
    }
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const ScenarioConfig& config,
                  const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "annotations");
  fs::create_directories(out_dir / "features");
  for (const auto& scene : corpus.scenes) {
    io::save_video(out_dir / "annotations" / (scene.record.video_id + ".json"), scene.record);
    io::save_features(out_dir / "features" / (scene.record.video_id + ".feat"),
                      scene.feature_stream());
  }
  nlohmann::json manifest;
  manifest["config"] = config.to_json();
  manifest["splits"] = corpus.manifest.to_json();
  manifest["num_videos"] = corpus.scenes.size();
  manifest["periodic_events"] = corpus.stats.total_cycles;
  io::write_text(out_dir / "manifest.json", io::canonical_text(manifest));
}

}  // namespace mrac::datagen
