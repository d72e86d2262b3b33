// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_DATAGEN_HPP
#define MRAC_DATAGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mrac/core.hpp"

namespace mrac::datagen {

// Synthetic multi-person repetition scenes at the annotation + embedding
// level. Each source instance is a phase process over cycles whose length
// drifts as a bounded random walk; its embedding is the phase on a unit
// circle in a random 2-plane of R^C, and idle frames (lead-in, pauses,
// absences, tail) sit on a third orthogonal direction. Scenes place two or
// three same-fps sources side by side in horizontal lanes.

using Rng = std::mt19937_64;

/// Independent stream for (seed, tag, index); stable across thread counts.
Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index);

struct ScenarioConfig {
  int num_videos = 200;
  int instances_min = 2;
  int instances_max = 3;
  /// Frames given to the cycle process of one source (excluding lead-in and gaps).
  int active_frames_min = 96;
  int active_frames_max = 256;
  std::vector<double> fps_set{25.0, 30.0};
  double period_min = 8.0;
  double period_max = 20.0;
  /// Per-cycle relative change bound of the cycle length.
  double period_drift = 0.2;
  int lead_in_max = 16;
  double pause_probability = 0.0;
  int pause_min = 8;
  int pause_max = 16;
  /// Chance that a source leaves the scene (boxes absent) for a while.
  double inout_probability = 0.0;
  int absence_min = 6;
  int absence_max = 14;
  double lane_width = 224.0;
  double frame_height = 224.0;
  double box_wander = 6.0;
  int channels = 16;
  double noise_sigma = 0.0;
  /// Size of the source pool; 0 picks one from num_videos.
  int num_sources = 0;
  std::array<int, 3> split_ratio{7, 2, 1};
  std::optional<std::uint64_t> seed;

  /// Throws ValidationError on empty ranges, missing seed or a bad ratio.
  void validate() const;
  nlohmann::json to_json() const;
  /// Overrides fields present in `doc`; unknown keys are rejected.
  static ScenarioConfig from_json(const nlohmann::json& doc, ScenarioConfig base);
  static ScenarioConfig from_json(const nlohmann::json& doc);
};

struct GeneratedInstance {
  std::string source_id;
  double fps = 30.0;
  int num_frames = 0;
  /// Lane-local boxes, cycles, count and ground-truth signal. instance_id 0.
  InstanceRecord record;
  /// (num_frames, channels) embeddings.
  Eigen::MatrixXd features;
  /// Embedding used for frames without motion.
  Eigen::VectorXd idle;
};

/// Throws DomainError when not even one cycle fits.
GeneratedInstance generate_instance(const ScenarioConfig& config, Rng& rng,
                                    std::string source_id = "s0", double fps = 30.0);

struct Scene {
  VideoRecord record;
  /// One (T, C) matrix per instance, in instance order.
  std::vector<Eigen::MatrixXd> features;

  FeatureStream feature_stream() const;
};

/// Scene id shared by every ordering of the same sources.
std::string canonical_scene_id(std::span<const GeneratedInstance> instances);

/// Lane i is shifted right by i * lane_width; T is the longest instance and
/// shorter ones are absent (and idle) afterwards. Throws ValidationError on
/// mixed fps.
Scene compose_scene(std::span<const GeneratedInstance> instances, double lane_width = 224.0,
                    double frame_height = 0.0);

/// Rejects scenes whose canonical id was already accepted.
class SceneDeduplicator {
 public:
  bool insert(const std::string& canonical_id) { return seen_.insert(canonical_id).second; }
  std::size_t size() const { return seen_.size(); }

 private:
  std::set<std::string> seen_;
};

enum class AugmentKind { Flip, Scale };

/// Flip mirrors x about the scene width; Scale multiplies every coordinate
/// (and the scene extent). Temporal fields are untouched. Throws
/// ValidationError for a non-positive scale factor.
VideoRecord augment(const VideoRecord& record, AugmentKind kind, double factor = 1.0);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::array<int, 3> ratio{7, 2, 1};

  nlohmann::json to_json() const;
};

/// Seeded shuffle, then contiguous cuts sized by largest remainder. Needs at
/// least 10 videos.
SplitManifest make_splits(std::vector<std::string> video_ids, std::array<int, 3> ratio,
                          std::uint64_t seed);

struct CorpusStats {
  std::map<int, int> cycle_count_histogram;
  std::map<int, int> period_histogram;
  std::size_t two_instance_videos = 0;
  std::size_t three_instance_videos = 0;
  std::size_t total_cycles = 0;

  std::string to_text() const;
};

struct Corpus {
  std::vector<Scene> scenes;  // sorted by video id
  SplitManifest manifest;
  CorpusStats stats;
};

Corpus generate_corpus(const ScenarioConfig& config, int threads = 1);

/// Writes annotations/<id>.json, features/<id>.feat and manifest.json.
void write_corpus(const Corpus& corpus, const ScenarioConfig& config,
                  const std::filesystem::path& out_dir);

}  // namespace mrac::datagen

#endif  // MRAC_DATAGEN_HPP
