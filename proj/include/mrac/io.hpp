// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_IO_HPP
#define MRAC_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrac/core.hpp"

namespace mrac::io {

using nlohmann::json;

// Annotation / prediction JSON
//
//   { video_id, fps, num_frames, width?, height?, window_offset?,
//     instances: [ { instance_id, score?, boxes: [[t,x1,y1,x2,y2],...],
//                    cycles: [[s,e] or [s,e,confidence],...], count?,
//                    periodicity?: [T], period_velocity?: [T] or [T][T/2] } ] }
//
// A corpus file may instead hold { "videos": [ <video>, ... ] }.

/// Ground truth: validated against every ground-truth invariant.
VideoRecord load_annotations(const std::filesystem::path& path);
VideoRecord parse_annotations(const json& doc, const std::string& origin);

struct PredictionLoad {
  std::vector<InstanceRecord> instances;
  int clamped_frames = 0;
};

/// Predicted instances for a clip of `num_frames` frames. Velocities are
/// clamped into [1, T/2]; lag-score vectors are checked and reduced to
/// their argmax lag.
PredictionLoad load_predictions(const std::filesystem::path& path, int num_frames);
PredictionLoad parse_predictions(const json& video, int num_frames,
                                 const std::string& origin);

/// Like parse_predictions but keeps the video header.
struct PredictedVideo {
  VideoRecord record;
  int clamped_frames = 0;
  std::optional<int> window_offset;
};
PredictedVideo parse_predicted_video(const json& video, const std::string& origin);

json to_json(const VideoRecord& video, std::optional<int> window_offset = std::nullopt);
/// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string canonical_text(const json& doc);
void save_video(const std::filesystem::path& path, const VideoRecord& video);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Reads every video from a JSON file (single video or corpus) or from all
/// `*.json` files in a directory, sorted by video id.
std::vector<json> read_video_documents(const std::filesystem::path& path);
std::vector<VideoRecord> load_annotation_corpus(const std::filesystem::path& path);
std::vector<PredictedVideo> load_prediction_corpus(const std::filesystem::path& path);

// Binary feature file: 16-byte header
//   u16 magic 'M''F', u16 version, u32 N, u32 T, u32 C   (little-endian)
// followed by N*T*C little-endian float32, instance-major then frame-major.
inline constexpr std::uint16_t kFeatureMagic = 0x464D;
inline constexpr std::uint16_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

FeatureStream load_features(const std::filesystem::path& path);
FeatureStream parse_features(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_features(const FeatureStream& stream);
void save_features(const std::filesystem::path& path, const FeatureStream& stream);

}  // namespace mrac::io

#endif  // MRAC_IO_HPP
