// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrac/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "mrac/period.hpp"

namespace mrac::io {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail_parse(const std::string& origin, const std::string& what) {
  throw ParseError(origin + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& origin) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_parse(origin, std::string("missing field '") + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& origin, const std::string& what) {
  if (!v.is_number()) fail_parse(origin, what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail_parse(origin, what + " must be finite");
  return x;
}

int as_int(const json& v, const std::string& origin, const std::string& what) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x)) return static_cast<int>(x);
  }
  fail_parse(origin, what + " must be an integer");
}

std::vector<double> number_array(const json& v, const std::string& origin,
                                 const std::string& what) {
  if (!v.is_array()) fail_parse(origin, what + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], origin, what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

struct Header {
  std::string video_id;
  double fps = 0.0;
  int num_frames = 0;
  double width = 0.0;
  double height = 0.0;
};

Header parse_header(const json& doc, const std::string& origin) {
  if (!doc.is_object()) fail_parse(origin, "video entry must be an object");
  Header h;
  const auto& id = require(doc, "video_id", origin);
  if (!id.is_string()) fail_parse(origin, "video_id must be a string");
  h.video_id = id.get<std::string>();
  h.fps = as_number(require(doc, "fps", origin), origin, "fps");
  h.num_frames = as_int(require(doc, "num_frames", origin), origin, "num_frames");
  if (doc.contains("width")) h.width = as_number(doc["width"], origin, "width");
  if (doc.contains("height")) h.height = as_number(doc["height"], origin, "height");
  if (h.fps <= 0.0) throw ValidationError(origin + ": fps must be positive");
  if (h.num_frames <= 0) throw ValidationError(origin + ": num_frames must be positive");
  if (h.width < 0.0 || h.height < 0.0) {
    throw ValidationError(origin + ": scene extent must be non-negative");
  }
  if (!require(doc, "instances", origin).is_array()) {
    fail_parse(origin, "instances must be an array");
  }
  return h;
}

InstanceTrack parse_track(const json& inst, const std::string& origin) {
  InstanceTrack track;
  track.instance_id = as_int(require(inst, "instance_id", origin), origin, "instance_id");
  if (inst.contains("score")) track.score = as_number(inst["score"], origin, "score");
  const auto& boxes = require(inst, "boxes", origin);
  if (!boxes.is_array()) fail_parse(origin, "boxes must be an array");
  for (const auto& row : boxes) {
    if (!row.is_array() || row.size() != 5) {
      fail_parse(origin, "each box must be [t, x1, y1, x2, y2]");
    }
    const int t = as_int(row[0], origin, "box frame");
    BoundingBox b{as_number(row[1], origin, "x1"), as_number(row[2], origin, "y1"),
                  as_number(row[3], origin, "x2"), as_number(row[4], origin, "y2")};
    if (!track.boxes.emplace(t, b).second) {
      std::ostringstream os;
      os << origin << ": instance " << track.instance_id << " has two boxes on frame " << t;
      throw ValidationError(os.str());
    }
  }
  return track;
}

std::vector<RepetitionProposal> parse_cycles(const json& inst, const std::string& origin) {
  std::vector<RepetitionProposal> cycles;
  auto it = inst.find("cycles");
  if (it == inst.end()) return cycles;
  if (!it->is_array()) fail_parse(origin, "cycles must be an array");
  for (const auto& row : *it) {
    if (!row.is_array() || (row.size() != 2 && row.size() != 3)) {
      fail_parse(origin, "each cycle must be [s, e] or [s, e, confidence]");
    }
    RepetitionProposal p;
    p.start = as_int(row[0], origin, "cycle start");
    p.end = as_int(row[1], origin, "cycle end");
    if (row.size() == 3) p.confidence = as_number(row[2], origin, "cycle confidence");
    cycles.push_back(p);
  }
  return cycles;
}

// Reads period_velocity as scalars ([T]) or lag scores ([T][cap] or flat [T*cap]).
void parse_velocity(const json& v, int num_frames, PeriodSignal& signal,
                    const std::string& origin) {
  if (!v.is_array()) fail_parse(origin, "period_velocity must be an array");
  const int cap = max_period(num_frames);
  const auto frames = static_cast<std::size_t>(num_frames);
  if (!v.empty() && v[0].is_array()) {
    if (v.size() != frames) fail_parse(origin, "period_velocity must have one row per frame");
    for (std::size_t t = 0; t < frames; ++t) {
      signal.lag_scores.push_back(
          number_array(v[t], origin, "period_velocity[" + std::to_string(t) + "]"));
    }
  } else {
    std::vector<double> flat = number_array(v, origin, "period_velocity");
    if (flat.size() == frames) {
      signal.velocity = std::move(flat);
      return;
    }
    if (cap == 0 || flat.size() != frames * static_cast<std::size_t>(cap)) {
      std::ostringstream os;
      os << "period_velocity has " << flat.size() << " values; expected " << frames
         << " or " << frames * cap;
      fail_parse(origin, os.str());
    }
    for (std::size_t t = 0; t < frames; ++t) {
      signal.lag_scores.emplace_back(flat.begin() + t * cap, flat.begin() + (t + 1) * cap);
    }
  }
  signal.velocity.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& row = signal.lag_scores[t];
    if (row.empty()) {
      fail_parse(origin, "empty lag-score vector at frame " + std::to_string(t));
    }
    signal.velocity[t] =
        static_cast<double>(std::max_element(row.begin(), row.end()) - row.begin() + 1);
  }
}

std::string where(const std::string& origin, int instance_id) {
  return origin + " (instance " + std::to_string(instance_id) + ")";
}

}  // namespace

VideoRecord parse_annotations(const json& doc, const std::string& origin) {
  const Header h = parse_header(doc, origin);
  VideoRecord video;
  video.video_id = h.video_id;
  video.fps = h.fps;
  video.num_frames = h.num_frames;
  video.width = h.width;
  video.height = h.height;
  std::set<int> ids;
  for (const auto& inst : doc["instances"]) {
    InstanceRecord rec;
    rec.track = parse_track(inst, origin);
    const std::string loc = where(origin, rec.track.instance_id);
    if (!ids.insert(rec.track.instance_id).second) {
      throw ValidationError(loc + ": duplicate instance_id");
    }
    rec.cycles = parse_cycles(inst, loc);
    rec.count = inst.contains("count") ? as_number(inst["count"], loc, "count")
                                       : static_cast<double>(rec.cycles.size());
    const bool has_phi = inst.contains("periodicity");
    const bool has_psi = inst.contains("period_velocity");
    if (has_phi || has_psi) {
      PeriodSignal implied = signal_from_cycles(rec.cycles, h.num_frames);
      PeriodSignal signal;
      if (has_psi) {
        parse_velocity(inst["period_velocity"], h.num_frames, signal, loc);
      } else {
        signal.velocity = implied.velocity;
      }
      signal.periodicity =
          has_phi ? number_array(inst["periodicity"], loc, "periodicity") : implied.periodicity;
      rec.period = std::move(signal);
    }
    try {
      validate_ground_truth(rec, h.num_frames);
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ": " + e.what());
    }
    video.instances.push_back(std::move(rec));
  }
  return video;
}

PredictedVideo parse_predicted_video(const json& doc, const std::string& origin) {
  const Header h = parse_header(doc, origin);
  PredictedVideo out;
  out.record.video_id = h.video_id;
  out.record.fps = h.fps;
  out.record.num_frames = h.num_frames;
  out.record.width = h.width;
  out.record.height = h.height;
  if (doc.contains("window_offset")) {
    out.window_offset = as_int(doc["window_offset"], origin, "window_offset");
  }
  auto parsed = parse_predictions(doc, h.num_frames, origin);
  out.record.instances = std::move(parsed.instances);
  out.clamped_frames = parsed.clamped_frames;
  return out;
}

PredictionLoad parse_predictions(const json& video, int num_frames, const std::string& origin) {
  PredictionLoad out;
  const auto& instances = require(video, "instances", origin);
  if (!instances.is_array()) fail_parse(origin, "instances must be an array");
  std::set<int> ids;
  for (const auto& inst : instances) {
    InstanceRecord rec;
    rec.track = parse_track(inst, origin);
    const std::string loc = where(origin, rec.track.instance_id);
    if (!ids.insert(rec.track.instance_id).second) {
      throw ValidationError(loc + ": duplicate instance_id");
    }
    try {
      validate_track(rec.track, num_frames);
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ": " + e.what());
    }
    rec.cycles = parse_cycles(inst, loc);
    for (const auto& c : rec.cycles) {
      if (c.end <= c.start || c.start < 0 || c.end > num_frames) {
        std::ostringstream os;
        os << loc << ": proposal [" << c.start << ", " << c.end << ") is not a valid span";
        throw ValidationError(os.str());
      }
      if (!(c.confidence >= 0.0 && c.confidence <= 1.0)) {
        throw ValidationError(loc + ": proposal confidence outside [0, 1]");
      }
    }
    const bool has_phi = inst.contains("periodicity");
    const bool has_psi = inst.contains("period_velocity");
    if (has_phi != has_psi) {
      throw ValidationError(loc + ": periodicity and period_velocity must be given together");
    }
    if (has_psi) {
      PeriodSignal signal;
      parse_velocity(inst["period_velocity"], num_frames, signal, loc);
      signal.periodicity = number_array(inst["periodicity"], loc, "periodicity");
      out.clamped_frames += clamp_velocity(signal, num_frames);
      try {
        signal.validate(num_frames);
      } catch (const ValidationError& e) {
        throw ValidationError(loc + ": " + e.what());
      }
      rec.period = std::move(signal);
    }
    if (inst.contains("count")) {
      rec.count = as_number(inst["count"], loc, "count");
      if (rec.count < 0.0) throw ValidationError(loc + ": count must be non-negative");
    } else if (rec.period) {
      rec.count = period::derive_count(*rec.period);
    } else {
      rec.count = static_cast<double>(rec.cycles.size());
    }
    out.instances.push_back(std::move(rec));
  }
  return out;
}

VideoRecord load_annotations(const fs::path& path) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_annotations(doc, path.string());
}

PredictionLoad load_predictions(const fs::path& path, int num_frames) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_predictions(doc, num_frames, path.string());
}

json to_json(const VideoRecord& video, std::optional<int> window_offset) {
  json doc;
  doc["video_id"] = video.video_id;
  doc["fps"] = video.fps;
  doc["num_frames"] = video.num_frames;
  if (video.width > 0.0) doc["width"] = video.width;
  if (video.height > 0.0) doc["height"] = video.height;
  if (window_offset) doc["window_offset"] = *window_offset;
  json instances = json::array();
  for (const auto& rec : video.instances) {
    json inst;
    inst["instance_id"] = rec.track.instance_id;
    if (rec.track.score != 1.0) inst["score"] = rec.track.score;
    json boxes = json::array();
    for (const auto& [t, b] : rec.track.boxes) boxes.push_back({t, b.x1, b.y1, b.x2, b.y2});
    inst["boxes"] = std::move(boxes);
    json cycles = json::array();
    for (const auto& c : rec.cycles) {
      if (c.confidence == 1.0) {
        cycles.push_back({c.start, c.end});
      } else {
        cycles.push_back({c.start, c.end, c.confidence});
      }
    }
    inst["cycles"] = std::move(cycles);
    inst["count"] = rec.count;
    if (rec.period) {
      inst["periodicity"] = rec.period->periodicity;
      if (rec.period->has_lag_scores()) {
        inst["period_velocity"] = rec.period->lag_scores;
      } else {
        inst["period_velocity"] = rec.period->velocity;
      }
    }
    instances.push_back(std::move(inst));
  }
  doc["instances"] = std::move(instances);
  return doc;
}

std::string canonical_text(const json& doc) { return doc.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_video(const fs::path& path, const VideoRecord& video) {
  write_text(path, canonical_text(to_json(video)));
}

std::vector<json> read_video_documents(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<json> docs;
  for (const auto& file : files) {
    json doc;
    try {
      doc = json::parse(read_text(file));
    } catch (const json::parse_error& e) {
      throw ParseError(file.string() + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("videos")) {
      if (!doc["videos"].is_array()) fail_parse(file.string(), "videos must be an array");
      for (auto& v : doc["videos"]) docs.push_back(std::move(v));
    } else {
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<VideoRecord> load_annotation_corpus(const fs::path& path) {
  std::vector<VideoRecord> out;
  for (const auto& doc : read_video_documents(path)) {
    out.push_back(parse_annotations(doc, path.string()));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].video_id == out[i - 1].video_id) {
      throw ValidationError(path.string() + ": duplicate video_id " + out[i].video_id);
    }
  }
  return out;
}

std::vector<PredictedVideo> load_prediction_corpus(const fs::path& path) {
  std::vector<PredictedVideo> out;
  for (const auto& doc : read_video_documents(path)) {
    out.push_back(parse_predicted_video(doc, path.string()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.record.video_id < b.record.video_id;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].record.video_id == out[i - 1].record.video_id) {
      throw ValidationError(path.string() + ": duplicate video_id " + out[i].record.video_id);
    }
  }
  return out;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

}  // namespace

FeatureStream parse_features(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kFeatureHeaderBytes) {
    throw ParseError("feature file shorter than its 16-byte header");
  }
  const auto magic = static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
  const auto version = static_cast<std::uint16_t>(bytes[2] | (bytes[3] << 8));
  if (magic != kFeatureMagic) throw ParseError("feature file has a bad magic number");
  if (version != kFeatureVersion) {
    throw ParseError("unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t n = read_u32(&bytes[4]);
  const std::uint32_t t = read_u32(&bytes[8]);
  const std::uint32_t c = read_u32(&bytes[12]);
  if (c == 0) throw ValidationError("feature channel count must be positive");
  const auto expected = static_cast<std::uint64_t>(n) * t * c;
  const auto payload = bytes.size() - kFeatureHeaderBytes;
  if (payload % 4 != 0 || payload / 4 != expected) {
    std::ostringstream os;
    os << "dimension mismatch: header declares N=" << n << " T=" << t << " C=" << c << " ("
       << expected << " values), payload holds " << payload / 4 << " values"
       << (payload % 4 ? " plus a partial value" : "");
    throw ParseError(os.str());
  }
  std::vector<float> values(expected);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(read_u32(&bytes[kFeatureHeaderBytes + 4 * i]));
  }
  return FeatureStream(n, t, c, std::move(values));
}

FeatureStream load_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  try {
    return parse_features(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_features(const FeatureStream& stream) {
  std::vector<unsigned char> out;
  out.reserve(kFeatureHeaderBytes + 4 * stream.values().size());
  out.push_back(static_cast<unsigned char>(kFeatureMagic & 0xFF));
  out.push_back(static_cast<unsigned char>(kFeatureMagic >> 8));
  out.push_back(static_cast<unsigned char>(kFeatureVersion & 0xFF));
  out.push_back(static_cast<unsigned char>(kFeatureVersion >> 8));
  put_u32(out, stream.instances());
  put_u32(out, stream.frames());
  put_u32(out, stream.channels());
  for (float v : stream.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

void save_features(const fs::path& path, const FeatureStream& stream) {
  const auto bytes = encode_features(stream);
  write_text(path, std::string(bytes.begin(), bytes.end()));
}

}  // namespace mrac::io
