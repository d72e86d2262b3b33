// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "mrac/cli.hpp"
#include "mrac/datagen.hpp"
#include "mrac/io.hpp"
#include "mrac/stitch.hpp"

namespace fs = std::filesystem;
using namespace mrac;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mrac");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  ::unsetenv("MRAC_THREADS");
  ::unsetenv("MRAC_LOG_LEVEL");
  const fs::path dir = fs::temp_directory_path() / ("mrac_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

// Byte contents of every regular file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

// Two-person scene of fixed period 8 over 128 frames, written as
// annotations + features.
void write_fixed_scene(const fs::path& dir) {
  datagen::ScenarioConfig c;
  c.seed = 1;
  c.period_min = c.period_max = 8.0;
  c.period_drift = 0.0;
  c.lead_in_max = 0;
  c.active_frames_min = c.active_frames_max = 128;
  datagen::Rng r0 = datagen::substream(1, "cli", 0);
  datagen::Rng r1 = datagen::substream(1, "cli", 1);
  const std::vector<datagen::GeneratedInstance> parts{datagen::generate_instance(c, r0, "s00001"),
                                                      datagen::generate_instance(c, r1, "s00002")};
  const datagen::Scene s = datagen::compose_scene(parts);
  REQUIRE(s.record.num_frames == 128);
  io::save_video(dir / "scene.json", s.record);
  io::save_features(dir / "scene.feat", s.feature_stream());
}

}  // namespace

TEST_CASE("generate is deterministic and reports a summary") {
  const fs::path dir = scratch("generate");
  const auto a = invoke({"generate", "--out", (dir / "a").string(), "--seed", "3", "--num-videos", "12"});
  const auto b = invoke({"generate", "--out", (dir / "b").string(), "--seed", "3", "--num-videos", "12",
                      "--threads", "3"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("videos=12 instances=", 0) == 0);
  CHECK(a.out.find(" train=9 val=2 test=1") != std::string::npos);
  CHECK(tree(dir / "a") == tree(dir / "b"));
  CHECK(fs::exists(dir / "a" / "manifest.json"));

  const auto stats = invoke({"generate", "--out", (dir / "c").string(), "--seed", "3", "--num-videos", "12",
                          "--stats"});
  CHECK(stats.code == 0);
  CHECK(stats.out.size() > a.out.size());
  fs::remove_all(dir);
}

TEST_CASE("bad generate options exit with the input code") {
  const fs::path dir = scratch("generate_bad");
  CHECK(invoke({"generate", "--out", (dir / "x").string(), "--seed", "1", "--ratio", "0:0:0"}).code == 2);
  CHECK(invoke({"generate", "--out", (dir / "x").string(), "--seed", "1", "--ratio", "7-2-1"}).code == 2);
  CHECK(invoke({"generate", "--out", (dir / "x").string()}).code == 2);  // no seed
  CHECK(invoke({"generate"}).code == 2);
  CHECK(invoke({"bogus"}).code == 2);
  CHECK(invoke({}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("count on a long scene uses three windows") {
  const fs::path dir = scratch("count");
  write_fixed_scene(dir);
  const auto r = invoke({"--log-level", "debug", "count", "--features", (dir / "scene.feat").string(),
                      "--tracks", (dir / "scene.json").string(), "--out", (dir / "pred.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("128 frames, 3 windows") != std::string::npos);
  CHECK(r.out.rfind("videos=1 instances=2 total_count=", 0) == 0);
  const VideoRecord pred = io::load_prediction_corpus(dir / "pred.json").front().record;
  REQUIRE(pred.instances.size() == 2);
  for (const auto& inst : pred.instances) CHECK(std::abs(inst.count - 16.0) <= 1.0);

  const auto scored = invoke({"evaluate", "--pred", (dir / "pred.json").string(), "--gt",
                           (dir / "scene.json").string()});
  CHECK(scored.code == 0);
  CHECK(scored.out.find("avg_obo=1.0") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("count rejects unusable feature files") {
  const fs::path dir = scratch("count_bad");
  write_fixed_scene(dir);
  io::write_text(dir / "empty.feat", "");
  const auto r = invoke({"count", "--features", (dir / "empty.feat").string(), "--tracks",
                      (dir / "scene.json").string(), "--out", (dir / "pred.json").string()});
  CHECK(r.code == 2);
  CHECK(!r.err.empty());
  CHECK(invoke({"count", "--features", (dir / "missing.feat").string(), "--tracks",
             (dir / "scene.json").string(), "--out", (dir / "pred.json").string()})
            .code == 2);
  fs::remove_all(dir);
}

TEST_CASE("evaluate headlines and mode echo") {
  const fs::path dir = scratch("evaluate");
  write_fixed_scene(dir);
  const auto same = invoke({"evaluate", "--pred", (dir / "scene.json").string(), "--gt",
                         (dir / "scene.json").string(), "--report", (dir / "report.json").string(),
                         "--table", (dir / "table.csv").string(), "--siou-mode", "temporal",
                         "--obo-mode", "per-video", "--mae-mode", "signed"});
  REQUIRE(same.code == 0);
  CHECK(same.out == "period_map=1.0 avg_mae=0.0 avg_obo=1.0\n");
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["config"]["siou_mode"] == std::string(geometry::to_string(geometry::TubeOverlapMode::TemporalOnly)));
  CHECK(report["config"]["obo_mode"] == std::string(metrics::to_string(metrics::OboMode::PerVideo)));
  CHECK(report["config"]["mae_mode"] == std::string(metrics::to_string(metrics::MaeMode::Signed)));
  CHECK(slurp(dir / "table.csv").rfind("video_id,", 0) == 0);

  VideoRecord empty = io::load_annotations(dir / "scene.json");
  empty.instances.clear();
  io::save_video(dir / "empty.json", empty);
  const auto none = invoke({"evaluate", "--pred", (dir / "empty.json").string(), "--gt",
                         (dir / "scene.json").string()});
  REQUIRE(none.code == 0);
  CHECK(none.out == "period_map=0.0 avg_mae=1.0 avg_obo=0.0\n");

  CHECK(invoke({"evaluate", "--pred", (dir / "scene.json").string(), "--gt", (dir / "scene.json").string(),
             "--obo-mode", "sometimes"})
            .code == 2);
  fs::remove_all(dir);
}

TEST_CASE("config files apply and reject unknown keys") {
  const fs::path dir = scratch("config");
  write_fixed_scene(dir);
  io::write_text(dir / "good.json", R"({"eval": {"obo_mode": "per-video"}, "threads": 2})");
  io::write_text(dir / "bad.json", R"({"eval": {"obo_moed": "per-video"}})");
  io::write_text(dir / "broken.json", "{");
  const std::vector<std::string> tail{"evaluate", "--pred", (dir / "scene.json").string(), "--gt",
                                      (dir / "scene.json").string(), "--report",
                                      (dir / "r.json").string()};
  auto with = [&](const std::string& cfg) {
    std::vector<std::string> args{"--config", (dir / cfg).string()};
    args.insert(args.end(), tail.begin(), tail.end());
    return invoke(args);
  };
  REQUIRE(with("good.json").code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "r.json"))["config"]["obo_mode"] ==
        std::string(metrics::to_string(metrics::OboMode::PerVideo)));
  const auto bad = with("bad.json");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("obo_moed") != std::string::npos);
  CHECK(with("broken.json").code == 2);
  CHECK(with("absent.json").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("match writes costs and pairs") {
  const fs::path dir = scratch("match");
  write_fixed_scene(dir);
  const auto r = invoke({"match", "--pred", (dir / "scene.json").string(), "--gt", (dir / "scene.json").string(),
                      "--out", (dir / "match.json").string()});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "match.json"));
  REQUIRE(doc["videos"].size() == 1);
  const auto& v = doc["videos"][0];
  CHECK(v["costs"].size() == 2);
  REQUIRE(v["pairs"].size() == 2);
  for (const auto& p : v["pairs"]) CHECK(p["pred"] == p["gt"]);
  CHECK(v["total_cost"].get<double>() < 1e-6);

  const auto printed = invoke({"match", "--pred", (dir / "scene.json").string(), "--gt",
                            (dir / "scene.json").string()});
  CHECK(printed.code == 0);
  CHECK(nlohmann::json::parse(printed.out) == doc);
  fs::remove_all(dir);
}

TEST_CASE("stitch reassembles window documents") {
  const fs::path dir = scratch("stitch");
  write_fixed_scene(dir);
  const VideoRecord full = io::load_annotations(dir / "scene.json");
  fs::create_directories(dir / "windows");
  for (int offset : stitch::window_plan(full.num_frames)) {
    const int length = std::min(stitch::kClipLength, full.num_frames - offset);
    VideoRecord w = full;
    w.num_frames = length;
    w.instances.clear();
    for (const auto& inst : full.instances) {
      if (auto local = stitch::restrict_to_window(inst, offset, length)) w.instances.push_back(*local);
    }
    io::write_text(dir / "windows" / ("w" + std::to_string(offset) + ".json"),
                   io::canonical_text(io::to_json(w, offset)));
  }
  const auto r = invoke({"stitch", "--input", (dir / "windows").string(), "--out", (dir / "out.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == "videos=1\n");
  const VideoRecord stitched = io::load_prediction_corpus(dir / "out.json").front().record;
  CHECK(stitched.num_frames == full.num_frames);
  REQUIRE(stitched.instances.size() == full.instances.size());
  for (std::size_t i = 0; i < full.instances.size(); ++i) {
    CHECK(stitched.instances[i].track.boxes.size() == full.instances[i].track.boxes.size());
  }

  VideoRecord no_offset = full;
  io::save_video(dir / "plain.json", no_offset);
  CHECK(invoke({"stitch", "--input", (dir / "plain.json").string(), "--out", (dir / "o.json").string()}).code == 2);
  fs::remove_all(dir);
}
