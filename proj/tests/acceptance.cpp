// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mrac/assignment.hpp"
#include "mrac/cli.hpp"
#include "mrac/geometry.hpp"
#include "mrac/io.hpp"
#include "mrac/losses.hpp"
#include "mrac/metrics.hpp"
#include "mrac/period.hpp"
#include "mrac/stitch.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

namespace fs = std::filesystem;
using namespace mrac;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first failure message and a running summary.
class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      failure_ = what;
    }
  }
  Outcome done(std::string summary) const { return {pass_, pass_ ? std::move(summary) : failure_}; }

 private:
  bool pass_ = true;
  std::string failure_;
};

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

assign::CostMatrix random_matrix(std::mt19937& rng, std::size_t rows, std::size_t cols) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  assign::CostMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

Outcome assignment_oracle() {
  Check check;
  std::mt19937 rng(101);
  std::uniform_int_distribution<std::size_t> dim(1, 9);
  int trials = 0;
  double worst = 0.0;
  while (trials < 1000) {
    const std::size_t rows = dim(rng);
    const std::size_t cols = dim(rng);
    if (std::min(rows, cols) > 7) continue;
    const auto m = random_matrix(rng, rows, cols);
    const double gap = std::abs(assign::hungarian(m).total_cost(m) - assign::brute_force_match(m).total_cost(m));
    worst = std::max(worst, gap);
    ++trials;
  }
  check.require(worst <= 1e-9, "hungarian differs from brute force by " + fmt(worst));
  const auto big = random_matrix(rng, 200, 200);
  const auto start = std::chrono::steady_clock::now();
  const auto solved = assign::hungarian(big);
  const double ms = 1e3 * seconds_since(start);
  check.require(solved.pairs.size() == 200, "200x200 solve left rows unmatched");
  check.require(ms < 50.0, "200x200 solve took " + fmt(ms) + " ms");
  return check.done("1000 matrices, max gap " + fmt(worst) + "; 200x200 in " + fmt(ms, 3) + " ms");
}

Outcome gradient_checks() {
  Check check;
  std::mt19937 rng(102);
  std::uniform_real_distribution<double> logit(-8.0, 8.0);
  double worst_focal = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double z = logit(rng);
    const int target = i % 2;
    const double analytic = loss::sigmoid_focal(z, target).grad;
    const double numeric = oracle::central_difference(
        [&](double x) { return loss::sigmoid_focal(x, target).value; }, z, 1e-5);
    worst_focal = std::max(worst_focal, oracle::relative_error(analytic, numeric));
  }
  std::uniform_real_distribution<double> coord(0.0, 80.0);
  std::uniform_real_distribution<double> side(2.0, 40.0);
  auto box = [&] {
    const double x = coord(rng), y = coord(rng);
    return BoundingBox{x, y, x + side(rng), y + side(rng)};
  };
  const loss::FrameSize frame{120.0, 90.0};
  double worst_box = 0.0;
  int checked = 0;
  while (checked < 200) {
    const BoundingBox p = box();
    const BoundingBox g = box();
    bool separated = true;
    const double xs[] = {p.x1, p.x2, g.x1, g.x2};
    const double ys[] = {p.y1, p.y2, g.y1, g.y2};
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        if (std::abs(xs[a] - xs[b]) < 1e-3 || std::abs(ys[a] - ys[b]) < 1e-3) separated = false;
      }
    }
    if (!separated) continue;
    const auto l = loss::box_loss(p, g, frame);
    for (int k = 0; k < 4; ++k) {
      auto shifted = [&](double v) {
        BoundingBox q = p;
        (k == 0 ? q.x1 : k == 1 ? q.y1 : k == 2 ? q.x2 : q.y2) = v;
        return loss::box_loss(q, g, frame).value;
      };
      const double at = k == 0 ? p.x1 : k == 1 ? p.y1 : k == 2 ? p.x2 : p.y2;
      worst_box = std::max(worst_box, oracle::relative_error(l.grad[k], oracle::central_difference(shifted, at, 1e-5)));
    }
    ++checked;
  }
  check.require(worst_focal < 1e-4, "focal gradient relative error " + fmt(worst_focal));
  check.require(worst_box < 1e-4, "box gradient relative error " + fmt(worst_box));
  return check.done("200 focal / 200 box inputs, max rel err " + fmt(worst_focal, 3) + " / " + fmt(worst_box, 3));
}

Outcome geometry_checks() {
  Check check;
  check.require(geometry::iou({0, 0, 2, 2}, {1, 1, 3, 3}) == 1.0 / 7.0, "iou hand value");
  check.require(std::abs(geometry::giou({0, 0, 2, 2}, {1, 1, 3, 3}) + 5.0 / 63.0) <= 1e-15, "giou hand value");
  InstanceTrack unit;
  for (int t = 0; t < 10; ++t) unit.boxes[t] = {0, 0, 1, 1};
  check.require(geometry::tube_siou({unit, {0, 3}}, {unit, {1, 4}}) == 0.5, "tube sIoU hand value");
  std::mt19937 rng(103);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> side(0.5, 40.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double ax = coord(rng), ay = coord(rng), bx = coord(rng), by = coord(rng);
    const BoundingBox a{ax, ay, ax + side(rng), ay + side(rng)};
    const BoundingBox b{bx, by, bx + side(rng), by + side(rng)};
    const double k = scale(rng);
    const BoundingBox as{a.x1 * k, a.y1 * k, a.x2 * k, a.y2 * k};
    const BoundingBox bs{b.x1 * k, b.y1 * k, b.x2 * k, b.y2 * k};
    check.require(geometry::iou(a, b) == geometry::iou(b, a), "iou symmetry");
    check.require(std::abs(geometry::giou(a, b) - geometry::giou(b, a)) <= 1e-15, "giou symmetry");
    check.require(geometry::giou(a, b) <= geometry::iou(a, b) + 1e-15, "giou above iou");
    check.require(std::abs(geometry::iou(as, bs) - geometry::iou(a, b)) < 1e-9, "iou scale invariance");
    check.require(std::abs(geometry::giou(as, bs) - geometry::giou(a, b)) < 1e-9, "giou scale invariance");
  }
  return check.done("hand values exact; 1000 random pairs");
}

Outcome similarity_rows() {
  Check check;
  std::mt19937 rng(104);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 8 + trial;
    const int C = 3 + trial % 7;
    period::FrameMatrix x(T, C);
    for (int i = 0; i < T; ++i) {
      for (int c = 0; c < C; ++c) x(i, c) = n(rng);
    }
    Eigen::MatrixXd wq(C, C), wk(C, C);
    for (int i = 0; i < C; ++i) {
      for (int c = 0; c < C; ++c) {
        wq(i, c) = n(rng);
        wk(i, c) = n(rng);
      }
    }
    for (const auto& m : {period::self_similarity(x), period::attention_scores(x), period::attention_scores(x, wq, wk)}) {
      worst = std::max(worst, (m.rowwise().sum().array() - 1.0).abs().maxCoeff());
      check.require(m.minCoeff() >= 0.0, "negative similarity entry");
    }
  }
  check.require(worst <= 1e-9, "row sum deviates by " + fmt(worst));
  const period::FrameMatrix constant = period::FrameMatrix::Constant(12, 5, 0.7);
  const double dev = (period::self_similarity(constant).array() - 1.0 / 12.0).abs().maxCoeff();
  check.require(dev <= 1e-12, "constant input not uniform, deviation " + fmt(dev));
  return check.done("150 matrices, max row-sum deviation " + fmt(worst, 3) + "; constant input uniform");
}

Outcome counting_identity() {
  Check check;
  std::mt19937 rng(105);
  std::uniform_int_distribution<int> len(3, 25);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<RepetitionProposal> cycles;
    int t = len(rng) / 3;
    while (true) {
      const int l = len(rng);
      if (t + l > 400) break;
      cycles.push_back({t, t + l});
      t += l + (len(rng) % 4 == 0 ? len(rng) : 0);
    }
    const double c = period::derive_count(signal_from_cycles(cycles, 400));
    check.require(c == double(cycles.size()),
                  "count " + fmt(c, 17) + " for " + std::to_string(cycles.size()) + " cycles");
  }
  PeriodSignal flat;
  flat.periodicity.assign(100, 1.0);
  flat.velocity.assign(100, 10.0);
  const double ten = period::derive_count(flat);
  check.require(std::abs(ten - 10.0) <= 1e-9, "constant velocity 10 gives " + fmt(ten, 17));
  return check.done("500 cycle layouts exact; constant velocity count " + fmt(ten, 17));
}

Outcome metric_oracle() {
  Check check;
  std::mt19937 rng(106);
  double worst = 0.0;
  int scenarios = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto videos = scenario::random_scenario(rng);
    for (const auto mode : {geometry::TubeOverlapMode::Spatiotemporal, geometry::TubeOverlapMode::TemporalOnly}) {
      for (double th : metrics::map_threshold_grid()) {
        worst = std::max(worst, std::abs(metrics::period_ap(videos, th, mode) -
                                         oracle::exhaustive_period_ap(videos, th, mode)));
      }
    }
    ++scenarios;
  }
  check.require(worst <= 1e-12, "Period-AP differs from exhaustive reference by " + fmt(worst));

  metrics::EvalVideo v;
  v.video_id = "v";
  v.num_frames = 20;
  InstanceRecord gt;
  gt.track.instance_id = 1;
  for (int t = 0; t < 20; ++t) gt.track.boxes[t] = {0, 0, 10, 10};
  gt.cycles = {{0, 5}, {5, 10}, {10, 15}};
  gt.count = 3;
  v.gt = {gt};
  v.pred = {gt};
  const std::vector<metrics::EvalVideo> perfect{v};
  const auto p = metrics::evaluate(perfect);
  check.require(p.period_map == 1.0 && p.avg_mae == 0.0 && p.avg_obo == 1.0, "perfect predictions: " + p.headline());
  v.pred.clear();
  const std::vector<metrics::EvalVideo> empty{v};
  const auto e = metrics::evaluate(empty);
  check.require(e.period_map == 0.0 && e.avg_mae == 1.0 && e.avg_obo == 0.0, "empty predictions: " + e.headline());
  return check.done(std::to_string(scenarios) + " scenarios x 20 thresholds, max gap " + fmt(worst, 3) +
                    "; perfect " + p.headline() + "; empty " + e.headline());
}

Outcome threshold_grid() {
  Check check;
  metrics::EvalVideo v;
  v.video_id = "v";
  v.num_frames = 40;
  InstanceRecord gt;
  gt.track.instance_id = 1;
  for (int t = 0; t < 40; ++t) gt.track.boxes[t] = {0, 0, 1, 1};
  InstanceRecord pred = gt;
  // Every cycle of 5 frames is predicted on its last 3: sIoU 3/5.
  for (int k = 0; k < 8; ++k) {
    gt.cycles.push_back({5 * k, 5 * k + 5});
    pred.cycles.push_back({5 * k + 2, 5 * k + 5, 0.9});
  }
  gt.count = pred.count = 8;
  v.gt = {gt};
  v.pred = {pred};
  const std::vector<metrics::EvalVideo> one{v};
  const double map = metrics::period_map(one);
  check.require(std::abs(map - 0.3) <= 1e-12, "Period-mAP " + fmt(map, 17));
  return check.done("Period-mAP " + fmt(map, 17));
}

Outcome stitching_identity() {
  Check check;
  std::mt19937 rng(108);
  double worst = 0.0;
  int records = 0;
  for (int frames : {64, 96, 100, 128, 150, 257}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<InstanceRecord> truth;
      for (int id = 0; id < 3; ++id) truth.push_back(scenario::random_instance(rng, id, frames, trial % 2 == 1));
      const auto linked = stitch::link_windows(scenario::windows_of(truth, frames), frames);
      check.require(linked.size() == truth.size(), "T=" + std::to_string(frames) + ": track count changed");
      if (linked.size() != truth.size()) continue;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& a = truth[i];
        const auto& b = linked[i];
        check.require(b.track.boxes.size() == a.track.boxes.size(), "box count changed");
        for (const auto& [t, box] : a.track.boxes) {
          const BoundingBox* got = b.track.box_at(t);
          check.require(got != nullptr, "box lost");
          if (!got) continue;
          worst = std::max({worst, std::abs(got->x1 - box.x1), std::abs(got->y1 - box.y1),
                            std::abs(got->x2 - box.x2), std::abs(got->y2 - box.y2)});
        }
        for (int t = 0; t < frames; ++t) {
          worst = std::max({worst, std::abs(b.period->periodicity[t] - a.period->periodicity[t]),
                            std::abs(b.period->velocity[t] - a.period->velocity[t])});
        }
        worst = std::max(worst, std::abs(b.count - a.count));
        ++records;
      }
    }
  }
  check.require(worst <= 1e-9, "reconstruction error " + fmt(worst));
  return check.done(std::to_string(records) + " records incl. T=100 tail, max error " + fmt(worst, 3));
}

// End-to-end pipeline through the command-line entry point.
struct PipelineRun {
  int code = 0;
  std::string error;
  nlohmann::json report;
  double seconds = 0.0;
  std::map<std::string, std::string> files;
};

int invoke(std::vector<std::string> args, std::string& error) {
  args.insert(args.begin(), "mrac");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  if (code != 0) error = err.str();
  return code;
}

PipelineRun run_pipeline(const fs::path& dir, int threads, double noise, double pause) {
  PipelineRun run;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string t = std::to_string(threads);
  const auto start = std::chrono::steady_clock::now();
  run.code = invoke({"--threads", t, "generate", "--out", (dir / "corpus").string(), "--seed", "1",
                     "--num-videos", "200", "--noise", fmt(noise), "--pause-prob", fmt(pause)},
                    run.error);
  if (run.code == 0) {
    run.code = invoke({"--threads", t, "count", "--features", (dir / "corpus" / "features").string(),
                       "--tracks", (dir / "corpus" / "annotations").string(), "--out",
                       (dir / "pred").string()},
                      run.error);
  }
  if (run.code == 0) {
    run.code = invoke({"--threads", t, "evaluate", "--pred", (dir / "pred").string(), "--gt",
                       (dir / "corpus" / "annotations").string(), "--report",
                       (dir / "report.json").string(), "--table", (dir / "table.csv").string()},
                      run.error);
  }
  run.seconds = seconds_since(start);
  if (run.code != 0) return run;
  run.report = nlohmann::json::parse(io::read_text(dir / "report.json"));
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) run.files[fs::relative(e.path(), dir).string()] = io::read_text(e.path());
  }
  return run;
}

fs::path work_root() {
  return fs::temp_directory_path() / ("mrac_acceptance_" + std::to_string(::getpid()));
}

Outcome end_to_end() {
  Check check;
  const fs::path root = work_root();
  const PipelineRun clean = run_pipeline(root / "clean", 1, 0.0, 0.0);
  check.require(clean.code == 0, "clean pipeline failed: " + clean.error);
  if (clean.code != 0) return check.done("");
  const double obo = clean.report["avg_obo"].get<double>();
  const double mae = clean.report["avg_mae"].get<double>();
  const double map = clean.report["period_map"].get<double>();
  check.require(obo >= 0.95, "clean AvgOBO " + fmt(obo));
  check.require(mae <= 0.10, "clean AvgMAE " + fmt(mae));
  check.require(clean.seconds < 60.0, "clean run took " + fmt(clean.seconds) + " s");

  const PipelineRun noisy = run_pipeline(root / "noisy", 1, 0.1, 1.0);
  check.require(noisy.code == 0, "noisy pipeline failed: " + noisy.error);
  if (noisy.code != 0) return check.done("");
  const double noisy_obo = noisy.report["avg_obo"].get<double>();
  check.require(noisy_obo >= 0.80, "noise 0.1 + pauses AvgOBO " + fmt(noisy_obo));
  check.require(noisy.seconds < 60.0, "noisy run took " + fmt(noisy.seconds) + " s");
  return check.done("clean AvgOBO " + fmt(obo, 4) + " AvgMAE " + fmt(mae, 4) + " Period-mAP " + fmt(map, 4) +
                    " in " + fmt(clean.seconds, 3) + " s; noise 0.1 + pauses AvgOBO " + fmt(noisy_obo, 4) +
                    " in " + fmt(noisy.seconds, 3) + " s");
}

Outcome determinism() {
  Check check;
  const fs::path root = work_root();
  std::map<std::string, std::string> reference;
  std::string summary;
  for (int threads : {1, 4, 8}) {
    const PipelineRun run = run_pipeline(root / ("t" + std::to_string(threads)), threads, 0.1, 1.0);
    check.require(run.code == 0, "pipeline failed with " + std::to_string(threads) + " threads: " + run.error);
    if (run.code != 0) break;
    if (threads == 1) {
      reference = run.files;
    } else {
      check.require(run.files == reference,
                    "outputs with " + std::to_string(threads) + " threads differ from 1 thread");
    }
    summary += (summary.empty() ? "" : ", ") + std::to_string(threads) + " threads";
  }
  return check.done(std::to_string(reference.size()) + " files byte-identical across " + summary);
}

}  // namespace

int main() {
  ::unsetenv("MRAC_THREADS");
  ::unsetenv("MRAC_LOG_LEVEL");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"assignment oracle", assignment_oracle},
      {"gradient checks", gradient_checks},
      {"geometry", geometry_checks},
      {"similarity row contracts", similarity_rows},
      {"counting identity", counting_identity},
      {"metric oracle", metric_oracle},
      {"threshold grid", threshold_grid},
      {"stitching identity", stitching_identity},
      {"end-to-end synthetic run", end_to_end},
      {"determinism across threads", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << (i + 1) << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << ": " << o.detail << std::endl;
  }
  fs::remove_all(work_root());
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
