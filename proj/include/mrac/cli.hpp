// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRAC_CLI_HPP
#define MRAC_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrac/core.hpp"
#include "mrac/datagen.hpp"
#include "mrac/metrics.hpp"
#include "mrac/period.hpp"
#include "mrac/stitch.hpp"

namespace mrac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

enum class LogLevel { Error, Warn, Info, Debug };

struct RunConfig {
  std::string subcommand;
  std::filesystem::path features;
  std::filesystem::path tracks;
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path table;
  metrics::EvalConfig eval;
  datagen::ScenarioConfig scenario;
  period::EstimatorParams estimator;
  stitch::LinkParams link;
  int threads = 1;
  bool stats = false;
  LogLevel log_level = LogLevel::Warn;
};

/// Applies a config document with optional sections "eval", "scenario",
/// "estimator", "link" and top-level "threads" / "seed". Unknown keys
/// throw ValidationError.
void apply_config(RunConfig& config, const nlohmann::json& doc);

/// Per-video counting: one estimate per instance, or per window and
/// instance followed by linking when T exceeds the clip length. Periodicity
/// is zeroed on frames where the track has no box. `features` holds one
/// stream row block per track, in track order.
std::vector<InstanceRecord> count_video(const VideoRecord& tracks, const FeatureStream& features,
                                        const period::EstimatorParams& estimator = {},
                                        const stitch::LinkParams& link = {});

int cmd_generate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_count(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_match(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_stitch(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv (args[0] is the program name), reads the environment
/// (MRAC_THREADS, MRAC_LOG_LEVEL) and dispatches. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrac::cli

#endif  // MRAC_CLI_HPP
