#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hep2/dataset.hpp"
#include "hep2/imageproc.hpp"
#include "hep2/network.hpp"
#include "hep2/trainer.hpp"

namespace hep2 {

inline constexpr int kConfigVersion = 1;

// Everything a run depends on. Stored as JSON; see configs/default.json.
struct RunConfig {
  NetworkSpec network = NetworkSpec::reference();
  TrainConfig train;
  SplitSpec split{0.64, 0.16, 0.20, 0, true};
  double angle_step = 360.0;                // training augmentation
  std::optional<double> test_angle_step;    // defaults to angle_step
  AugmentOrder augment_order = AugmentOrder::after_resize;
  PreprocessOptions preprocess;
  std::optional<ChannelMode> channel;       // overrides the manifest's mode
  std::filesystem::path manifest;
  std::filesystem::path runs_dir = "runs";
  std::uint64_t seed = 1;                   // feeds the split and training streams

  double effective_test_step() const { return test_angle_step.value_or(angle_step); }
  // TrainConfig/SplitSpec with the top-level seed applied.
  TrainConfig train_config() const;
  SplitSpec split_spec() const;
};

// Strict parsing: unknown keys, wrong types and bad values throw
// ErrorKind::config. Missing keys keep their defaults. Relative paths are
// resolved against `base`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);  // canonical, pretty-printed

// FNV-1a over the canonical dump with paths removed, as 16 hex digits.
std::string config_hash(const RunConfig& config);
// <runs_dir>/<hash>-s<seed>
std::filesystem::path run_directory(const RunConfig& config);

}  // namespace hep2
