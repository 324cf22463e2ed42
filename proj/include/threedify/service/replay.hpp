#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "threedify/common/canonical.hpp"

namespace threedify::service {

/// The scenario directory is malformed (missing files, bad JSON, unknown
/// step kinds).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayResult {
  std::filesystem::path artifact_dir;
  std::vector<std::string> written;     // artifact paths relative to artifact_dir
  std::vector<std::string> mismatches;  // golden files that differ or are missing
  bool ok() const { return mismatches.empty(); }
};

struct ReplayOptions {
  std::filesystem::path root = ".";  // workflow and other root-relative paths
  std::filesystem::path out_dir;     // default: <scenario>/out
  bool update_goldens = false;       // copy artifacts over <scenario>/expected
};

/// Runs scenario.json against scripted providers and the embedded
/// simulator, writes the artifacts, then compares every file under
/// <scenario>/expected with the artifact of the same relative path.
ReplayResult replay_scenario(const std::filesystem::path& scenario_dir, const ReplayOptions& options);

}  // namespace threedify::service
