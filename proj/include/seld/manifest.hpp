#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace seld {

/// Split value used for evaluation-set recordings; development splits are 1..n_splits.
inline constexpr int kEvalSplit = 0;

struct ManifestEntry {
  int split = 1;
  int room_id = 1;
  int max_polyphony = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> formats;
  double duration_s = 60.0;
  std::vector<std::string> sources;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Manifest = std::map<std::string, ManifestEntry>;

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace seld
