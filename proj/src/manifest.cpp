#include "seld/manifest.hpp"

#include "seld/core.hpp"

#include <fstream>

namespace seld {

nlohmann::json manifest_to_json(const Manifest& manifest) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, e] : manifest) {
    j[id] = {{"split", e.split},
             {"room_id", e.room_id},
             {"max_polyphony", e.max_polyphony},
             {"seed", e.seed},
             {"formats", e.formats},
             {"duration_s", e.duration_s},
             {"sources", e.sources}};
  }
  return j;
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("manifest: top level must be an object");
  Manifest manifest;
  for (const auto& [id, v] : j.items()) {
    try {
      ManifestEntry e;
      e.split = v.at("split").get<int>();
      e.room_id = v.at("room_id").get<int>();
      e.max_polyphony = v.at("max_polyphony").get<int>();
      e.seed = v.at("seed").get<std::uint64_t>();
      e.formats = v.value("formats", std::vector<std::string>{});
      e.duration_s = v.value("duration_s", 60.0);
      e.sources = v.value("sources", std::vector<std::string>{});
      manifest.emplace(id, std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError("manifest entry '" + id + "': " + ex.what());
    }
  }
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot read manifest " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("manifest " + path.string() + ": " + ex.what());
  }
  return manifest_from_json(j);
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << manifest_to_json(manifest).dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace seld
