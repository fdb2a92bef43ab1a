#include "seld/scene_synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace seld {

namespace fs = std::filesystem;

void DatasetConfig::validate() const {
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
  if (n_dev_recordings < 0 || n_eval_recordings < 0) throw ValidationError("recording counts must be non-negative");
  if (n_dev_recordings % n_splits != 0) {
    throw ValidationError(fmt::format("n_dev_recordings {} is not divisible by n_splits {}", n_dev_recordings,
                                      n_splits));
  }
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  if (!std::isfinite(snr_db)) throw ValidationError("snr_db must be finite");
  if (min_events_per_minute < 1 || max_events_per_minute < min_events_per_minute) {
    throw ValidationError("events_per_minute range invalid");
  }
  if (formats.empty()) throw ValidationError("formats must not be empty");
  if (rooms.empty()) throw ValidationError("rooms must not be empty");
  for (const auto& room : rooms) room.validate();
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
}

void to_json(nlohmann::json& j, const DatasetConfig& cfg) {
  std::vector<std::string> formats;
  for (auto f : cfg.formats) formats.emplace_back(to_string(f));
  nlohmann::json rooms = nlohmann::json::array();
  for (const auto& r : cfg.rooms) {
    rooms.push_back({{"room_id", r.room_id},
                     {"t60", r.t60},
                     {"direct_to_reverb_db", r.direct_to_reverb_db},
                     {"dimensions_label", r.dimensions_label},
                     {"ambience_cutoff_hz", r.ambience_cutoff_hz}});
  }
  j = {{"n_dev_recordings", cfg.n_dev_recordings},
       {"n_eval_recordings", cfg.n_eval_recordings},
       {"n_splits", cfg.n_splits},
       {"duration", cfg.duration},
       {"snr_db", cfg.snr_db},
       {"min_events_per_minute", cfg.min_events_per_minute},
       {"max_events_per_minute", cfg.max_events_per_minute},
       {"formats", formats},
       {"rooms", rooms},
       {"jobs", cfg.jobs}};
}

void from_json(const nlohmann::json& j, DatasetConfig& cfg) {
  if (!j.is_object()) throw ValidationError("dataset config must be a JSON object");
  const auto field = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(fmt::format("config field '{}' has the wrong type", key));
    }
  };
  field("n_dev_recordings", cfg.n_dev_recordings);
  field("n_eval_recordings", cfg.n_eval_recordings);
  field("n_splits", cfg.n_splits);
  field("duration", cfg.duration);
  field("snr_db", cfg.snr_db);
  field("min_events_per_minute", cfg.min_events_per_minute);
  field("max_events_per_minute", cfg.max_events_per_minute);
  field("jobs", cfg.jobs);
  if (j.contains("formats")) {
    std::vector<std::string> names;
    field("formats", names);
    cfg.formats.clear();
    for (const auto& n : names) cfg.formats.push_back(parse_audio_format(n));
  }
  if (j.contains("rooms")) {
    if (!j.at("rooms").is_array()) throw ValidationError("config field 'rooms' must be an array");
    cfg.rooms.clear();
    for (const auto& r : j.at("rooms")) {
      RoomProfile room;
      try {
        room.room_id = r.at("room_id").get<int>();
        room.t60 = r.at("t60").get<double>();
        room.direct_to_reverb_db = r.value("direct_to_reverb_db", room.direct_to_reverb_db);
        room.dimensions_label = r.value("dimensions_label", std::string{});
        room.ambience_cutoff_hz = r.value("ambience_cutoff_hz", room.ambience_cutoff_hz);
      } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("config field 'rooms': ") + ex.what());
      }
      cfg.rooms.push_back(room);
    }
  }
}

fs::path audio_dir(const fs::path& root, AudioFormat format, bool eval) {
  return root / fmt::format("{}_{}", to_string(format), eval ? "eval" : "dev");
}

fs::path metadata_dir(const fs::path& root, bool eval) { return root / (eval ? "metadata_eval" : "metadata_dev"); }

std::vector<DatasetPlanEntry> plan_dataset(const DatasetConfig& cfg, std::uint64_t master_seed) {
  cfg.validate();
  Rng room_rng(derive_seed(master_seed, "rooms"));
  std::vector<DatasetPlanEntry> plan;
  const int per_split = cfg.n_dev_recordings / cfg.n_splits;
  const auto add = [&](int split, int j, const std::string& prefix) {
    DatasetPlanEntry e;
    e.split = split;
    e.local_index = j;
    e.max_polyphony = j % 2 == 0 ? 1 : 2;
    e.room_index = static_cast<int>(uniform_index(room_rng, cfg.rooms.size()));
    e.seed = derive_seed(master_seed, static_cast<std::uint64_t>(plan.size()));
    e.recording_id = fmt::format("{}_ir{}_ov{}_{}", prefix, e.room_index, e.max_polyphony, j + 1);
    plan.push_back(std::move(e));
  };
  for (int s = 1; s <= cfg.n_splits; ++s) {
    for (int j = 0; j < per_split; ++j) add(s, j, fmt::format("split{}", s));
  }
  for (int j = 0; j < cfg.n_eval_recordings; ++j) add(kEvalSplit, j, "eval");
  return plan;
}

SceneDescription describe_recording(const DatasetConfig& cfg, const DatasetPlanEntry& entry, const SourceBank& bank,
                                    const std::vector<SourcePool>& partitions) {
  SceneSpec spec;
  spec.duration = cfg.duration;
  spec.sample_rate = bank.sample_rate();
  spec.max_polyphony = entry.max_polyphony;
  spec.room = cfg.rooms.at(static_cast<size_t>(entry.room_index));
  spec.snr_db = cfg.snr_db;
  spec.min_events_per_minute = cfg.min_events_per_minute;
  spec.max_events_per_minute = cfg.max_events_per_minute;
  spec.seed = entry.seed;
  spec.num_classes = bank.num_classes();
  // eval draws from the extra partition after the dev splits
  const auto part = static_cast<size_t>(entry.split == kEvalSplit ? cfg.n_splits : entry.split - 1);
  Rng rng(derive_seed(entry.seed, "placement"));
  return sample_scene(spec, bank, partitions.at(part), rng, entry.recording_id);
}

Manifest generate_dataset(const DatasetConfig& cfg, const SourceBank& bank, std::uint64_t master_seed,
                          const fs::path& out_dir) {
  cfg.validate();
  const auto plan = plan_dataset(cfg, master_seed);
  const auto partitions = partition_sources(bank, cfg.n_splits + 1, derive_seed(master_seed, "partition"));

  for (bool eval : {false, true}) {
    fs::create_directories(metadata_dir(out_dir, eval));
    for (auto f : cfg.formats) fs::create_directories(audio_dir(out_dir, f, eval));
  }

  std::vector<ManifestEntry> entries(plan.size());
  std::vector<std::vector<fs::path>> written(plan.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  const auto work = [&] {
    for (size_t i = next++; i < plan.size() && !failed; i = next++) {
      try {
        const auto& entry = plan[i];
        const bool eval = entry.split == kEvalSplit;
        const SceneDescription desc = describe_recording(cfg, entry, bank, partitions);
        std::string csv;
        for (auto f : cfg.formats) {
          const RenderedScene scene = render_scene(desc, bank, f);
          std::ostringstream os;
          write_annotation_csv(os, scene.annotation);
          if (csv.empty()) {
            csv = os.str();
          } else if (csv != os.str()) {
            throw std::logic_error(entry.recording_id + ": annotations differ between formats");
          }
          const fs::path wav = audio_dir(out_dir, f, eval) / (entry.recording_id + ".wav");
          written[i].push_back(wav);
          write_wav(wav, scene.audio);
        }
        const fs::path csv_path = metadata_dir(out_dir, eval) / (entry.recording_id + ".csv");
        written[i].push_back(csv_path);
        std::ofstream(csv_path, std::ios::binary) << csv;

        ManifestEntry& m = entries[i];
        m.split = entry.split;
        m.room_id = desc.spec.room.room_id;
        m.max_polyphony = entry.max_polyphony;
        m.seed = entry.seed;
        for (auto f : cfg.formats) m.formats.emplace_back(to_string(f));
        m.duration_s = cfg.duration;
        for (const auto& ev : desc.events) m.sources.push_back(ev.source_ref);
        std::sort(m.sources.begin(), m.sources.end());
        m.sources.erase(std::unique(m.sources.begin(), m.sources.end()), m.sources.end());
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  {
    std::vector<std::jthread> workers;
    const int n = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(plan.size())));
    for (int t = 1; t < n; ++t) workers.emplace_back(work);
    work();
  }

  if (error) {
    std::error_code ec;
    for (const auto& files : written) {
      for (const auto& p : files) fs::remove(p, ec);
    }
    std::rethrow_exception(error);
  }

  Manifest manifest;
  for (size_t i = 0; i < plan.size(); ++i) manifest.emplace(plan[i].recording_id, entries[i]);
  save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace seld
