#pragma once

#include "seld/core.hpp"
#include "seld/dsp.hpp"
#include "seld/manifest.hpp"
#include "seld/random.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace seld {

/// Parametric stand-in for one measurement room.
struct RoomProfile {
  int room_id = 1;
  double t60 = 0.3;                  // seconds
  double direct_to_reverb_db = 6.0;  // at 1 m
  std::string dimensions_label;
  double ambience_cutoff_hz = 8000.0;  // lowpass applied to the pink ambience

  void validate() const;
};

/// Five profiles with t60 = 0.3, 0.45, 0.6, 0.75, 0.9 s.
const std::vector<RoomProfile>& default_rooms();

struct SceneSpec {
  double duration = 60.0;
  int sample_rate = 48000;
  int max_polyphony = 1;
  RoomProfile room = default_rooms().front();
  double snr_db = 30.0;
  int min_events_per_minute = 8;
  int max_events_per_minute = 14;
  std::uint64_t seed = 0;
  int num_classes = kDefaultNumClasses;

  void validate() const;
};

struct SourceClip {
  std::string id;
  int class_id = 0;
  Signal<float> samples;

  double seconds(int sample_rate) const { return static_cast<double>(samples.size()) / sample_rate; }
};

class SourceBank {
 public:
  SourceBank() = default;
  SourceBank(std::vector<std::vector<SourceClip>> clips_by_class, int sample_rate);

  /// One sub-directory per class (sorted by name), mono 48 kHz WAV clips inside.
  static SourceBank from_directory(const std::filesystem::path& dir, int sample_rate = 48000);
  /// Synthetic tonal/noise/chirp clips, deterministic in `seed`.
  static SourceBank procedural(int num_classes, int examples_per_class, std::uint64_t seed,
                               int sample_rate = 48000);

  int num_classes() const { return static_cast<int>(clips_.size()); }
  int sample_rate() const { return sample_rate_; }
  const std::vector<SourceClip>& clips(int class_id) const { return clips_.at(static_cast<size_t>(class_id)); }
  const SourceClip& find(const std::string& id) const;
  double longest_clip_seconds() const;

 private:
  std::vector<std::vector<SourceClip>> clips_;
  int sample_rate_ = 48000;
};

/// Per class, the clip indices a scene may draw from.
using SourcePool = std::vector<std::vector<std::size_t>>;

/// Every clip of the bank.
SourcePool full_pool(const SourceBank& bank);

/// Splits each class into `num_sets` disjoint equal-size sets after a seeded shuffle.
std::vector<SourcePool> partition_sources(const SourceBank& bank, int num_sets, std::uint64_t seed);

struct SceneDescription {
  std::string recording_id;
  SceneSpec spec;
  std::vector<EventInstance> events;  // sorted by onset

  AnnotationSet annotation() const;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SceneDescription sample_scene(const SceneSpec& spec, const SourceBank& bank, const SourcePool& pool, Rng& rng,
                              std::string recording_id = "scene");

struct RenderOptions {
  bool reverb = true;
  bool ambience = true;
  bool keep_components = false;
};

struct RenderedScene {
  MultichannelAudio<double> audio;
  AnnotationSet annotation;
  double ambient_gain = 0.0;
  // filled when RenderOptions::keep_components is set
  ChannelMatrix<double> event_component;
  ChannelMatrix<double> ambient_component;  // already scaled by ambient_gain
};

RenderedScene render_scene(const SceneDescription& desc, const SourceBank& bank, AudioFormat format,
                           const RenderOptions& options = {});

/// Per-sample flags for metric frames in which any event is active.
std::vector<std::uint8_t> active_sample_mask(const AnnotationSet& ann, int sample_rate, Eigen::Index num_samples);

/// Unscaled diffuse ambience for a room (pink noise, decorrelated channels).
ChannelMatrix<double> render_ambience(const RoomProfile& room, AudioFormat format, Eigen::Index num_samples,
                                      std::uint64_t seed, int sample_rate = 48000);

/// Exponentially decaying noise tails, one row per channel, energy 10^(-DRR/10) each.
ChannelMatrix<double> reverb_tail(const RoomProfile& room, int channels, std::uint64_t seed, int sample_rate = 48000);

struct DatasetConfig {
  int n_dev_recordings = 400;
  int n_eval_recordings = 100;
  int n_splits = 4;
  double duration = 60.0;
  double snr_db = 30.0;
  int min_events_per_minute = 8;
  int max_events_per_minute = 14;
  std::vector<AudioFormat> formats = {AudioFormat::Foa, AudioFormat::Mic};
  std::vector<RoomProfile> rooms = default_rooms();
  int jobs = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& cfg);
void from_json(const nlohmann::json& j, DatasetConfig& cfg);

/// Directory names used inside a dataset root.
std::filesystem::path audio_dir(const std::filesystem::path& root, AudioFormat format, bool eval);
std::filesystem::path metadata_dir(const std::filesystem::path& root, bool eval);

struct DatasetPlanEntry {
  std::string recording_id;
  int split = 1;
  int local_index = 0;
  int max_polyphony = 1;
  int room_index = 0;
  std::uint64_t seed = 0;
};

/// Recording ids, splits, polyphony and room choices, without rendering.
std::vector<DatasetPlanEntry> plan_dataset(const DatasetConfig& cfg, std::uint64_t master_seed);

/// Scene for one plan entry, drawn from its split's source partition.
SceneDescription describe_recording(const DatasetConfig& cfg, const DatasetPlanEntry& entry, const SourceBank& bank,
                                    const std::vector<SourcePool>& partitions);

/// Renders and writes every recording, then the manifest. Returns the manifest.
Manifest generate_dataset(const DatasetConfig& cfg, const SourceBank& bank, std::uint64_t master_seed,
                          const std::filesystem::path& out_dir);

}  // namespace seld
