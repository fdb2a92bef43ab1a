#include "seld/scene_synth.hpp"

#include "seld/array_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace seld {

namespace {

constexpr int kChannels = 4;
constexpr int kMaxPlacementAttempts = 1000;
constexpr double kReverbPredelay = 0.005;  // seconds between direct sound and tail onset

bool fits_polyphony(const std::vector<EventInstance>& placed, double onset, double offset, int max_polyphony) {
  std::vector<std::pair<double, int>> edges;
  for (const auto& ev : placed) {
    if (ev.onset < offset && ev.offset > onset) {
      edges.emplace_back(std::max(ev.onset, onset), +1);
      edges.emplace_back(std::min(ev.offset, offset), -1);
    }
  }
  std::sort(edges.begin(), edges.end());
  int depth = 0;
  for (const auto& e : edges) {
    depth += e.second;
    if (depth + 1 > max_polyphony) return false;
  }
  return true;
}

// Adds `block` into `dst` starting at column `start`, clipped to dst's length.
void add_at(ChannelMatrix<double>& dst, int row, Eigen::Index start, const Signal<double>& block) {
  if (start >= dst.cols()) return;
  const Eigen::Index count = std::min<Eigen::Index>(block.size(), dst.cols() - start);
  dst.row(row).segment(start, count) += block.head(count).transpose();
}

// Direct sound: STFT-domain multiply by the steering vector, one output row per channel.
ChannelMatrix<double> spatialize_direct(const Signal<double>& clip, const Eigen::MatrixXcd& steering,
                                        const StftConfig& cfg) {
  Signal<double> padded = Signal<double>::Zero(clip.size() + cfg.window_len);
  padded.tail(clip.size()) = clip;
  const auto spec = stft<double>(padded, cfg);
  const Eigen::Index out_len = clip.size() + (cfg.dft_size - cfg.window_len);
  ChannelMatrix<double> out(steering.rows(), out_len);
  for (Eigen::Index ch = 0; ch < steering.rows(); ++ch) {
    Spectrogram<double> filtered = spec;
    filtered.frames.array().rowwise() *= steering.row(ch).array();
    const Signal<double> y = istft(filtered, padded.size() + (cfg.dft_size - cfg.window_len));
    out.row(ch) = y.segment(cfg.window_len, out_len).transpose();
  }
  return out;
}

}  // namespace

void RoomProfile::validate() const {
  if (room_id < 1) throw ValidationError("room.room_id must be >= 1");
  if (!(t60 >= 0.1 && t60 <= 2.0)) throw ValidationError(fmt::format("room.t60 {} outside [0.1, 2.0]", t60));
  if (!std::isfinite(direct_to_reverb_db)) throw ValidationError("room.direct_to_reverb_db must be finite");
  if (!(ambience_cutoff_hz > 0.0)) throw ValidationError("room.ambience_cutoff_hz must be positive");
}

const std::vector<RoomProfile>& default_rooms() {
  static const std::vector<RoomProfile> rooms = {
      {1, 0.30, 9.0, "small office", 12000.0},
      {2, 0.45, 7.0, "meeting room", 10000.0},
      {3, 0.60, 5.0, "classroom", 8000.0},
      {4, 0.75, 3.0, "lecture hall", 6000.0},
      {5, 0.90, 1.0, "corridor", 5000.0},
  };
  return rooms;
}

void SceneSpec::validate() const {
  if (!(duration > 0.0)) throw ValidationError("scene.duration must be positive");
  if (sample_rate != 48000) throw ValidationError("scene.sample_rate must be 48000");
  if (max_polyphony != 1 && max_polyphony != 2) throw ValidationError("scene.max_polyphony must be 1 or 2");
  if (!std::isfinite(snr_db)) throw ValidationError("scene.snr_db must be finite");
  if (min_events_per_minute < 1 || max_events_per_minute < min_events_per_minute) {
    throw ValidationError("scene.events_per_minute range invalid");
  }
  if (num_classes <= 0) throw ValidationError("scene.num_classes must be positive");
  room.validate();
}

AnnotationSet SceneDescription::annotation() const {
  AnnotationSet ann;
  ann.recording_id = recording_id;
  ann.events = events;
  ann.duration = spec.duration;
  ann.frame_hop = kMetricFrameHop;
  ann.num_classes = spec.num_classes;
  ann.max_polyphony = spec.max_polyphony;
  ann.sort_events();
  return ann;
}

SceneDescription sample_scene(const SceneSpec& spec, const SourceBank& bank, const SourcePool& pool, Rng& rng,
                              std::string recording_id) {
  spec.validate();
  if (bank.num_classes() != spec.num_classes) {
    throw ValidationError(fmt::format("scene: bank has {} classes, spec expects {}", bank.num_classes(),
                                      spec.num_classes));
  }
  if (static_cast<int>(pool.size()) != bank.num_classes()) throw ValidationError("scene: pool/bank class mismatch");
  std::vector<int> candidates;
  double longest = 0.0;
  for (int c = 0; c < bank.num_classes(); ++c) {
    const auto& ids = pool[static_cast<size_t>(c)];
    if (ids.empty()) continue;
    candidates.push_back(c);
    for (size_t idx : ids) longest = std::max(longest, bank.clips(c).at(idx).seconds(spec.sample_rate));
  }
  if (candidates.empty()) throw ValidationError("scene: source pool is empty");
  if (!(spec.duration > longest)) {
    throw ValidationError(fmt::format("scene: duration {} s not longer than longest clip {} s", spec.duration, longest));
  }

  const auto scaled = [&](int per_minute) {
    return std::max(1, static_cast<int>(std::lround(per_minute * spec.duration / 60.0)));
  };
  const int lo = scaled(spec.min_events_per_minute);
  const int hi = std::max(lo, scaled(spec.max_events_per_minute));
  const auto n_events = static_cast<int>(uniform_int(rng, lo, hi));
  const auto& grid = measurement_doa_grid();

  SceneDescription desc;
  desc.recording_id = std::move(recording_id);
  desc.spec = spec;
  for (int k = 0; k < n_events; ++k) {
    const int cls = candidates[uniform_index(rng, candidates.size())];
    const auto& ids = pool[static_cast<size_t>(cls)];
    const SourceClip& clip = bank.clips(cls).at(ids[uniform_index(rng, ids.size())]);
    const Doa& doa = grid[uniform_index(rng, grid.size())];
    const double length = clip.seconds(spec.sample_rate);
    const auto max_onset_ms = static_cast<std::int64_t>(std::floor((spec.duration - length) * 1000.0));

    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const double onset = static_cast<double>(uniform_int(rng, 0, max_onset_ms)) / 1000.0;
      const double offset = onset + length;
      if (!fits_polyphony(desc.events, onset, offset, spec.max_polyphony)) continue;
      desc.events.push_back({cls, onset, offset, doa, clip.id});
      placed = true;
    }
    if (!placed) {
      throw PlacementError(fmt::format("{}: could not place event {} of {} ({:.2f} s clip) within polyphony {} after {} "
                                       "attempts",
                                       desc.recording_id, k + 1, n_events, length, spec.max_polyphony,
                                       kMaxPlacementAttempts));
    }
  }
  std::stable_sort(desc.events.begin(), desc.events.end(),
                   [](const EventInstance& a, const EventInstance& b) { return a.onset < b.onset; });
  return desc;
}

std::vector<std::uint8_t> active_sample_mask(const AnnotationSet& ann, int sample_rate, Eigen::Index num_samples) {
  const FrameWiseOutput frames = events_to_frames(ann);
  const auto hop = static_cast<Eigen::Index>(std::llround(ann.frame_hop * sample_rate));
  std::vector<std::uint8_t> mask(static_cast<size_t>(num_samples), 0);
  for (Eigen::Index t = 0; t < frames.num_frames(); ++t) {
    if (frames.active_count(t) == 0) continue;
    const Eigen::Index begin = std::min(num_samples, t * hop);
    const Eigen::Index end = std::min(num_samples, (t + 1) * hop);
    std::fill(mask.begin() + begin, mask.begin() + end, std::uint8_t{1});
  }
  return mask;
}

ChannelMatrix<double> render_ambience(const RoomProfile& room, AudioFormat format, Eigen::Index num_samples,
                                      std::uint64_t seed, int sample_rate) {
  ChannelMatrix<double> out(kChannels, num_samples);
  const double alpha = 1.0 - std::exp(-2.0 * kPi * room.ambience_cutoff_hz / sample_rate);
  for (int ch = 0; ch < kChannels; ++ch) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ch)));
    // Paul Kellet's economy pink filter followed by a one-pole lowpass
    double b0 = 0.0, b1 = 0.0, b2 = 0.0, lp = 0.0;
    for (Eigen::Index n = 0; n < num_samples; ++n) {
      const double white = standard_normal(rng);
      b0 = 0.99765 * b0 + white * 0.0990460;
      b1 = 0.96300 * b1 + white * 0.2965164;
      b2 = 0.57000 * b2 + white * 1.0526913;
      const double pink = b0 + b1 + b2 + white * 0.1848;
      lp += alpha * (pink - lp);
      out(ch, n) = lp;
    }
  }
  if (format == AudioFormat::Foa) out.row(0) *= 2.0;  // omni-dominant diffuse field, W +6 dB
  return out;
}

ChannelMatrix<double> reverb_tail(const RoomProfile& room, int channels, std::uint64_t seed, int sample_rate) {
  room.validate();
  const auto predelay = static_cast<Eigen::Index>(std::llround(kReverbPredelay * sample_rate));
  const auto decay_len = static_cast<Eigen::Index>(std::ceil(room.t60 * sample_rate));
  const double rate = std::log(1000.0) / (room.t60 * sample_rate);  // amplitude -60 dB at t60
  const double energy = std::pow(10.0, -room.direct_to_reverb_db / 10.0);
  ChannelMatrix<double> tail = ChannelMatrix<double>::Zero(channels, predelay + decay_len);
  for (int ch = 0; ch < channels; ++ch) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ch)));
    for (Eigen::Index n = 0; n < decay_len; ++n) {
      tail(ch, predelay + n) = standard_normal(rng) * std::exp(-rate * static_cast<double>(n));
    }
    tail.row(ch) *= std::sqrt(energy / tail.row(ch).squaredNorm());
  }
  return tail;
}

RenderedScene render_scene(const SceneDescription& desc, const SourceBank& bank, AudioFormat format,
                           const RenderOptions& options) {
  const SceneSpec& spec = desc.spec;
  spec.validate();
  if (bank.sample_rate() != spec.sample_rate) throw ValidationError("render: bank sample rate differs from scene");
  const StftConfig cfg;
  const auto num_samples = static_cast<Eigen::Index>(std::llround(spec.duration * spec.sample_rate));
  const SteeringTable& table = SteeringTable::shared(format);

  ChannelMatrix<double> events = ChannelMatrix<double>::Zero(kChannels, num_samples);
  for (size_t k = 0; k < desc.events.size(); ++k) {
    const EventInstance& ev = desc.events[k];
    const Signal<double> clip = bank.find(ev.source_ref).samples.cast<double>();
    const auto start = static_cast<Eigen::Index>(std::llround(ev.onset * spec.sample_rate));
    const double distance = ev.doa.distance().value_or(1.0);

    const ChannelMatrix<double> direct = spatialize_direct(clip, table.lookup(ev.doa), cfg) / distance;
    ChannelMatrix<double> tails;
    if (options.reverb) {
      const auto tail = reverb_tail(spec.room, kChannels, derive_seed(spec.seed, fmt::format("tail{}", k)),
                                    spec.sample_rate);
      tails.resize(kChannels, clip.size() + tail.cols() - 1);
      for (int ch = 0; ch < kChannels; ++ch) {
        tails.row(ch) = fft_convolve<double>(clip, tail.row(ch).transpose()).transpose();
      }
    }
    if (!direct.allFinite() || (options.reverb && !tails.allFinite())) {
      throw RenderError(fmt::format("{}: non-finite samples rendering event {} ({} at {:.3f} s)", desc.recording_id, k,
                                    ev.source_ref, ev.onset));
    }
    for (int ch = 0; ch < kChannels; ++ch) {
      add_at(events, ch, start, direct.row(ch).transpose());
      if (options.reverb) add_at(events, ch, start, tails.row(ch).transpose());
    }
  }

  RenderedScene out;
  out.annotation = desc.annotation();
  out.annotation.validate();
  out.audio.sample_rate = spec.sample_rate;
  out.audio.format = format;
  if (options.ambience) {
    const ChannelMatrix<double> ambient =
        render_ambience(spec.room, format, num_samples, derive_seed(spec.seed, "ambience"), spec.sample_rate);
    const auto mask = active_sample_mask(out.annotation, spec.sample_rate, num_samples);
    out.ambient_gain = snr_gain(events, ambient, spec.snr_db, mask);
    out.audio.samples = events + out.ambient_gain * ambient;
    if (options.keep_components) out.ambient_component = out.ambient_gain * ambient;
  } else {
    out.audio.samples = events;
  }
  if (!out.audio.samples.allFinite()) throw RenderError(desc.recording_id + ": non-finite samples after mixing");
  if (options.keep_components) out.event_component = std::move(events);
  return out;
}

}  // namespace seld
