#include "seld/core.hpp"
#include "seld/scene_synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace seld {

namespace {

// Attack/decay envelope with a short release so clips start and end at zero.
double envelope(double t, double length, double attack, double decay_rate) {
  const double release = std::min(0.02, length / 4.0);
  double g = t < attack ? t / attack : std::exp(-decay_rate * (t - attack));
  if (t > length - release) g *= std::max(0.0, (length - t) / release);
  return g;
}

Signal<float> synth_clip(int class_id, Rng& rng, int sample_rate) {
  const double length = 0.4 + 2.1 * uniform01(rng);
  const auto n = static_cast<Eigen::Index>(length * sample_rate);
  const double f0 = 150.0 * std::pow(2.0, 0.4 * class_id) * (0.9 + 0.2 * uniform01(rng));
  const double attack = 0.005 + 0.03 * uniform01(rng);
  const double decay = 0.5 + 3.0 * uniform01(rng);
  const double level = 0.25 + 0.25 * uniform01(rng);
  const int kind = class_id % 3;

  Signal<double> x(n);
  double phase = 0.0;
  double lp = 0.0;
  const double vibrato_hz = 3.0 + 4.0 * uniform01(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    if (kind == 0) {  // harmonic tone with vibrato
      const double f = f0 * (1.0 + 0.01 * std::sin(2.0 * kPi * vibrato_hz * t));
      phase += 2.0 * kPi * f / sample_rate;
      v = std::sin(phase) + 0.5 * std::sin(2.0 * phase) + 0.25 * std::sin(3.0 * phase);
    } else if (kind == 1) {  // lowpassed noise bursts
      const double alpha = std::min(1.0, 2.0 * kPi * 4.0 * f0 / sample_rate);
      lp += alpha * (standard_normal(rng) - lp);
      const double gate = 0.5 + 0.5 * std::cos(2.0 * kPi * (2.0 + class_id) * t);
      v = 2.0 * lp * gate;
    } else {  // upward chirp
      const double f = f0 * (1.0 + 2.0 * t / length);
      phase += 2.0 * kPi * f / sample_rate;
      v = std::sin(phase);
    }
    x[i] = v * envelope(t, length, attack, decay);
  }
  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0.0) x *= level / peak;
  return x.cast<float>();
}

}  // namespace

SourceBank::SourceBank(std::vector<std::vector<SourceClip>> clips_by_class, int sample_rate)
    : clips_(std::move(clips_by_class)), sample_rate_(sample_rate) {
  if (clips_.empty()) throw ValidationError("source bank: no classes");
  for (size_t c = 0; c < clips_.size(); ++c) {
    if (clips_[c].empty()) throw ValidationError(fmt::format("source bank: class {} has no clips", c));
    for (const auto& clip : clips_[c]) {
      if (clip.samples.size() == 0) throw ValidationError("source bank: empty clip " + clip.id);
    }
  }
}

SourceBank SourceBank::from_directory(const std::filesystem::path& dir, int sample_rate) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("sources: not a directory: " + dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<std::vector<SourceClip>> clips;
  for (size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c])) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SourceClip> cls;
    for (const auto& file : files) {
      const auto audio = read_wav(file);
      if (audio.num_channels() != 1) throw ValidationError("sources: clip is not mono: " + file.string());
      if (audio.sample_rate != sample_rate) {
        throw ValidationError(fmt::format("sources: {} has sample rate {}, expected {}", file.string(),
                                          audio.sample_rate, sample_rate));
      }
      SourceClip clip;
      clip.id = class_dirs[c].filename().string() + "/" + file.filename().string();
      clip.class_id = static_cast<int>(c);
      clip.samples = audio.samples.row(0).transpose().cast<float>();
      cls.push_back(std::move(clip));
    }
    clips.push_back(std::move(cls));
  }
  return SourceBank(std::move(clips), sample_rate);
}

SourceBank SourceBank::procedural(int num_classes, int examples_per_class, std::uint64_t seed, int sample_rate) {
  if (num_classes <= 0 || examples_per_class <= 0) throw ValidationError("procedural bank: counts must be positive");
  std::vector<std::vector<SourceClip>> clips(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    for (int e = 0; e < examples_per_class; ++e) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c * 1000 + e)));
      SourceClip clip;
      clip.id = fmt::format("class{:02d}/example{:02d}", c, e);
      clip.class_id = c;
      clip.samples = synth_clip(c, rng, sample_rate);
      clips[static_cast<size_t>(c)].push_back(std::move(clip));
    }
  }
  return SourceBank(std::move(clips), sample_rate);
}

const SourceClip& SourceBank::find(const std::string& id) const {
  for (const auto& cls : clips_) {
    for (const auto& clip : cls) {
      if (clip.id == id) return clip;
    }
  }
  throw ValidationError("source bank: unknown clip " + id);
}

double SourceBank::longest_clip_seconds() const {
  double longest = 0.0;
  for (const auto& cls : clips_) {
    for (const auto& clip : cls) longest = std::max(longest, clip.seconds(sample_rate_));
  }
  return longest;
}

SourcePool full_pool(const SourceBank& bank) {
  SourcePool pool(static_cast<size_t>(bank.num_classes()));
  for (int c = 0; c < bank.num_classes(); ++c) {
    for (size_t i = 0; i < bank.clips(c).size(); ++i) pool[static_cast<size_t>(c)].push_back(i);
  }
  return pool;
}

std::vector<SourcePool> partition_sources(const SourceBank& bank, int num_sets, std::uint64_t seed) {
  if (num_sets <= 0) throw ValidationError("partition: number of sets must be positive");
  std::vector<SourcePool> sets(static_cast<size_t>(num_sets), SourcePool(static_cast<size_t>(bank.num_classes())));
  for (int c = 0; c < bank.num_classes(); ++c) {
    const auto count = bank.clips(c).size();
    const auto per_set = count / static_cast<size_t>(num_sets);
    if (per_set == 0) {
      throw ValidationError(fmt::format("partition: class {} has {} clips, need at least {}", c, count, num_sets));
    }
    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) order[i] = i;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (size_t i = count - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    for (size_t k = 0; k < per_set * static_cast<size_t>(num_sets); ++k) {
      auto& set = sets[k % static_cast<size_t>(num_sets)][static_cast<size_t>(c)];
      set.push_back(order[k]);
    }
    for (auto& set : sets) std::sort(set[static_cast<size_t>(c)].begin(), set[static_cast<size_t>(c)].end());
  }
  return sets;
}

}  // namespace seld
