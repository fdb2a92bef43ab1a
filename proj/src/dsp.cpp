#include "seld/dsp.hpp"

#include "fft.hpp"
#include "seld/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace seld {

const char* to_string(AudioFormat format) { return format == AudioFormat::Foa ? "foa" : "mic"; }

AudioFormat parse_audio_format(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "foa") return AudioFormat::Foa;
  if (lower == "mic") return AudioFormat::Mic;
  throw ValidationError(fmt::format("format: expected 'foa' or 'mic', got '{}'", text));
}

void StftConfig::validate() const {
  if (sample_rate <= 0) throw ValidationError("stft.sample_rate must be positive");
  if (hop <= 0) throw ValidationError("stft.hop must be positive");
  if (dft_size <= 0 || dft_size % 2 != 0) throw ValidationError("stft.dft_size must be a positive even number");
  if (window_len <= 0 || window_len > dft_size) throw ValidationError("stft.window_len must lie in (0, dft_size]");
  if (hop > window_len) throw ValidationError("stft.hop must not exceed window_len");
}

void to_json(nlohmann::json& j, const StftConfig& cfg) {
  j = nlohmann::json{{"sample_rate", cfg.sample_rate},
                     {"window_len", cfg.window_len},
                     {"hop", cfg.hop},
                     {"dft_size", cfg.dft_size}};
}

void from_json(const nlohmann::json& j, StftConfig& cfg) {
  StftConfig out;
  out.sample_rate = j.value("sample_rate", out.sample_rate);
  out.window_len = j.value("window_len", out.window_len);
  out.hop = j.value("hop", out.hop);
  out.dft_size = j.value("dft_size", out.dft_size);
  out.validate();
  cfg = out;
}

template <typename Scalar>
Signal<Scalar> hann_window(int length) {
  Signal<Scalar> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = static_cast<Scalar>(0.5 - 0.5 * std::cos(2.0 * kPi * n / length));
  }
  return w;
}

template <typename Scalar>
Spectrogram<Scalar> stft(const Eigen::Ref<const Signal<Scalar>>& signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.size() == 0) throw ValidationError("stft: empty signal");
  const Eigen::Index n = signal.size();
  const Eigen::Index frames = (n + cfg.hop - 1) / cfg.hop;
  const Signal<Scalar> window = hann_window<Scalar>(cfg.window_len);

  Spectrogram<Scalar> spec;
  spec.config = cfg;
  spec.frames.resize(frames, cfg.num_bins());
  Signal<Scalar> buffer(cfg.dft_size);
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> bins(cfg.num_bins());
  for (Eigen::Index t = 0; t < frames; ++t) {
    buffer.setZero();
    const Eigen::Index start = t * cfg.hop;
    const Eigen::Index count = std::min<Eigen::Index>(cfg.window_len, n - start);
    buffer.head(count) = signal.segment(start, count).cwiseProduct(window.head(count));
    detail::rfft(buffer.data(), bins.data(), cfg.dft_size);
    spec.frames.row(t) = bins.transpose();
  }
  return spec;
}

template <typename Scalar>
Signal<Scalar> istft(const Spectrogram<Scalar>& spec, Eigen::Index length) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.num_bins() != cfg.num_bins()) throw ValidationError("istft: bin count does not match dft_size");
  const Eigen::Index frames = spec.num_frames();
  const Eigen::Index full = frames == 0 ? 0 : (frames - 1) * cfg.hop + cfg.dft_size;
  Signal<Scalar> out = Signal<Scalar>::Zero(full);

  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> bins(cfg.num_bins());
  Signal<Scalar> buffer(cfg.dft_size);
  for (Eigen::Index t = 0; t < frames; ++t) {
    bins = spec.frames.row(t).transpose();
    detail::irfft(bins.data(), buffer.data(), cfg.dft_size);
    out.segment(t * cfg.hop, cfg.dft_size) += buffer;
  }
  // overlap-add gain of the analysis window: sum(w) / hop, exactly 1 for Hann at 50% overlap
  const Scalar ola_gain = static_cast<Scalar>(0.5 * cfg.window_len / cfg.hop);
  out /= ola_gain;

  if (length >= 0) {
    Signal<Scalar> resized = Signal<Scalar>::Zero(length);
    const Eigen::Index keep = std::min(length, full);
    resized.head(keep) = out.head(keep);
    return resized;
  }
  return out;
}

template <typename Scalar>
Signal<Scalar> window_overlap_sum(const StftConfig& cfg, Eigen::Index num_frames) {
  const Signal<Scalar> window = hann_window<Scalar>(cfg.window_len);
  const Eigen::Index full = num_frames == 0 ? 0 : (num_frames - 1) * cfg.hop + cfg.window_len;
  Signal<Scalar> sum = Signal<Scalar>::Zero(full);
  for (Eigen::Index t = 0; t < num_frames; ++t) sum.segment(t * cfg.hop, cfg.window_len) += window;
  return sum;
}

// Feedback taps (polynomial exponents) of primitive polynomials, indexed by register length.
namespace {
constexpr std::array<std::array<int, 4>, 25> kMlsTaps = {{
    {0, 0, 0, 0},      {0, 0, 0, 0},       {2, 1, 0, 0},      {3, 2, 0, 0},      {4, 3, 0, 0},
    {5, 3, 0, 0},      {6, 5, 0, 0},       {7, 6, 0, 0},      {8, 6, 5, 4},      {9, 5, 0, 0},
    {10, 7, 0, 0},     {11, 9, 0, 0},      {12, 6, 4, 1},     {13, 4, 3, 1},     {14, 5, 3, 1},
    {15, 14, 0, 0},    {16, 15, 13, 4},    {17, 14, 0, 0},    {18, 11, 0, 0},    {19, 6, 2, 1},
    {20, 17, 0, 0},    {21, 19, 0, 0},     {22, 21, 0, 0},    {23, 18, 0, 0},    {24, 23, 22, 17},
}};
}  // namespace

int min_mls_order() { return 2; }
int max_mls_order() { return 24; }

std::vector<std::int8_t> generate_mls(int order) {
  if (order < min_mls_order() || order > max_mls_order()) {
    throw ValidationError(fmt::format("mls order {} unsupported; expected [{}, {}]", order, min_mls_order(),
                                      max_mls_order()));
  }
  const std::uint32_t length = (1u << order) - 1u;
  std::uint32_t state = length;  // all ones
  std::vector<std::int8_t> seq(length);
  for (std::uint32_t i = 0; i < length; ++i) {
    seq[i] = (state & 1u) ? std::int8_t{-1} : std::int8_t{1};
    std::uint32_t feedback = 0;
    for (int tap : kMlsTaps[static_cast<size_t>(order)]) {
      if (tap > 0) feedback ^= state >> (order - tap);
    }
    state = (state >> 1) | ((feedback & 1u) << (order - 1));
  }
  return seq;
}

template <typename Scalar>
Signal<Scalar> ImpulseResponseStft<Scalar>::time_domain() const {
  Signal<Scalar> out(config.dft_size);
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> bins = transfer;
  detail::irfft(bins.data(), out.data(), config.dft_size);
  return out;
}

template <typename Scalar>
ImpulseResponseStft<Scalar> estimate_ir_stft(const Eigen::Ref<const Signal<Scalar>>& reference,
                                             const Eigen::Ref<const Signal<Scalar>>& recording,
                                             const StftConfig& cfg) {
  if (reference.size() == 0) throw ValidationError("estimate_ir_stft: empty reference");
  if (recording.size() < reference.size()) {
    throw ValidationError("estimate_ir_stft: recording shorter than reference");
  }
  Signal<Scalar> padded = Signal<Scalar>::Zero(recording.size());
  padded.head(reference.size()) = reference;
  const auto x = stft<Scalar>(padded, cfg);
  const auto y = stft<Scalar>(recording, cfg);

  using Complex = std::complex<Scalar>;
  const Eigen::Matrix<Complex, Eigen::Dynamic, 1> cross =
      (x.frames.conjugate().cwiseProduct(y.frames)).colwise().sum().transpose();
  const Signal<Scalar> energy = x.frames.cwiseAbs2().colwise().sum().transpose();
  const Scalar floor = static_cast<Scalar>(1e-10) * energy.maxCoeff();
  if (!(floor > 0)) throw ValidationError("estimate_ir_stft: reference has zero energy");

  ImpulseResponseStft<Scalar> ir;
  ir.config = cfg;
  ir.transfer = cross.array() / (energy.array() + floor).template cast<Complex>();
  for (Eigen::Index f = 0; f < energy.size(); ++f) {
    if (energy[f] <= floor) ir.flagged_bins.push_back(static_cast<int>(f));
  }
  return ir;
}

template <typename Scalar>
Signal<Scalar> fft_convolve(const Eigen::Ref<const Signal<Scalar>>& signal,
                            const Eigen::Ref<const Signal<Scalar>>& ir) {
  if (signal.size() == 0 || ir.size() == 0) throw ValidationError("fft_convolve: empty input");
  const Eigen::Index out_len = signal.size() + ir.size() - 1;
  const Eigen::Index n = detail::next_fast_size(out_len);
  using Complex = std::complex<Scalar>;

  Signal<Scalar> a = Signal<Scalar>::Zero(n);
  Signal<Scalar> b = Signal<Scalar>::Zero(n);
  a.head(signal.size()) = signal;
  b.head(ir.size()) = ir;
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> fa(n / 2 + 1), fb(n / 2 + 1);
  detail::rfft(a.data(), fa.data(), n);
  detail::rfft(b.data(), fb.data(), n);
  fa = fa.cwiseProduct(fb);
  detail::irfft(fa.data(), a.data(), n);
  return a.head(out_len);
}

double mean_power(const ChannelMatrix<double>& x, std::span<const std::uint8_t> mask) {
  if (x.size() == 0) return 0.0;
  if (mask.empty()) return x.squaredNorm() / static_cast<double>(x.size());
  if (static_cast<Eigen::Index>(mask.size()) != x.cols()) {
    throw ValidationError("mean_power: mask length differs from sample count");
  }
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    if (!mask[static_cast<size_t>(n)]) continue;
    sum += x.col(n).squaredNorm();
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count * x.rows());
}

double measure_snr_db(const ChannelMatrix<double>& events, const ChannelMatrix<double>& ambient,
                      std::span<const std::uint8_t> active_mask) {
  const double pe = mean_power(events, active_mask);
  const double pa = mean_power(ambient);
  if (!(pe > 0.0)) throw ValidationError("measure_snr_db: events have zero power");
  if (!(pa > 0.0)) throw ValidationError("measure_snr_db: ambient has zero power");
  return 10.0 * std::log10(pe / pa);
}

double snr_gain(const ChannelMatrix<double>& events, const ChannelMatrix<double>& ambient,
                double target_snr_db, std::span<const std::uint8_t> active_mask) {
  if (events.rows() != ambient.rows()) throw ValidationError("mix_at_snr: channel counts differ");
  if (ambient.cols() < events.cols()) throw ValidationError("mix_at_snr: ambient shorter than events");
  const double pe = mean_power(events, active_mask);
  const ChannelMatrix<double> trimmed = ambient.leftCols(events.cols());
  const double pa = mean_power(trimmed);
  if (!(pe > 0.0)) throw ValidationError("mix_at_snr: events have zero power in the active region");
  if (!(pa > 0.0)) throw ValidationError("mix_at_snr: ambient has zero power");
  return std::sqrt(pe / (pa * std::pow(10.0, target_snr_db / 10.0)));
}

SnrMixResult mix_at_snr(const MultichannelAudio<double>& events, const MultichannelAudio<double>& ambient,
                        double target_snr_db, std::span<const std::uint8_t> active_mask) {
  if (events.sample_rate != ambient.sample_rate) throw ValidationError("mix_at_snr: sample rates differ");
  SnrMixResult result;
  result.ambient_gain = snr_gain(events.samples, ambient.samples, target_snr_db, active_mask);
  result.mixture = events;
  result.mixture.samples += result.ambient_gain * ambient.samples.leftCols(events.num_samples());
  return result;
}

#define SELD_INSTANTIATE_DSP(Scalar)                                                                     \
  template Signal<Scalar> hann_window<Scalar>(int);                                                      \
  template Spectrogram<Scalar> stft<Scalar>(const Eigen::Ref<const Signal<Scalar>>&, const StftConfig&); \
  template Signal<Scalar> istft<Scalar>(const Spectrogram<Scalar>&, Eigen::Index);                       \
  template Signal<Scalar> window_overlap_sum<Scalar>(const StftConfig&, Eigen::Index);                   \
  template struct ImpulseResponseStft<Scalar>;                                                           \
  template ImpulseResponseStft<Scalar> estimate_ir_stft<Scalar>(const Eigen::Ref<const Signal<Scalar>>&, \
                                                                const Eigen::Ref<const Signal<Scalar>>&, \
                                                                const StftConfig&);                      \
  template Signal<Scalar> fft_convolve<Scalar>(const Eigen::Ref<const Signal<Scalar>>&,                  \
                                               const Eigen::Ref<const Signal<Scalar>>&);

SELD_INSTANTIATE_DSP(float)
SELD_INSTANTIATE_DSP(double)

#undef SELD_INSTANTIATE_DSP

}  // namespace seld
