#pragma once

#include "seld/core.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace seld {

enum class AudioFormat { Foa, Mic };

const char* to_string(AudioFormat format);
AudioFormat parse_audio_format(const std::string& text);

template <typename Scalar>
using Signal = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// channels x samples, one contiguous row per channel.
template <typename Scalar>
using ChannelMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct MultichannelAudio {
  ChannelMatrix<Scalar> samples;
  int sample_rate = 48000;
  AudioFormat format = AudioFormat::Foa;

  Eigen::Index num_channels() const { return samples.rows(); }
  Eigen::Index num_samples() const { return samples.cols(); }
};

struct StftConfig {
  int sample_rate = 48000;
  int window_len = 1920;  // 40 ms
  int hop = 960;          // 20 ms
  int dft_size = 2048;

  int num_bins() const { return dft_size / 2 + 1; }
  /// Throws ValidationError naming the offending field.
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

void to_json(nlohmann::json& j, const StftConfig& cfg);
void from_json(const nlohmann::json& j, StftConfig& cfg);

template <typename Scalar>
struct Spectrogram {
  using Complex = std::complex<Scalar>;
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> frames;  // T x F
  StftConfig config;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index num_bins() const { return frames.cols(); }
};

/// Periodic Hann window; at hop = len/2 the shifted copies sum to exactly 1.
template <typename Scalar>
Signal<Scalar> hann_window(int length);

/// Frame t starts at t*hop; T = ceil(N / hop); slices running off the end are zero padded.
template <typename Scalar>
Spectrogram<Scalar> stft(const Eigen::Ref<const Signal<Scalar>>& signal, const StftConfig& cfg = {});

/// Overlap-add of the inverse frames, normalized by the window's overlap-add gain.
/// Output length is (T-1)*hop + dft_size unless `length` is given.
template <typename Scalar>
Signal<Scalar> istft(const Spectrogram<Scalar>& spec, Eigen::Index length = -1);

/// Sum over frames of the window's overlap-add at every output sample.
template <typename Scalar>
Signal<Scalar> window_overlap_sum(const StftConfig& cfg, Eigen::Index num_frames);

/// Maximum length sequence of +-1 values, length 2^order - 1.
std::vector<std::int8_t> generate_mls(int order);
int max_mls_order();
int min_mls_order();

template <typename Scalar>
struct ImpulseResponseStft {
  using Complex = std::complex<Scalar>;
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> transfer;  // F bins
  StftConfig config;
  std::vector<int> flagged_bins;  // bins whose excitation energy sits at the regularization floor

  /// Inverse DFT of the transfer function, dft_size samples.
  Signal<Scalar> time_domain() const;
};

template <typename Scalar>
ImpulseResponseStft<Scalar> estimate_ir_stft(const Eigen::Ref<const Signal<Scalar>>& reference,
                                             const Eigen::Ref<const Signal<Scalar>>& recording,
                                             const StftConfig& cfg = {});

/// Full linear convolution, length len(signal) + len(ir) - 1.
template <typename Scalar>
Signal<Scalar> fft_convolve(const Eigen::Ref<const Signal<Scalar>>& signal,
                            const Eigen::Ref<const Signal<Scalar>>& ir);

struct SnrMixResult {
  MultichannelAudio<double> mixture;
  double ambient_gain = 1.0;
};

/// Mean power over channels and over the samples flagged in `mask` (all samples if empty).
double mean_power(const ChannelMatrix<double>& x, std::span<const std::uint8_t> mask = {});

/// 10*log10(P_events / P_ambient); events power over active samples, ambient over the full length.
double measure_snr_db(const ChannelMatrix<double>& events, const ChannelMatrix<double>& ambient,
                      std::span<const std::uint8_t> active_mask);

/// Gain g applied to the ambient so the mixture reaches target_snr_db under measure_snr_db.
double snr_gain(const ChannelMatrix<double>& events, const ChannelMatrix<double>& ambient,
                double target_snr_db, std::span<const std::uint8_t> active_mask);

/// events + g * ambient, ambient trimmed to the events' length.
SnrMixResult mix_at_snr(const MultichannelAudio<double>& events, const MultichannelAudio<double>& ambient,
                        double target_snr_db, std::span<const std::uint8_t> active_mask);

// RIFF WAV: float32 or PCM16/24/32 on read, float32 on write.
MultichannelAudio<double> read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const MultichannelAudio<double>& audio);

}  // namespace seld
