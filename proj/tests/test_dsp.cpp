#include "seld/dsp.hpp"
#include "seld/random.hpp"

#include "oracles/brute.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace seld;

namespace {

Signal<double> noise(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Signal<double> x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = standard_normal(rng);
  return x;
}

double rel_rms(const Signal<double>& a, const Signal<double>& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace

TEST_CASE("stft config validation") {
  StftConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.num_bins() == 1025);
  cfg.hop = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.window_len = 4096;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.hop = 2000;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("stft config JSON round trip") {
  StftConfig cfg{16000, 512, 256, 1024};
  nlohmann::json j = cfg;
  CHECK(j.get<StftConfig>() == cfg);
  CHECK_THROWS_AS(nlohmann::json({{"hop", 0}}).get<StftConfig>(), ValidationError);
}

TEST_CASE("periodic Hann sums to one at half overlap") {
  const auto w = hann_window<double>(1920);
  CHECK(w[0] == 0.0);
  for (int i = 0; i < 960; ++i) CHECK(w[i] + w[i + 960] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("frame count is ceil(N / hop)") {
  const StftConfig cfg;
  CHECK(stft<double>(Signal<double>::Ones(48000), cfg).num_frames() == 50);
  CHECK(stft<double>(Signal<double>::Ones(48001), cfg).num_frames() == 51);
  CHECK(stft<double>(Signal<double>::Ones(10), cfg).num_bins() == 1025);
  CHECK_THROWS_AS(stft<double>(Signal<double>(), cfg), ValidationError);
}

TEST_CASE("constant input concentrates in the DC bin") {
  // window_len == dft_size so the periodic Hann has exact spectral zeros at bins >= 2
  const StftConfig cfg{48000, 2048, 1024, 2048};
  const auto spec = stft<double>(Signal<double>::Ones(20 * 1024), cfg);
  for (Eigen::Index t = 0; t + 2 < spec.num_frames(); ++t) {
    const double dc = std::abs(spec.frames(t, 0));
    CHECK(dc == doctest::Approx(1024.0));
    for (Eigen::Index f = 2; f < spec.num_bins(); ++f) CHECK(20 * std::log10(std::abs(spec.frames(t, f)) / dc + 1e-300) < -60.0);
  }
}

TEST_CASE("bin-centred tone peaks at its bin") {
  const StftConfig cfg;
  Signal<double> x(48000);
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = std::sin(2 * kPi * 25.0 * static_cast<double>(n) / 2048.0);
  const auto spec = stft<double>(x, cfg);
  for (Eigen::Index t = 0; t + 2 < spec.num_frames(); ++t) {
    Eigen::Index arg;
    spec.frames.row(t).cwiseAbs().maxCoeff(&arg);
    CHECK(arg == 25);
  }
}

TEST_CASE("stft / istft round trip on noise") {
  const StftConfig cfg;
  const Signal<double> x = noise(48000 * 3 + 123, 1);
  const Signal<double> y = istft(stft<double>(x, cfg), x.size());
  REQUIRE(y.size() == x.size());
  const Eigen::Index a = cfg.window_len;
  CHECK(rel_rms(y.segment(a, x.size() - a), x.segment(a, x.size() - a)) < 1e-12);

  const Signal<float> xf = x.cast<float>();
  const Signal<float> yf = istft(stft<float>(xf, cfg), xf.size());
  CHECK(rel_rms(yf.segment(a, x.size() - a).cast<double>(), x.segment(a, x.size() - a)) < 1e-5);
}

TEST_CASE("istft of zeros and of a single DC frame") {
  StftConfig cfg;
  Spectrogram<double> spec;
  spec.config = cfg;
  spec.frames = Eigen::MatrixXcd::Zero(5, cfg.num_bins());
  CHECK(istft(spec).cwiseAbs().maxCoeff() == 0.0);
  CHECK(istft(spec).size() == 4 * cfg.hop + cfg.dft_size);

  spec.frames = Eigen::MatrixXcd::Zero(1, cfg.num_bins());
  spec.frames(0, 0) = 2048.0;
  const auto y = istft(spec);
  // inverse DFT of a DC bin is a constant frame, scaled by the overlap-add gain
  const double gain = 0.5 * cfg.window_len / cfg.hop;
  for (Eigen::Index n = 0; n < cfg.dft_size; ++n) CHECK(y[n] == doctest::Approx(1.0 / gain));
}

TEST_CASE("Parseval with window compensation") {
  const StftConfig cfg;
  const Signal<double> x = noise(48000 * 4, 2);
  const auto spec = stft<double>(x, cfg);
  const auto w = hann_window<double>(cfg.window_len);
  double e_spec = 0.0;
  for (Eigen::Index t = 0; t < spec.num_frames(); ++t) {
    // one-sided sum: double every bin except DC and Nyquist
    e_spec += spec.frames.row(t).cwiseAbs2().sum() * 2 - std::norm(spec.frames(t, 0)) -
              std::norm(spec.frames(t, spec.num_bins() - 1));
  }
  e_spec /= cfg.dft_size;
  const double expected = x.squaredNorm() * w.squaredNorm() / cfg.hop;
  CHECK(std::abs(e_spec / expected - 1.0) < 0.01);
}

TEST_CASE("MLS basics") {
  const auto s3 = generate_mls(3);
  CHECK(s3.size() == 7);
  for (auto v : s3) CHECK((v == 1 || v == -1));
  const auto s10 = generate_mls(10);
  CHECK(std::count_if(s10.begin(), s10.end(), [](int v) { return v != 1 && v != -1; }) == 0);
  CHECK(oracle::circular_autocorrelation(s10, 5) == -1);
  CHECK(oracle::circular_autocorrelation(s10, 0) == 1023);
  CHECK_THROWS_AS(generate_mls(1), ValidationError);
  CHECK_THROWS_AS(generate_mls(25), ValidationError);
}

TEST_CASE("MLS autocorrelation is two-valued for every order up to 16") {
  for (int order = min_mls_order(); order <= 16; ++order) {
    const auto s = generate_mls(order);
    REQUIRE(s.size() == (size_t{1} << order) - 1);
    // fast periodic correlation via the sum identity: every off-peak lag must be -1
    bool ok = true;
    for (size_t lag = 1; lag < s.size() && ok; lag += (order <= 12 ? 1 : 97)) {
      ok = oracle::circular_autocorrelation(s, lag) == -1;
    }
    CHECK_MESSAGE(ok, "order " << order);
  }
  const auto s24 = generate_mls(24);
  CHECK(s24.size() == (size_t{1} << 24) - 1);
  long long sum = 0;
  for (auto v : s24) sum += v;
  CHECK(sum == -1);  // one more -1 than +1 in a full period
}

TEST_CASE("IR estimation: identity, gain, delay") {
  const StftConfig cfg;
  const auto mls = generate_mls(16);
  Signal<double> x(static_cast<Eigen::Index>(mls.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = mls[static_cast<size_t>(i)];

  const auto same = estimate_ir_stft<double>(x, x, cfg);
  CHECK(same.flagged_bins.empty());
  for (Eigen::Index f = 0; f < same.transfer.size(); ++f) CHECK(std::abs(same.transfer[f] - 1.0) < 1e-6);

  const auto half = estimate_ir_stft<double>(x, Signal<double>(0.5 * x), cfg);
  for (Eigen::Index f = 0; f < half.transfer.size(); ++f) CHECK(std::abs(half.transfer[f] - 0.5) < 1e-6);

  const int delay = 12;
  Signal<double> y = Signal<double>::Zero(x.size() + delay);
  y.segment(delay, x.size()) = 0.8 * x;
  const auto est = estimate_ir_stft<double>(x, y, cfg);
  // phase-slope fit over the band below 10 kHz
  double num = 0.0, den = 0.0, prev = 0.0, unwrapped = 0.0;
  for (Eigen::Index f = 1; f < 427; ++f) {
    double ph = std::arg(est.transfer[f]);
    while (ph - prev > kPi) ph -= 2 * kPi;
    while (ph - prev < -kPi) ph += 2 * kPi;
    unwrapped = prev = ph;
    const double w = 2 * kPi * static_cast<double>(f) / cfg.dft_size;
    num += w * unwrapped;
    den += w * w;
  }
  CHECK(std::abs(-num / den - delay) < 1.0);
  const Signal<double> h = est.time_domain();
  Eigen::Index peak;
  h.cwiseAbs().maxCoeff(&peak);
  CHECK(std::abs(peak - delay) <= 1);
  CHECK(std::abs(h[peak] - 0.8) < 1e-3);
}

TEST_CASE("IR estimation reproduces the recording spectrogram") {
  const StftConfig cfg;
  const Signal<double> x = noise(48000, 4);
  Signal<double> y = Signal<double>::Zero(x.size());
  for (Eigen::Index n = 3; n < x.size(); ++n) y[n] = 0.7 * x[n] - 0.2 * x[n - 3];
  const auto est = estimate_ir_stft<double>(x, y, cfg);
  const auto X = stft<double>(x, cfg), Y = stft<double>(y, cfg);
  const Eigen::MatrixXcd pred = X.frames.array().rowwise() * est.transfer.transpose().array();
  // frame-wise multiplication is only approximately LTI; require a close least-squares fit
  CHECK((pred - Y.frames).norm() / Y.frames.norm() < 0.05);
}

TEST_CASE("IR estimation flags bins without excitation") {
  // hop == window_len and a whole number of frames: no partial frames, so a bin-centred tone
  // under the periodic Hann leaves every bin outside 7..9 empty
  StftConfig cfg{48000, 64, 64, 64};
  Signal<double> x(4096);
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = std::cos(2 * kPi * 8.0 * static_cast<double>(n) / 64.0);
  const auto est = estimate_ir_stft<double>(x, x, cfg);
  CHECK(est.transfer.allFinite());
  std::vector<int> expected;
  for (int f = 0; f < cfg.num_bins(); ++f) {
    if (f < 7 || f > 9) expected.push_back(f);
  }
  CHECK(est.flagged_bins == expected);
  for (int f = 7; f <= 9; ++f) CHECK(std::abs(est.transfer[f] - 1.0) < 1e-6);
}

TEST_CASE("fft_convolve matches direct convolution") {
  Signal<double> impulse = Signal<double>::Zero(1);
  impulse[0] = 1.0;
  const Signal<double> x = noise(1000, 5);
  CHECK((fft_convolve<double>(x, impulse) - x).cwiseAbs().maxCoeff() < 1e-12);
  Signal<double> shift(2);
  shift << 0.0, 1.0;
  const auto d = fft_convolve<double>(x, shift);
  CHECK(d.size() == 1001);
  CHECK(std::abs(d[0]) < 1e-12);
  CHECK((d.tail(1000) - x).cwiseAbs().maxCoeff() < 1e-12);

  const Signal<double> h = noise(257, 6);
  const auto y = fft_convolve<double>(x, h);
  const auto ref = oracle::direct_convolution(std::vector<double>(x.data(), x.data() + x.size()),
                                              std::vector<double>(h.data(), h.data() + h.size()));
  REQUIRE(y.size() == static_cast<Eigen::Index>(ref.size()));
  double max_diff = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) max_diff = std::max(max_diff, std::abs(y[static_cast<Eigen::Index>(i)] - ref[i]));
  CHECK(max_diff < 1e-9);
}

TEST_CASE("fft_convolve is linear") {
  const Signal<double> x = noise(777, 7), z = noise(777, 8), h = noise(300, 9);
  const auto lhs = fft_convolve<double>(Signal<double>(2.5 * x - 0.75 * z), h);
  const Signal<double> rhs = 2.5 * fft_convolve<double>(x, h) - 0.75 * fft_convolve<double>(z, h);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("SNR mixing closed forms") {
  ChannelMatrix<double> e(2, 4), a(2, 4);
  e << 1, -1, 1, -1, 1, 1, -1, -1;
  a << -1, 1, 1, -1, 1, -1, 1, -1;
  CHECK(snr_gain(e, a, 0.0, {}) == doctest::Approx(1.0));
  CHECK(snr_gain(e, a, 30.0, {}) == doctest::Approx(std::pow(10.0, -1.5)));
  CHECK_THROWS_AS(snr_gain(e, ChannelMatrix<double>::Zero(2, 4), 0.0, {}), ValidationError);
  CHECK_THROWS_AS(snr_gain(ChannelMatrix<double>::Zero(2, 4), a, 0.0, {}), ValidationError);

  MultichannelAudio<double> ev{e, 48000, AudioFormat::Foa}, amb{a, 48000, AudioFormat::Foa};
  const auto mix = mix_at_snr(ev, amb, 30.0, {});
  CHECK((mix.mixture.samples - (e + mix.ambient_gain * a)).norm() < 1e-15);
}

TEST_CASE("mixed noise re-measures at the target SNR") {
  ChannelMatrix<double> e = ChannelMatrix<double>::Zero(4, 48000), a(4, 60000);
  std::vector<std::uint8_t> mask(48000, 0);
  Rng rng(10);
  for (Eigen::Index n = 10000; n < 30000; ++n) {
    mask[static_cast<size_t>(n)] = 1;
    for (int c = 0; c < 4; ++c) e(c, n) = standard_normal(rng);
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = 0.1 * standard_normal(rng);
  const double g = snr_gain(e, a, 30.0, mask);
  const ChannelMatrix<double> scaled = g * a.leftCols(48000);
  CHECK(std::abs(measure_snr_db(e, scaled, mask) - 30.0) < 0.01);
}

TEST_CASE("WAV round trip is sample exact for float data") {
  const auto path = std::filesystem::temp_directory_path() / "seld_test_roundtrip.wav";
  MultichannelAudio<double> audio;
  audio.sample_rate = 48000;
  audio.samples = ChannelMatrix<double>(4, 1000);
  Rng rng(12);
  for (Eigen::Index i = 0; i < audio.samples.size(); ++i) {
    audio.samples.data()[i] = static_cast<float>(0.3 * standard_normal(rng));
  }
  write_wav(path, audio);
  const auto back = read_wav(path);
  CHECK(back.sample_rate == 48000);
  CHECK(back.num_channels() == 4);
  CHECK(back.samples == audio.samples);
  std::filesystem::remove(path);
  CHECK_THROWS(read_wav(path));
}
