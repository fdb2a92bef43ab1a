#include "seld/core.hpp"
#include "seld/dsp.hpp"

#include <fmt/format.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace seld {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace

MultichannelAudio<double> read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return ValidationError(fmt::format("{}: {}", path.string(), why));
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw fail("truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (available < 26) throw fail("truncated extensible fmt chunk");
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = available;
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");

  const int bytes_per_sample = bits / 8;
  const bool supported = (format == kFormatFloat && (bits == 32 || bits == 64)) ||
                         (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32));
  if (!supported) throw fail(fmt::format("unsupported sample format {} / {} bits", format, bits));

  const std::size_t frame_bytes = static_cast<std::size_t>(bytes_per_sample) * channels;
  const Eigen::Index frames = static_cast<Eigen::Index>(data_size / frame_bytes);
  MultichannelAudio<double> audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.samples.resize(channels, frames);
  for (Eigen::Index n = 0; n < frames; ++n) {
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + static_cast<std::size_t>(n) * frame_bytes + static_cast<std::size_t>(c) * bytes_per_sample;
      double v = 0.0;
      if (format == kFormatFloat && bits == 32) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (format == kFormatFloat) {
        std::memcpy(&v, p, 8);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
      }
      audio.samples(c, n) = v;
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const MultichannelAudio<double>& audio) {
  const auto channels = static_cast<std::uint16_t>(audio.num_channels());
  const auto frames = static_cast<std::uint32_t>(audio.num_samples());
  const std::uint32_t data_bytes = frames * channels * 4u;

  std::string out;
  out.reserve(58 + data_bytes);
  out += "RIFF";
  put_u32(out, 4 + 26 + 12 + 8 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 18);
  put_u16(out, kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * channels * 4u);
  put_u16(out, static_cast<std::uint16_t>(channels * 4));
  put_u16(out, 32);
  put_u16(out, 0);
  out += "fact";
  put_u32(out, 4);
  put_u32(out, frames);
  out += "data";
  put_u32(out, data_bytes);
  for (std::uint32_t n = 0; n < frames; ++n) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const float f = static_cast<float>(audio.samples(c, n));
      std::uint32_t bitsv;
      std::memcpy(&bitsv, &f, 4);
      put_u32(out, bitsv);
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace seld
