#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "audiosr/dsp/signal.hpp"
#include "audiosr/error.hpp"

namespace audiosr::data {

/// Not a RIFF/WAVE file, or its chunk structure is damaged.
class WavFormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Valid WAVE but an encoding other than 16-bit integer PCM.
class WavEncodingError : public DataError {
 public:
  using DataError::DataError;
};

/// More than one channel and downmixing was not requested.
class WavChannelError : public DataError {
 public:
  using DataError::DataError;
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

struct ParsedWav {
  WavInfo info;
  std::size_t data_offset = 0;
  std::size_t data_bytes = 0;
};

// Walks the chunk list; `bytes` may hold only a prefix of the file when just
// the header is needed.
inline ParsedWav parse_header(const std::vector<unsigned char>& bytes, const std::string& src, bool need_data) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavFormatError(src + ": not a RIFF/WAVE file");
  ParsedWav out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* c = bytes.data() + pos;
    const std::uint32_t size = le32(c + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(c, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw WavFormatError(src + ": truncated fmt chunk");
      std::uint16_t format = le16(bytes.data() + body);
      out.info.channels = le16(bytes.data() + body + 2);
      out.info.sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      out.info.bits_per_sample = le16(bytes.data() + body + 14);
      if (format == 0xFFFE) {
        // WAVE_FORMAT_EXTENSIBLE: the real format tag leads the sub-format GUID
        if (size < 40) throw WavFormatError(src + ": truncated extensible fmt chunk");
        format = le16(bytes.data() + body + 24);
      }
      if (format != 1) throw WavEncodingError(src + ": unsupported encoding (format tag " + std::to_string(format) + "), only PCM is read");
      if (out.info.bits_per_sample != 16)
        throw WavEncodingError(src + ": unsupported bit depth " + std::to_string(out.info.bits_per_sample) + ", only 16-bit PCM is read");
      if (out.info.channels < 1) throw WavFormatError(src + ": zero channels");
      if (out.info.sample_rate <= 0) throw WavFormatError(src + ": invalid sample rate");
      have_fmt = true;
    } else if (std::memcmp(c, "data", 4) == 0) {
      if (!have_fmt) throw WavFormatError(src + ": data chunk before fmt chunk");
      out.data_offset = body;
      out.data_bytes = size;
      const std::size_t frame_bytes = 2 * static_cast<std::size_t>(out.info.channels);
      if (need_data && body + size > bytes.size()) throw WavFormatError(src + ": truncated data chunk");
      out.info.frames = size / frame_bytes;
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw WavFormatError(src + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& path, std::size_t limit = SIZE_MAX) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(path.string() + ": cannot open");
  std::vector<unsigned char> bytes;
  char buf[65536];
  while (bytes.size() < limit && f.read(buf, sizeof buf), f.gcount() > 0) {
    bytes.insert(bytes.end(), buf, buf + f.gcount());
  }
  return bytes;
}

}  // namespace detail

/// Decodes a WAVE byte image. Samples map as value / 32768; with `downmix`
/// multi-channel frames are averaged.
inline dsp::Signal wav_decode(const std::vector<unsigned char>& bytes, bool downmix = false,
                              const std::string& source = "wav") {
  const auto h = detail::parse_header(bytes, source, true);
  const int ch = h.info.channels;
  if (ch != 1 && !downmix)
    throw WavChannelError(source + ": " + std::to_string(ch) + " channels; mono required (use downmix)");
  dsp::Signal s;
  s.sample_rate = h.info.sample_rate;
  s.samples.resize(h.info.frames);
  const unsigned char* p = bytes.data() + h.data_offset;
  for (std::size_t i = 0; i < h.info.frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) {
      acc += static_cast<std::int16_t>(detail::le16(p));
      p += 2;
    }
    s.samples[i] = acc / ch / 32768.0;
  }
  return s;
}

inline dsp::Signal wav_read(const std::filesystem::path& path, bool downmix = false) {
  return wav_decode(detail::slurp(path), downmix, path.string());
}

/// Reads only the header fields.
inline WavInfo wav_info(const std::filesystem::path& path) {
  return detail::parse_header(detail::slurp(path, 1 << 16), path.string(), false).info;
}

/// Amplitude to PCM16: round half away from zero of a * 32768, with +1.0
/// mapped to the largest code 32767. Amplitudes outside [-1, 1] are rejected.
inline std::int16_t to_pcm16(double a) {
  const double v = std::round(a * 32768.0);
  return static_cast<std::int16_t>(std::min(v, 32767.0));
}

/// Canonical 44-byte header, 16-bit PCM mono.
inline std::string wav_encode(const dsp::Signal& s) {
  require(s.sample_rate > 0, "wav_write: sample_rate must be positive");
  double worst = 0.0;
  std::size_t worst_at = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = std::abs(s.samples[i]);
    if (!(m <= worst)) {
      worst = m;
      worst_at = i;
    }
  }
  if (!(worst <= 1.0)) {
    throw InvalidArgument("wav_write: amplitude out of [-1, 1]; max offender " + std::to_string(s.samples[worst_at]) +
                          " at sample " + std::to_string(worst_at));
  }
  const auto data_bytes = static_cast<std::uint32_t>(2 * s.size());
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, 1);
  detail::put16(out, 1);
  detail::put32(out, static_cast<std::uint32_t>(s.sample_rate));
  detail::put32(out, static_cast<std::uint32_t>(s.sample_rate) * 2);
  detail::put16(out, 2);
  detail::put16(out, 16);
  out += "data";
  detail::put32(out, data_bytes);
  for (double a : s.samples) detail::put16(out, static_cast<std::uint16_t>(to_pcm16(a)));
  return out;
}

inline void wav_write(const dsp::Signal& s, const std::filesystem::path& path) {
  const std::string bytes = wav_encode(s);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path.string() + ": cannot open for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError(path.string() + ": write failed");
}

}  // namespace audiosr::data
