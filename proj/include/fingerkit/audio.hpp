#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fingerkit/error.hpp"

namespace fingerkit {

struct AudioClip {
  int sample_rate = 44100;
  std::vector<double> samples;  // mono, in [-1, 1]
};

namespace detail {

inline std::uint32_t read_u32le(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw Error(ErrorCode::Truncated, "WAV data truncated");
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline std::uint16_t read_u16le(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 2 > b.size()) throw Error(ErrorCode::Truncated, "WAV data truncated");
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace detail

// RIFF/WAVE, PCM 16-bit, mono or stereo. Samples are normalized by 1/32768;
// stereo is mean-mixed down to mono.
inline AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || bytes[0] != 'R' || bytes[1] != 'I' ||
      bytes[2] != 'F' || bytes[3] != 'F' || bytes[8] != 'W' ||
      bytes[9] != 'A' || bytes[10] != 'V' || bytes[11] != 'E')
    throw Error(ErrorCode::NotRiff, "not a RIFF/WAVE file");

  bool have_fmt = false;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  std::size_t data_at = 0, data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char c0 = static_cast<char>(bytes[pos]);
    const char c1 = static_cast<char>(bytes[pos + 1]);
    const char c2 = static_cast<char>(bytes[pos + 2]);
    const char c3 = static_cast<char>(bytes[pos + 3]);
    const std::uint32_t len = detail::read_u32le(bytes, pos + 4);
    pos += 8;
    if (c0 == 'f' && c1 == 'm' && c2 == 't' && c3 == ' ') {
      if (len < 16) throw Error(ErrorCode::Truncated, "fmt chunk too short");
      const int codec = detail::read_u16le(bytes, pos);
      channels = detail::read_u16le(bytes, pos + 2);
      sample_rate = static_cast<int>(detail::read_u32le(bytes, pos + 4));
      bits = detail::read_u16le(bytes, pos + 14);
      if (codec != 1)
        throw Error(ErrorCode::UnsupportedCodec, "only PCM supported");
      if (bits != 16)
        throw Error(ErrorCode::UnsupportedCodec, "only 16-bit PCM supported");
      if (channels < 1 || channels > 2)
        throw Error(ErrorCode::UnsupportedCodec, "only mono/stereo supported");
      if (sample_rate <= 0)
        throw Error(ErrorCode::UnsupportedCodec, "bad sample rate");
      have_fmt = true;
    } else if (c0 == 'd' && c1 == 'a' && c2 == 't' && c3 == 'a') {
      data_at = pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw Error(ErrorCode::Truncated, "missing fmt chunk");
  if (data_at == 0 && data_len == 0)
    throw Error(ErrorCode::Truncated, "missing data chunk");
  if (data_at + data_len > bytes.size())
    throw Error(ErrorCode::Truncated, "data chunk truncated");

  AudioClip clip;
  clip.sample_rate = sample_rate;
  const std::size_t frame_bytes = 2 * channels;
  const std::size_t n_frames = data_len / frame_bytes;
  clip.samples.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const std::uint16_t raw =
          detail::read_u16le(bytes, data_at + i * frame_bytes + 2 * ch);
      acc += static_cast<std::int16_t>(raw) / 32768.0;
    }
    clip.samples.push_back(acc / channels);
  }
  return clip;
}

inline std::vector<std::uint8_t> write_wav(const AudioClip& clip) {
  std::vector<std::uint8_t> out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  const auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  const auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  };
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(static_cast<std::uint32_t>(clip.sample_rate));
  u32(static_cast<std::uint32_t>(clip.sample_rate * 2));
  u16(2);   // block align
  u16(16);  // bits
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  u32(data_len);
  for (double s : clip.samples) {
    double clamped = s;
    if (clamped > 1.0) clamped = 1.0;
    if (clamped < -1.0) clamped = -1.0;
    std::int32_t q = static_cast<std::int32_t>(std::llround(clamped * 32768.0));
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    const std::uint16_t raw = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    out.push_back(static_cast<std::uint8_t>(raw & 0xFF));
    out.push_back(static_cast<std::uint8_t>(raw >> 8));
  }
  return out;
}

// Time of the first sample whose magnitude exceeds the threshold.
inline double first_onset(const AudioClip& clip, double threshold = 0.1) {
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    if (std::abs(clip.samples[i]) > threshold)
      return static_cast<double>(i) / clip.sample_rate;
  }
  throw Error(ErrorCode::NoOnset, "no sample exceeds the onset threshold");
}

}  // namespace fingerkit
