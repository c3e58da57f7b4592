#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fingerkit/error.hpp"

namespace fingerkit {

inline constexpr int kLowestPitch = 21;   // A0
inline constexpr int kHighestPitch = 108;  // C8
inline constexpr int kKeyCount = 88;

inline int pitch_to_key(int pitch) {
  if (pitch < kLowestPitch || pitch > kHighestPitch)
    throw Error(ErrorCode::OutOfRange,
                "pitch " + std::to_string(pitch) + " outside 21..108");
  return pitch - 20;
}

inline int key_to_pitch(int key_index) {
  if (key_index < 1 || key_index > kKeyCount)
    throw Error(ErrorCode::OutOfRange,
                "key " + std::to_string(key_index) + " outside 1..88");
  return key_index + 20;
}

struct NoteEvent {
  int pitch = 60;
  int key_index = 40;
  double onset_s = 0.0;
  double offset_s = 0.0;
  int velocity = 64;

  static NoteEvent make(int pitch, double onset_s, double offset_s,
                        int velocity) {
    NoteEvent e;
    e.pitch = pitch;
    e.key_index = pitch_to_key(pitch);
    e.onset_s = onset_s;
    e.offset_s = offset_s;
    e.velocity = velocity;
    if (!(offset_s > onset_s) || onset_s < 0.0)
      throw Error(ErrorCode::OutOfRange, "note must satisfy 0 <= onset < offset");
    if (velocity < 1 || velocity > 127)
      throw Error(ErrorCode::OutOfRange, "velocity outside 1..127");
    return e;
  }
};

struct NoteSequence {
  std::vector<NoteEvent> notes;  // sorted by (onset_s, pitch)
  int ticks_per_quarter = 480;
  int source_format = 0;
};

inline void sort_notes(NoteSequence& seq) {
  std::stable_sort(seq.notes.begin(), seq.notes.end(),
                   [](const NoteEvent& a, const NoteEvent& b) {
                     if (a.onset_s != b.onset_s) return a.onset_s < b.onset_s;
                     return a.pitch < b.pitch;
                   });
}

struct TempoChange {
  std::int64_t tick = 0;
  std::int64_t us_per_quarter = 500000;
};

// Piecewise-linear tick -> seconds map. Always has an entry at tick 0
// (120 bpm unless the file says otherwise).
class TempoMap {
 public:
  TempoMap() { changes_.push_back({0, 500000}); }

  void set(std::int64_t tick, std::int64_t us_per_quarter) {
    if (tick < 0 || us_per_quarter <= 0)
      throw Error(ErrorCode::OutOfRange, "bad tempo change");
    auto it = std::lower_bound(
        changes_.begin(), changes_.end(), tick,
        [](const TempoChange& c, std::int64_t t) { return c.tick < t; });
    if (it != changes_.end() && it->tick == tick) {
      it->us_per_quarter = us_per_quarter;  // last event at a tick wins
    } else {
      changes_.insert(it, {tick, us_per_quarter});
    }
  }

  const std::vector<TempoChange>& changes() const { return changes_; }

  double tick_to_seconds(std::int64_t tick, int ticks_per_quarter) const {
    double seconds = 0.0;
    for (std::size_t i = 0; i < changes_.size(); ++i) {
      const std::int64_t seg_start = changes_[i].tick;
      if (tick <= seg_start) break;
      const std::int64_t seg_end =
          (i + 1 < changes_.size()) ? std::min(changes_[i + 1].tick, tick)
                                    : tick;
      seconds += static_cast<double>(seg_end - seg_start) *
                 static_cast<double>(changes_[i].us_per_quarter) / 1e6 /
                 ticks_per_quarter;
    }
    return seconds;
  }

 private:
  std::vector<TempoChange> changes_;
};

// --- variable-length quantities -------------------------------------------

// Returns (value, bytes consumed). SMF VLQs are at most 4 bytes.
inline std::pair<std::uint32_t, std::size_t> decode_vlq(
    std::span<const std::uint8_t> bytes) {
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i == 4) throw Error(ErrorCode::Overlong, "VLQ longer than 4 bytes");
    value = (value << 7) | (bytes[i] & 0x7Fu);
    if ((bytes[i] & 0x80u) == 0) return {value, i + 1};
  }
  if (bytes.size() >= 4) throw Error(ErrorCode::Overlong, "VLQ longer than 4 bytes");
  throw Error(ErrorCode::Truncated, "VLQ runs past end of data");
}

inline void encode_vlq(std::uint32_t value, std::vector<std::uint8_t>& out) {
  if (value > 0x0FFFFFFFu)
    throw Error(ErrorCode::TickOverflow, "VLQ value exceeds 0x0FFFFFFF");
  std::uint8_t stack[4];
  int n = 0;
  do {
    stack[n++] = static_cast<std::uint8_t>(value & 0x7Fu);
    value >>= 7;
  } while (value != 0);
  for (int i = n - 1; i > 0; --i)
    out.push_back(static_cast<std::uint8_t>(stack[i] | 0x80u));
  out.push_back(stack[0]);
}

// --- parsing ----------------------------------------------------------------

struct SmfStats {
  int dropped_out_of_range = 0;  // note-ons outside the 88-key range
  int dangling_note_ons = 0;     // closed at end of track
  int stray_note_offs = 0;
};

namespace detail {

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() {
    if (pos_ >= data_.size())
      throw Error(ErrorCode::TruncatedChunk, "unexpected end of data");
    return data_[pos_++];
  }

  std::uint8_t peek() const {
    if (pos_ >= data_.size())
      throw Error(ErrorCode::TruncatedChunk, "unexpected end of data");
    return data_[pos_];
  }

  std::uint16_t u16be() {
    const std::uint16_t hi = u8(), lo = u8();
    return static_cast<std::uint16_t>((hi << 8) | lo);
  }

  std::uint32_t u32be() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }

  void skip(std::size_t n) {
    if (remaining() < n)
      throw Error(ErrorCode::TruncatedChunk, "chunk runs past end of data");
    pos_ += n;
  }

  std::uint32_t vlq() {
    auto [value, consumed] = decode_vlq(data_.subspan(pos_));
    pos_ += consumed;
    return value;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Parses an SMF (format 0 or 1, ticks-per-quarter division). Note-on with
// velocity 0 closes a note; an open note hit again on the same pitch/channel
// is closed at the second onset. Pitches outside the 88-key range and
// dangling note-ons are counted in `stats` rather than failing the parse.
inline NoteSequence parse_smf(std::span<const std::uint8_t> bytes,
                              SmfStats* stats = nullptr) {
  detail::ByteReader r(bytes);
  SmfStats local;

  if (r.remaining() < 4 || r.u8() != 'M' || r.u8() != 'T' || r.u8() != 'h' ||
      r.u8() != 'd')
    throw Error(ErrorCode::MalformedHeader, "missing MThd chunk");
  const std::uint32_t header_len = r.u32be();
  if (header_len < 6)
    throw Error(ErrorCode::MalformedHeader, "MThd length < 6");
  const int format = r.u16be();
  const int declared_tracks = r.u16be();
  const std::uint16_t division = r.u16be();
  r.skip(header_len - 6);
  if (format != 0 && format != 1)
    throw Error(ErrorCode::MalformedHeader,
                "unsupported SMF format " + std::to_string(format));
  if (division & 0x8000u)
    throw Error(ErrorCode::UnsupportedDivision, "SMPTE division not supported");
  if (division == 0)
    throw Error(ErrorCode::UnsupportedDivision, "zero ticks per quarter");

  struct RawNote {
    std::int64_t on_tick;
    std::int64_t off_tick;
    int pitch;
    int velocity;
  };
  std::vector<RawNote> raw;
  TempoMap tempo;

  int tracks_seen = 0;
  while (r.remaining() > 0 && tracks_seen < declared_tracks) {
    if (r.remaining() < 8) break;  // trailing junk
    const char c0 = static_cast<char>(r.u8()), c1 = static_cast<char>(r.u8()),
               c2 = static_cast<char>(r.u8()), c3 = static_cast<char>(r.u8());
    const std::uint32_t chunk_len = r.u32be();
    if (!(c0 == 'M' && c1 == 'T' && c2 == 'r' && c3 == 'k')) {
      r.skip(chunk_len);  // alien chunk
      continue;
    }
    if (r.remaining() < chunk_len)
      throw Error(ErrorCode::TruncatedChunk, "MTrk length past end of file");
    ++tracks_seen;
    const std::size_t track_end = r.pos() + chunk_len;

    std::int64_t tick = 0;
    std::uint8_t running_status = 0;
    // (channel << 8 | pitch) -> (onset tick, velocity)
    std::map<int, std::pair<std::int64_t, int>> open;

    while (r.pos() < track_end) {
      tick += r.vlq();
      std::uint8_t status = r.peek();
      if (status & 0x80u) {
        r.u8();
        if (status < 0xF0u) running_status = status;
      } else {
        if (running_status == 0)
          throw Error(ErrorCode::MalformedEvent,
                      "data byte without running status");
        status = running_status;
      }

      const auto close_note = [&](int channel, int pitch, std::int64_t at) {
        const int slot = (channel << 8) | pitch;
        auto it = open.find(slot);
        if (it == open.end()) {
          ++local.stray_note_offs;
          return;
        }
        std::int64_t off = at;
        if (off <= it->second.first) off = it->second.first + 1;
        raw.push_back({it->second.first, off, pitch, it->second.second});
        open.erase(it);
      };

      switch (status & 0xF0u) {
        case 0x90: {
          const int channel = status & 0x0F;
          const int pitch = r.u8() & 0x7F;
          const int velocity = r.u8() & 0x7F;
          if (velocity == 0) {
            if (pitch >= kLowestPitch && pitch <= kHighestPitch)
              close_note(channel, pitch, tick);
            break;
          }
          if (pitch < kLowestPitch || pitch > kHighestPitch) {
            ++local.dropped_out_of_range;
            break;
          }
          const int slot = (channel << 8) | pitch;
          if (open.count(slot)) close_note(channel, pitch, tick);
          open[slot] = {tick, velocity};
          break;
        }
        case 0x80: {
          const int channel = status & 0x0F;
          const int pitch = r.u8() & 0x7F;
          r.u8();  // release velocity
          if (pitch >= kLowestPitch && pitch <= kHighestPitch)
            close_note(channel, pitch, tick);
          break;
        }
        case 0xA0:
        case 0xB0:
        case 0xE0:
          r.skip(2);
          break;
        case 0xC0:
        case 0xD0:
          r.skip(1);
          break;
        case 0xF0: {
          if (status == 0xF0 || status == 0xF7) {
            r.skip(r.vlq());
          } else if (status == 0xFF) {
            const std::uint8_t type = r.u8();
            const std::uint32_t len = r.vlq();
            if (type == 0x51 && len == 3) {
              std::int64_t us = 0;
              for (int i = 0; i < 3; ++i) us = (us << 8) | r.u8();
              if (us > 0) tempo.set(tick, us);
            } else {
              r.skip(len);
            }
          } else {
            throw Error(ErrorCode::MalformedEvent, "unexpected system event");
          }
          break;
        }
        default:
          throw Error(ErrorCode::MalformedEvent, "bad status byte");
      }
    }
    if (r.pos() != track_end)
      throw Error(ErrorCode::TruncatedChunk, "event ran past MTrk boundary");

    for (auto& [slot, on] : open) {
      std::int64_t off = std::max(tick, on.first + 1);
      raw.push_back({on.first, off, slot & 0xFF, on.second});
      ++local.dangling_note_ons;
    }
  }

  NoteSequence seq;
  seq.ticks_per_quarter = division;
  seq.source_format = format;
  seq.notes.reserve(raw.size());
  for (const RawNote& n : raw) {
    seq.notes.push_back(NoteEvent::make(
        n.pitch, tempo.tick_to_seconds(n.on_tick, division),
        tempo.tick_to_seconds(n.off_tick, division),
        n.velocity == 0 ? 1 : n.velocity));
  }
  sort_notes(seq);
  if (stats) *stats = local;
  return seq;
}

// --- writing ----------------------------------------------------------------

// Writes a single-tempo format-0 file. Running status is never emitted.
inline std::vector<std::uint8_t> write_smf(const NoteSequence& seq,
                                           std::int64_t tempo_us_per_quarter =
                                               500000) {
  if (tempo_us_per_quarter <= 0)
    throw Error(ErrorCode::OutOfRange, "tempo must be positive");
  const int tpq = seq.ticks_per_quarter;
  if (tpq <= 0 || tpq > 0x7FFF)
    throw Error(ErrorCode::OutOfRange, "ticks per quarter outside 1..32767");

  const auto to_tick = [&](double seconds) -> std::int64_t {
    return std::llround(seconds * 1e6 * tpq /
                        static_cast<double>(tempo_us_per_quarter));
  };

  struct Ev {
    std::int64_t tick;
    int kind;  // 0 = off, 1 = on (offs first at equal ticks)
    int pitch;
    int velocity;
  };
  std::vector<Ev> events;
  events.reserve(seq.notes.size() * 2);
  for (const NoteEvent& n : seq.notes) {
    std::int64_t on = to_tick(n.onset_s);
    std::int64_t off = to_tick(n.offset_s);
    if (off <= on) off = on + 1;
    events.push_back({on, 1, n.pitch, n.velocity});
    events.push_back({off, 0, n.pitch, 0});
  }
  std::stable_sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.pitch < b.pitch;
  });

  std::vector<std::uint8_t> track;
  // tempo meta at tick 0
  encode_vlq(0, track);
  track.insert(track.end(), {0xFF, 0x51, 0x03});
  track.push_back(static_cast<std::uint8_t>((tempo_us_per_quarter >> 16) & 0xFF));
  track.push_back(static_cast<std::uint8_t>((tempo_us_per_quarter >> 8) & 0xFF));
  track.push_back(static_cast<std::uint8_t>(tempo_us_per_quarter & 0xFF));

  std::int64_t cursor = 0;
  for (const Ev& e : events) {
    const std::int64_t delta = e.tick - cursor;
    if (delta > 0x0FFFFFFF)
      throw Error(ErrorCode::TickOverflow, "delta time exceeds VLQ capacity");
    encode_vlq(static_cast<std::uint32_t>(delta), track);
    cursor = e.tick;
    if (e.kind == 1) {
      track.push_back(0x90);
      track.push_back(static_cast<std::uint8_t>(e.pitch));
      track.push_back(static_cast<std::uint8_t>(e.velocity));
    } else {
      track.push_back(0x80);
      track.push_back(static_cast<std::uint8_t>(e.pitch));
      track.push_back(0x00);
    }
  }
  encode_vlq(0, track);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out;
  const auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  };
  const auto u32 = [&](std::uint32_t v) {
    for (int i = 3; i >= 0; --i)
      out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  };
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  u32(6);
  u16(0);  // format
  u16(1);  // tracks
  u16(static_cast<std::uint16_t>(tpq));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  u32(static_cast<std::uint32_t>(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

// True when both sequences contain the same notes with timing within `tol_s`.
inline bool same_notes(const NoteSequence& a, const NoteSequence& b,
                       double tol_s) {
  if (a.notes.size() != b.notes.size()) return false;
  for (std::size_t i = 0; i < a.notes.size(); ++i) {
    const NoteEvent& x = a.notes[i];
    const NoteEvent& y = b.notes[i];
    if (x.pitch != y.pitch || x.velocity != y.velocity) return false;
    if (std::abs(x.onset_s - y.onset_s) > tol_s) return false;
    if (std::abs(x.offset_s - y.offset_s) > tol_s) return false;
  }
  return true;
}

}  // namespace fingerkit
