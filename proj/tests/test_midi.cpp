#include "fingerkit/midi.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <vector>

#include "fingerkit/rng.hpp"

using namespace fingerkit;

namespace {

std::vector<std::uint8_t> bytes(std::initializer_list<int> xs) {
  std::vector<std::uint8_t> v;
  for (int x : xs) v.push_back(static_cast<std::uint8_t>(x));
  return v;
}

// Hand-assembled format-0 file: 480 tpq, note-on C4 vel 64 at tick 0,
// note-off at tick 480, end of track.
std::vector<std::uint8_t> one_note_file() {
  return bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                'M', 'T', 'r', 'k', 0, 0, 0, 13,
                0x00, 0x90, 60, 64,
                0x83, 0x60, 0x80, 60, 0,  // delta 480
                0x00, 0xFF, 0x2F, 0x00});
}

}  // namespace

TEST_CASE("vlq decodes the spec fixtures") {
  auto d = [](std::vector<std::uint8_t> b) { return decode_vlq(b); };
  CHECK(d(bytes({0x00})) == std::pair<std::uint32_t, std::size_t>{0, 1});
  CHECK(d(bytes({0x7F})) == std::pair<std::uint32_t, std::size_t>{127, 1});
  CHECK(d(bytes({0x81, 0x48})) == std::pair<std::uint32_t, std::size_t>{200, 2});
  CHECK(d(bytes({0xFF, 0xFF, 0xFF, 0x7F})) ==
        std::pair<std::uint32_t, std::size_t>{0x0FFFFFFFu, 4});
}

TEST_CASE("vlq error cases") {
  CHECK_THROWS_MATCHES(decode_vlq(bytes({0x81, 0x82, 0x83, 0x84, 0x05})), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::Overlong;
                       }));
  CHECK_THROWS_MATCHES(decode_vlq(bytes({0x81, 0x82})), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::Truncated;
                       }));
}

TEST_CASE("vlq encoder and decoder are inverse over random values") {
  Rng rng(20240601);
  for (int i = 0; i < 2000; ++i) {
    const std::uint32_t v = static_cast<std::uint32_t>(rng.next_u64()) & 0x0FFFFFFFu;
    std::vector<std::uint8_t> enc;
    encode_vlq(v, enc);
    auto [dec, used] = decode_vlq(enc);
    REQUIRE(dec == v);
    REQUIRE(used == enc.size());
  }
  for (std::uint32_t v : {0u, 127u, 128u, 16383u, 16384u, 0x0FFFFFFFu}) {
    std::vector<std::uint8_t> enc;
    encode_vlq(v, enc);
    CHECK(decode_vlq(enc).first == v);
  }
}

TEST_CASE("pitch and key mapping endpoints") {
  CHECK(pitch_to_key(21) == 1);
  CHECK(pitch_to_key(60) == 40);
  CHECK(pitch_to_key(108) == 88);
  CHECK(key_to_pitch(1) == 21);
  CHECK(key_to_pitch(88) == 108);
  for (int p = 21; p <= 108; ++p) CHECK(key_to_pitch(pitch_to_key(p)) == p);
  CHECK_THROWS_AS(pitch_to_key(20), Error);
  CHECK_THROWS_AS(pitch_to_key(109), Error);
  CHECK_THROWS_AS(key_to_pitch(0), Error);
  CHECK_THROWS_AS(key_to_pitch(89), Error);
}

TEST_CASE("parse_smf reads a minimal one-note file") {
  SmfStats stats;
  NoteSequence seq = parse_smf(one_note_file(), &stats);
  REQUIRE(seq.notes.size() == 1);
  CHECK(seq.ticks_per_quarter == 480);
  CHECK(seq.source_format == 0);
  const NoteEvent& n = seq.notes[0];
  CHECK(n.pitch == 60);
  CHECK(n.key_index == 40);
  CHECK(n.velocity == 64);
  CHECK(n.onset_s == Catch::Approx(0.0).margin(1e-12));
  CHECK(n.offset_s == Catch::Approx(0.5).margin(1e-12));  // 480 ticks at 500000 us
  CHECK(stats.dropped_out_of_range == 0);
  CHECK(stats.dangling_note_ons == 0);
}

TEST_CASE("parse_smf accepts a file with zero note events") {
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 4,
                     0x00, 0xFF, 0x2F, 0x00});
  NoteSequence seq = parse_smf(file);
  CHECK(seq.notes.empty());
}

TEST_CASE("parse_smf merges a two-track format-1 file and sorts by onset then pitch") {
  // Track 1: E4 (pitch 64) on at tick 0, off at 480.
  // Track 2: C4 (pitch 60) on at tick 0, off at 960. Same onset, lower pitch
  // must sort first.
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1, 0, 2, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 13,
                     0x00, 0x90, 64, 80,
                     0x83, 0x60, 0x80, 64, 0,
                     0x00, 0xFF, 0x2F, 0x00,
                     'M', 'T', 'r', 'k', 0, 0, 0, 13,
                     0x00, 0x90, 60, 80,
                     0x87, 0x40, 0x80, 60, 0,  // delta 960
                     0x00, 0xFF, 0x2F, 0x00});
  NoteSequence seq = parse_smf(file);
  REQUIRE(seq.notes.size() == 2);
  CHECK(seq.source_format == 1);
  CHECK(seq.notes[0].pitch == 60);
  CHECK(seq.notes[1].pitch == 64);
  CHECK(seq.notes[0].offset_s == Catch::Approx(1.0));
  CHECK(seq.notes[1].offset_s == Catch::Approx(0.5));
}

TEST_CASE("note-on with velocity zero acts as note-off") {
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 13,
                     0x00, 0x90, 60, 64,
                     0x83, 0x60, 0x90, 60, 0,
                     0x00, 0xFF, 0x2F, 0x00});
  NoteSequence seq = parse_smf(file);
  REQUIRE(seq.notes.size() == 1);
  CHECK(seq.notes[0].offset_s == Catch::Approx(0.5));
}

TEST_CASE("running status is honored on read") {
  // Second note-on omits the status byte.
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 16,
                     0x00, 0x90, 60, 64,
                     0x00, 64, 64,            // running status: note-on E4
                     0x83, 0x60, 0x90, 60, 0,
                     0x00, 0xFF, 0x2F, 0x00});
  SmfStats stats;
  NoteSequence seq = parse_smf(file, &stats);
  REQUIRE(seq.notes.size() == 2);
  CHECK(stats.dangling_note_ons == 1);  // E4 never released
}

TEST_CASE("overlapping same-pitch notes: the earlier closes at the second onset") {
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 18,
                     0x00, 0x90, 60, 64,
                     0x81, 0x70, 0x90, 60, 70,  // delta 240, second on
                     0x81, 0x70, 0x80, 60, 0,   // delta 240 -> tick 480
                     0x00, 0xFF, 0x2F, 0x00});
  NoteSequence seq = parse_smf(file);
  REQUIRE(seq.notes.size() == 2);
  CHECK(seq.notes[0].onset_s == Catch::Approx(0.0));
  CHECK(seq.notes[0].offset_s == Catch::Approx(0.25));
  CHECK(seq.notes[1].onset_s == Catch::Approx(0.25));
  CHECK(seq.notes[1].offset_s == Catch::Approx(0.5));
}

TEST_CASE("out-of-range pitches are dropped and counted") {
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 21,
                     0x00, 0x90, 10, 64,        // below A0
                     0x00, 0x90, 60, 64,
                     0x83, 0x60, 0x80, 10, 0,
                     0x00, 0x80, 60, 0,
                     0x00, 0xFF, 0x2F, 0x00});
  SmfStats stats;
  NoteSequence seq = parse_smf(file, &stats);
  REQUIRE(seq.notes.size() == 1);
  CHECK(stats.dropped_out_of_range == 1);
}

TEST_CASE("tempo changes are folded into the timing map") {
  // 480 tpq. Tempo 500000 for the first quarter, then 250000.
  auto file = bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                     'M', 'T', 'r', 'k', 0, 0, 0, 21,
                     0x00, 0x90, 60, 64,
                     0x83, 0x60, 0xFF, 0x51, 0x03, 0x03, 0xD0, 0x90,  // 250000
                     0x83, 0x60, 0x80, 60, 0,
                     0x00, 0xFF, 0x2F, 0x00});
  NoteSequence seq = parse_smf(file);
  REQUIRE(seq.notes.size() == 1);
  CHECK(seq.notes[0].onset_s == Catch::Approx(0.0));
  CHECK(seq.notes[0].offset_s == Catch::Approx(0.5 + 0.25));
}

TEST_CASE("malformed inputs raise the declared errors") {
  CHECK_THROWS_MATCHES(parse_smf(bytes({'X', 'T', 'h', 'd', 0, 0, 0, 6})), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::MalformedHeader;
                       }));
  // SMPTE division
  CHECK_THROWS_MATCHES(
      parse_smf(bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0xE7, 0x28})),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == ErrorCode::UnsupportedDivision;
      }));
  // format 2
  CHECK_THROWS_MATCHES(
      parse_smf(bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 2, 0, 1, 0x01, 0xE0})),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == ErrorCode::MalformedHeader;
      }));
  // MTrk length past end of file
  CHECK_THROWS_MATCHES(
      parse_smf(bytes({'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0,
                       'M', 'T', 'r', 'k', 0, 0, 0, 99, 0x00})),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == ErrorCode::TruncatedChunk;
      }));
}

TEST_CASE("write_smf of an empty sequence yields a parsable file") {
  NoteSequence empty;
  auto data = write_smf(empty);
  NoteSequence back = parse_smf(data);
  CHECK(back.notes.empty());
}

TEST_CASE("one-note sequence round-trips through write_smf") {
  NoteSequence seq;
  seq.ticks_per_quarter = 480;
  seq.notes.push_back(NoteEvent::make(60, 0.0, 0.5, 64));
  auto data = write_smf(seq, 500000);
  NoteSequence back = parse_smf(data);
  REQUIRE(back.notes.size() == 1);
  CHECK(back.notes[0].pitch == 60);
  CHECK(back.notes[0].velocity == 64);
  CHECK(back.notes[0].onset_s == Catch::Approx(0.0));
  CHECK(back.notes[0].offset_s == Catch::Approx(0.5));
}

TEST_CASE("random sequences survive a write/parse round trip") {
  Rng rng(977);
  NoteSequence seq;
  seq.ticks_per_quarter = 480;
  // Notes may overlap across pitches, but SMF pairing cannot represent
  // overlapping notes on the same pitch, so keep each pitch monophonic.
  std::vector<double> last_off(128, 0.0);
  double t = 0.0;
  for (int i = 0; i < 1000; ++i) {
    t += rng.uniform(0.0, 0.3);
    const double dur = rng.uniform(0.05, 1.5);
    const int pitch = rng.uniform_int(21, 108);
    const int vel = rng.uniform_int(1, 127);
    const double onset = std::max(t, last_off[pitch] + 0.01);
    last_off[pitch] = onset + dur;
    seq.notes.push_back(NoteEvent::make(pitch, onset, onset + dur, vel));
  }
  sort_notes(seq);

  const std::int64_t tempo = 500000;
  auto data = write_smf(seq, tempo);
  NoteSequence back = parse_smf(data);
  REQUIRE(back.notes.size() == seq.notes.size());
  const double half_tick_s = 0.5 * tempo / 1e6 / seq.ticks_per_quarter;
  CHECK(same_notes(seq, back, half_tick_s + 1e-12));

  // And the re-written bytes are identical (write is canonical).
  CHECK(write_smf(back, tempo) == data);
}

TEST_CASE("tick to seconds conversion is monotone for any tempo map") {
  Rng rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    TempoMap map;
    std::int64_t tick = 0;
    for (int i = 0; i < 10; ++i) {
      tick += rng.uniform_int(1, 5000);
      map.set(tick, rng.uniform_int(100000, 2000000));
    }
    double prev = -1.0;
    std::int64_t t = 0;
    for (int i = 0; i < 100; ++i) {
      t += rng.uniform_int(0, 1500);
      const double s = map.tick_to_seconds(t, 480);
      REQUIRE(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("note event construction enforces the invariants") {
  CHECK_THROWS_AS(NoteEvent::make(60, 1.0, 1.0, 64), Error);
  CHECK_THROWS_AS(NoteEvent::make(60, 1.0, 0.5, 64), Error);
  CHECK_THROWS_AS(NoteEvent::make(60, 0.0, 1.0, 0), Error);
  CHECK_THROWS_AS(NoteEvent::make(60, 0.0, 1.0, 128), Error);
  CHECK_THROWS_AS(NoteEvent::make(109, 0.0, 1.0, 64), Error);
  const NoteEvent n = NoteEvent::make(21, 0.0, 1.0, 1);
  CHECK(n.key_index == 1);
}
