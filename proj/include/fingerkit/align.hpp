#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fingerkit/audio.hpp"
#include "fingerkit/error.hpp"
#include "fingerkit/keyboard.hpp"
#include "fingerkit/midi.hpp"
#include "fingerkit/parallel.hpp"
#include "fingerkit/pose.hpp"
#include "fingerkit/press.hpp"

namespace fingerkit {

struct AlignmentReport {
  double initial_offset_s = 0.0;
  double best_offset_s = 0.0;
  std::vector<std::pair<double, double>> scores;  // (offset_s, log confidence)
};

// Audio-based starting estimate: first above-threshold audio sample minus the
// first MIDI onset. Without audio the pipeline starts from zero.
inline double initial_offset(const std::optional<AudioClip>& audio,
                             const NoteSequence& notes,
                             double onset_threshold = 0.1) {
  if (!audio || notes.notes.empty()) return 0.0;
  return first_onset(*audio, onset_threshold) - notes.notes.front().onset_s;
}

// Grid search over offsets initial + k/fps for k in [-round(w*fps),
// +round(w*fps)], scoring each candidate by the piece log confidence. Ties go
// to the candidate nearest the initial estimate.
inline AlignmentReport search_offset(const NoteSequence& notes,
                                     const PoseStream& stream,
                                     const KeyboardGeometry& geom,
                                     double initial_offset_s,
                                     double window_s = 1.0,
                                     const PressConfig& cfg = {}) {
  if (window_s < 0.0)
    throw Error(ErrorCode::BadConfig, "window must be non-negative");
  const int half = static_cast<int>(std::lround(window_s * stream.fps));

  AlignmentReport report;
  report.initial_offset_s = initial_offset_s;
  const std::size_t n = static_cast<std::size_t>(2 * half + 1);
  report.scores.resize(n);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const int k = static_cast<int>(i) - half;
    const double offset = initial_offset_s + k / stream.fps;
    const ExtractionResult r = extract_piece(notes, stream, geom, offset, cfg);
    report.scores[i] = {offset, r.log_confidence};
  });

  // argmax in candidate order; ties resolved toward the initial estimate
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double s = report.scores[i].second;
    const double b = report.scores[best].second;
    if (s > b) {
      best = i;
    } else if (s == b) {
      const double di = std::abs(report.scores[i].first - initial_offset_s);
      const double db = std::abs(report.scores[best].first - initial_offset_s);
      if (di < db) best = i;
    }
  }
  report.best_offset_s = report.scores[best].first;
  return report;
}

}  // namespace fingerkit
