#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fingerkit/error.hpp"
#include "fingerkit/keyboard.hpp"
#include "fingerkit/midi.hpp"
#include "fingerkit/parallel.hpp"
#include "fingerkit/pose.hpp"

namespace fingerkit {

inline constexpr int kFingerIds = 10;

// One of the ten fingers: L1..L5 are 1..5, R1..R5 are 6..10 (thumb = 1).
class FingerId {
 public:
  FingerId() : value_(1) {}
  explicit FingerId(int value) : value_(value) {
    if (value < 1 || value > kFingerIds)
      throw Error(ErrorCode::OutOfRange, "finger id outside 1..10");
  }
  static FingerId from(Hand hand, int finger) {
    if (finger < 1 || finger > 5)
      throw Error(ErrorCode::OutOfRange, "finger outside 1..5");
    return FingerId(hand == Hand::Left ? finger : finger + 5);
  }
  static FingerId parse(const std::string& text) {
    if (text.size() != 2 || (text[0] != 'L' && text[0] != 'R') ||
        text[1] < '1' || text[1] > '5')
      throw Error(ErrorCode::OutOfRange, "finger label must be L1..R5");
    return from(text[0] == 'L' ? Hand::Left : Hand::Right, text[1] - '0');
  }

  int value() const { return value_; }
  Hand hand() const { return value_ <= 5 ? Hand::Left : Hand::Right; }
  int finger() const { return value_ <= 5 ? value_ : value_ - 5; }
  std::string display() const {
    return std::string(1, hand_letter(hand())) + std::to_string(finger());
  }

  bool operator==(const FingerId&) const = default;
  bool operator<(const FingerId& o) const { return value_ < o.value_; }

 private:
  int value_;
};

struct FingerDistribution {
  std::array<double, kFingerIds> probs{};  // indexed by FingerId - 1
  std::array<bool, kFingerIds> support{};

  bool empty() const {
    for (bool s : support)
      if (s) return false;
    return true;
  }

  // Argmax with ties broken toward the lowest finger id.
  FingerId best() const {
    int arg = 0;
    for (int i = 1; i < kFingerIds; ++i)
      if (probs[i] > probs[arg]) arg = i;
    return FingerId(arg + 1);
  }
};

struct PressConfig {
  double gamma = 0.5;            // per-frame exponential decay
  double y_gate_expand = 0.5;    // band grows by this fraction of its height
  double low_evidence_sigmas = 3.0;
  int threads = 1;
  bool exclusive_assignment = false;
};

struct FrameEvidence {
  FingerDistribution dist;
  bool any_in_band = false;   // at least one fingertip passed the y-gate
  bool low_evidence = false;  // nothing within low_evidence_sigmas of the key
};

// Per-frame finger distribution for one key: Gaussian key-proximity scores of
// every in-band fingertip, normalized across those fingers. The frame expects
// normalized hand labels.
inline FrameEvidence finger_distribution(const PoseFrame& frame,
                                         const KeyboardGeometry& geom,
                                         int key_index,
                                         const PressConfig& cfg = {}) {
  const auto [mu, sigma] = key_gaussian(geom, key_index);
  const double band_h = geom.band_y_bottom - geom.band_y_top;
  const double y_lo = geom.band_y_top - 0.5 * cfg.y_gate_expand * band_h;
  const double y_hi = geom.band_y_bottom + 0.5 * cfg.y_gate_expand * band_h;
  const double inv_norm = 1.0 / (sigma * std::sqrt(2.0 * 3.14159265358979323846));

  FrameEvidence ev;
  std::array<double, kFingerIds> density{};
  for (const HandPose& hand : frame.hands) {
    for (const Fingertip& tip : hand.tips) {
      if (tip.y < y_lo || tip.y > y_hi) continue;
      ev.any_in_band = true;
      const int idx = FingerId::from(hand.hand, tip.finger).value() - 1;
      const double z = (tip.x - mu) / sigma;
      const double d = inv_norm * std::exp(-0.5 * z * z);
      if (!ev.dist.support[idx] || d > density[idx]) {
        density[idx] = d;
        ev.dist.support[idx] = true;
      }
    }
  }
  if (!ev.any_in_band) return ev;

  double max_d = 0.0, sum_d = 0.0;
  for (int i = 0; i < kFingerIds; ++i) {
    max_d = std::max(max_d, density[i]);
    sum_d += density[i];
  }
  const double s = cfg.low_evidence_sigmas;
  ev.low_evidence = max_d < inv_norm * std::exp(-0.5 * s * s);
  if (sum_d > 0.0) {
    for (int i = 0; i < kFingerIds; ++i) ev.dist.probs[i] = density[i] / sum_d;
  } else {
    // all densities underflowed: flat over the detected fingers
    int n = 0;
    for (bool b : ev.dist.support) n += b;
    for (int i = 0; i < kFingerIds; ++i)
      ev.dist.probs[i] = ev.dist.support[i] ? 1.0 / n : 0.0;
    ev.low_evidence = true;
  }
  return ev;
}

struct NoteFlags {
  bool no_pose = false;
  bool low_evidence = false;
};

struct NoteFingering {
  NoteEvent note;
  FingerDistribution dist;
  FingerId best;
  double confidence = 0.0;
  NoteFlags flags;
};

// Weighted mean of the per-frame distributions, weight gamma^k for the k-th
// frame of the window. Frames with no usable evidence (nothing in band, or
// only low-evidence scores) contribute nothing; when no frame contributes the
// note is flagged NO_POSE and given the uniform distribution.
inline NoteFingering aggregate_note(std::span<const PoseFrame* const> frames,
                                    const KeyboardGeometry& geom,
                                    const NoteEvent& note,
                                    const PressConfig& cfg = {}) {
  if (frames.empty())
    throw Error(ErrorCode::EmptyFrameList, "no frames for note");
  if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0)
    throw Error(ErrorCode::BadConfig, "gamma must be in (0, 1]");

  NoteFingering out;
  out.note = note;

  std::array<double, kFingerIds> acc{};
  std::array<bool, kFingerIds> support{};
  double weight_sum = 0.0;
  double weight = 1.0;
  bool low_seen = false;
  bool have_first = false;
  FingerDistribution first_contrib;

  for (const PoseFrame* frame : frames) {
    const FrameEvidence ev = finger_distribution(*frame, geom, note.key_index, cfg);
    low_seen |= ev.low_evidence;
    if (ev.any_in_band && !ev.low_evidence) {
      for (int i = 0; i < kFingerIds; ++i) {
        acc[i] += weight * ev.dist.probs[i];
        support[i] = support[i] || ev.dist.support[i];
      }
      weight_sum += weight;
      if (!have_first) {
        first_contrib = ev.dist;
        have_first = true;
      }
    }
    weight *= cfg.gamma;
  }

  if (weight_sum <= 0.0) {
    if (have_first) {
      // weights underflowed; fall back to the first usable frame
      out.dist = first_contrib;
    } else {
      out.flags.no_pose = true;
      out.flags.low_evidence = low_seen;
      for (int i = 0; i < kFingerIds; ++i) {
        out.dist.probs[i] = 1.0 / kFingerIds;
        out.dist.support[i] = true;
      }
      out.best = out.dist.best();
      out.confidence = 1.0 / kFingerIds;
      return out;
    }
  } else {
    double total = 0.0;
    for (double a : acc) total += a;
    for (int i = 0; i < kFingerIds; ++i) {
      out.dist.probs[i] = acc[i] / total;
      out.dist.support[i] = support[i];
    }
  }
  out.best = out.dist.best();
  out.confidence = out.dist.probs[out.best.value() - 1];
  return out;
}

struct ExtractionResult {
  std::vector<NoteFingering> events;  // aligned 1:1 with the note sequence
  double log_confidence = 0.0;        // sum of ln(confidence), NO_POSE excluded
  std::int64_t no_pose_count = 0;
};

namespace detail {

// Greedy exclusive assignment: within each group of overlapping notes the
// highest-confidence note claims its finger first; later notes take their
// best still-unclaimed finger.
inline void exclusive_assignment_pass(ExtractionResult& result) {
  const std::size_t n = result.events.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.events[a].confidence > result.events[b].confidence;
  });
  const auto overlaps = [&](const NoteEvent& a, const NoteEvent& b) {
    return a.onset_s < b.offset_s && b.onset_s < a.offset_s;
  };
  std::vector<bool> assigned(n, false);
  for (std::size_t oi : order) {
    NoteFingering& ev = result.events[oi];
    if (ev.flags.no_pose) {
      assigned[oi] = true;
      continue;
    }
    std::array<bool, kFingerIds> claimed{};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == oi || !assigned[j] || result.events[j].flags.no_pose) continue;
      if (overlaps(ev.note, result.events[j].note))
        claimed[result.events[j].best.value() - 1] = true;
    }
    int arg = -1;
    for (int i = 0; i < kFingerIds; ++i) {
      if (claimed[i]) continue;
      if (arg < 0 || ev.dist.probs[i] > ev.dist.probs[arg]) arg = i;
    }
    if (arg >= 0) {
      ev.best = FingerId(arg + 1);
      ev.confidence = ev.dist.probs[arg];
    }
    assigned[oi] = true;
  }
}

}  // namespace detail

// One NoteFingering per note; notes are scored independently (and in parallel
// when cfg.threads > 1) and merged in note order.
inline ExtractionResult extract_piece(const NoteSequence& notes,
                                      const PoseStream& stream,
                                      const KeyboardGeometry& geom,
                                      double offset_s,
                                      const PressConfig& cfg = {}) {
  ExtractionResult result;
  result.events.resize(notes.notes.size());
  parallel_for(notes.notes.size(), cfg.threads, [&](std::size_t i) {
    const NoteEvent& note = notes.notes[i];
    const auto frames = frames_for_note(stream, note, offset_s);
    result.events[i] = aggregate_note(frames, geom, note, cfg);
  });
  if (cfg.exclusive_assignment) detail::exclusive_assignment_pass(result);
  for (const NoteFingering& ev : result.events) {
    if (ev.flags.no_pose) {
      ++result.no_pose_count;
    } else {
      result.log_confidence += std::log(ev.confidence);
    }
  }
  return result;
}

// --- evaluation ---------------------------------------------------------------

struct EvalRow {
  double threshold = 0.0;
  std::int64_t kept = 0;
  std::int64_t correct = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;   // one per requested threshold
  std::vector<EvalRow> curve;  // one per distinct confidence value (plus 0)
  std::int64_t total = 0;
  std::int64_t no_pose = 0;
};

namespace detail {

inline EvalRow eval_at(const ExtractionResult& result,
                       std::span<const FingerId> gold, double threshold) {
  EvalRow row;
  row.threshold = threshold;
  const std::int64_t total = static_cast<std::int64_t>(result.events.size());
  for (std::size_t i = 0; i < result.events.size(); ++i) {
    const NoteFingering& ev = result.events[i];
    if (!(ev.confidence > threshold)) continue;
    ++row.kept;
    // a NO_POSE prediction is never counted as correct
    if (!ev.flags.no_pose && ev.best == gold[i]) ++row.correct;
  }
  row.precision = row.kept > 0 ? static_cast<double>(row.correct) / row.kept : 1.0;
  row.recall = total > 0 ? static_cast<double>(row.kept) / total : 1.0;
  row.f1 = (row.precision + row.recall) > 0.0
               ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
               : 0.0;
  return row;
}

}  // namespace detail

// Precision = correct kept / kept; recall = kept / total (coverage). The curve
// holds a row for every distinct confidence value.
inline EvalReport evaluate_extraction(const ExtractionResult& result,
                                      std::span<const FingerId> gold,
                                      std::span<const double> thresholds) {
  if (gold.size() != result.events.size())
    throw Error(ErrorCode::LengthMismatch,
                "gold labels must align 1:1 with extracted events");
  EvalReport report;
  report.total = static_cast<std::int64_t>(result.events.size());
  for (const NoteFingering& ev : result.events)
    if (ev.flags.no_pose) ++report.no_pose;

  for (double t : thresholds)
    report.rows.push_back(detail::eval_at(result, gold, t));

  std::vector<double> cuts{0.0};
  for (const NoteFingering& ev : result.events) cuts.push_back(ev.confidence);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (double t : cuts) report.curve.push_back(detail::eval_at(result, gold, t));
  return report;
}

}  // namespace fingerkit
