#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fingerkit/error.hpp"
#include "fingerkit/midi.hpp"

namespace fingerkit {

enum class Hand { Left, Right };

inline char hand_letter(Hand h) { return h == Hand::Left ? 'L' : 'R'; }

struct Fingertip {
  int finger = 1;  // 1 = thumb .. 5 = pinky
  double x = 0.0;
  double y = 0.0;
  double confidence = 1.0;
};

struct HandPose {
  Hand hand = Hand::Right;
  std::vector<Fingertip> tips;  // distinct finger ids, at most 5
  double box_x_min = 0.0;
};

struct PoseFrame {
  std::int64_t frame_index = 0;
  std::vector<HandPose> hands;
};

struct PoseStream {
  double fps = 25.0;
  std::vector<PoseFrame> frames;  // frame_index strictly increasing

  double time_of(const PoseFrame& f) const { return f.frame_index / fps; }
};

struct PoseParseStats {
  int malformed_lines = 0;
  int dropped_tips = 0;
  int duplicate_frames = 0;
};

// JSON-lines stream: a {"fps": ...} header, then one frame object per line.
// Malformed lines are counted and skipped; a duplicated frame index keeps the
// last occurrence.
inline PoseStream parse_pose_stream(std::string_view text,
                                    PoseParseStats* stats = nullptr) {
  PoseParseStats local;
  PoseStream stream;
  std::map<std::int64_t, PoseFrame> by_index;

  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    // trim
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty()) continue;

    if (!have_header) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("fps") ||
          !j["fps"].is_number() || j["fps"].get<double>() <= 0.0)
        throw Error(ErrorCode::BadHeader, "first line must be {\"fps\": n}");
      stream.fps = j["fps"].get<double>();
      have_header = true;
      continue;
    }

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("frame") ||
        !j["frame"].is_number_integer() || j["frame"].get<std::int64_t>() < 0) {
      ++local.malformed_lines;
      continue;
    }
    PoseFrame frame;
    frame.frame_index = j["frame"].get<std::int64_t>();
    if (j.contains("hands") && j["hands"].is_array()) {
      for (const auto& hj : j["hands"]) {
        if (!hj.is_object()) continue;
        HandPose hand;
        const std::string label = hj.value("label", "R");
        hand.hand = (label == "L") ? Hand::Left : Hand::Right;
        hand.box_x_min = hj.value("box_x_min", 0.0);
        if (hj.contains("tips") && hj["tips"].is_array()) {
          for (const auto& tj : hj["tips"]) {
            if (!tj.is_object() || !tj.contains("f") || !tj.contains("x") ||
                !tj.contains("y")) {
              ++local.dropped_tips;
              continue;
            }
            Fingertip tip;
            tip.finger = tj["f"].get<int>();
            if (tip.finger < 1 || tip.finger > 5) {
              ++local.dropped_tips;
              continue;
            }
            tip.x = tj["x"].get<double>();
            tip.y = tj["y"].get<double>();
            tip.confidence = std::clamp(tj.value("c", 1.0), 0.0, 1.0);
            hand.tips.push_back(tip);
          }
        }
        frame.hands.push_back(std::move(hand));
      }
    }
    if (by_index.count(frame.frame_index)) ++local.duplicate_frames;
    by_index[frame.frame_index] = std::move(frame);  // last wins
  }

  if (!have_header) {
    if (stats) *stats = local;
    throw Error(ErrorCode::EmptyStream, "no lines in pose stream");
  }

  stream.frames.reserve(by_index.size());
  for (auto& [idx, frame] : by_index) stream.frames.push_back(std::move(frame));
  if (stats) *stats = local;
  return stream;
}

inline std::string write_pose_stream(const PoseStream& stream) {
  std::ostringstream out;
  nlohmann::json header{{"fps", stream.fps}};
  out << header.dump() << "\n";
  for (const PoseFrame& f : stream.frames) {
    nlohmann::json hands = nlohmann::json::array();
    for (const HandPose& h : f.hands) {
      nlohmann::json tips = nlohmann::json::array();
      for (const Fingertip& t : h.tips) {
        tips.push_back({{"f", t.finger},
                        {"x", t.x},
                        {"y", t.y},
                        {"c", t.confidence}});
      }
      hands.push_back({{"label", std::string(1, hand_letter(h.hand))},
                       {"box_x_min", h.box_x_min},
                       {"tips", std::move(tips)}});
    }
    nlohmann::json j{{"frame", f.frame_index}, {"hands", std::move(hands)}};
    out << j.dump() << "\n";
  }
  return out.str();
}

// Resolves hand labels the way the extraction pipeline expects them:
// sub-threshold fingertips are treated as missing, at most one tip per finger
// id survives (highest confidence), at most two hands survive (highest mean
// tip confidence), and two same-labeled hands are relabeled so the leftmost
// bounding box is the left hand. Idempotent.
inline PoseFrame normalize_hand_labels(PoseFrame frame,
                                       double min_tip_confidence = 0.05) {
  for (HandPose& h : frame.hands) {
    std::vector<Fingertip> kept;
    for (int finger = 1; finger <= 5; ++finger) {
      const Fingertip* best = nullptr;
      for (const Fingertip& t : h.tips) {
        if (t.finger != finger || t.confidence < min_tip_confidence) continue;
        if (!best || t.confidence > best->confidence) best = &t;
      }
      if (best) kept.push_back(*best);
    }
    h.tips = std::move(kept);
  }

  if (frame.hands.size() > 2) {
    const auto mean_conf = [](const HandPose& h) {
      if (h.tips.empty()) return 0.0;
      double s = 0.0;
      for (const Fingertip& t : h.tips) s += t.confidence;
      return s / h.tips.size();
    };
    std::vector<std::size_t> order(frame.hands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return mean_conf(frame.hands[a]) >
                              mean_conf(frame.hands[b]);
                     });
    order.resize(2);
    std::sort(order.begin(), order.end());  // keep original relative order
    std::vector<HandPose> top;
    for (std::size_t i : order) top.push_back(std::move(frame.hands[i]));
    frame.hands = std::move(top);
  }

  if (frame.hands.size() == 2 && frame.hands[0].hand == frame.hands[1].hand) {
    const bool first_is_left =
        frame.hands[0].box_x_min <= frame.hands[1].box_x_min;
    frame.hands[first_is_left ? 0 : 1].hand = Hand::Left;
    frame.hands[first_is_left ? 1 : 0].hand = Hand::Right;
  }
  return frame;
}

inline void normalize_stream(PoseStream& stream,
                             double min_tip_confidence = 0.05) {
  for (PoseFrame& f : stream.frames)
    f = normalize_hand_labels(std::move(f), min_tip_confidence);
}

// Frames whose timestamps fall inside the note's (shifted) sounding interval,
// in time order. When no frame falls inside, the single nearest frame to the
// shifted onset is returned.
inline std::vector<const PoseFrame*> frames_for_note(const PoseStream& stream,
                                                     const NoteEvent& note,
                                                     double offset_s) {
  if (stream.frames.empty())
    throw Error(ErrorCode::EmptyStream, "pose stream has no frames");
  const double t_lo = note.onset_s + offset_s;
  const double t_hi = note.offset_s + offset_s;

  std::vector<const PoseFrame*> out;
  // first frame with time >= t_lo
  const auto begin = std::lower_bound(
      stream.frames.begin(), stream.frames.end(), t_lo,
      [&](const PoseFrame& f, double t) { return stream.time_of(f) < t; });
  for (auto it = begin; it != stream.frames.end(); ++it) {
    if (stream.time_of(*it) >= t_hi) break;
    out.push_back(&*it);
  }
  if (!out.empty()) return out;

  // fallback: nearest frame to the shifted onset, earlier wins ties
  const PoseFrame* nearest = &stream.frames.front();
  double best = std::abs(stream.time_of(*nearest) - t_lo);
  for (const PoseFrame& f : stream.frames) {
    const double d = std::abs(stream.time_of(f) - t_lo);
    if (d < best) {
      best = d;
      nearest = &f;
    }
  }
  out.push_back(nearest);
  return out;
}

}  // namespace fingerkit
