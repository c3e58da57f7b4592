#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fingerkit/error.hpp"
#include "fingerkit/image.hpp"
#include "fingerkit/midi.hpp"

namespace fingerkit {

inline constexpr int kWhiteKeyCount = 52;
inline constexpr int kBlackKeyCount = 36;

inline bool is_black_key(int key_index) {
  const int pc = key_to_pitch(key_index) % 12;
  return pc == 1 || pc == 3 || pc == 6 || pc == 8 || pc == 10;
}

// 1-based ordinal of a white key among white keys (A0 = 1).
inline int white_ordinal(int key_index) {
  int ord = 0;
  for (int k = 1; k <= key_index; ++k)
    if (!is_black_key(k)) ++ord;
  return ord;
}

struct KeyGeometry {
  int key_index = 1;
  int midi_pitch = 21;
  double x_center = 0.0;
  double width = 0.0;
  bool is_black = false;
  double y_top = 0.0;
  double y_bottom = 0.0;
};

struct KeyboardGeometry {
  std::vector<KeyGeometry> keys;  // exactly 88, sorted by key_index
  int frame_width = 0;
  int frame_height = 0;
  double band_y_top = 0.0;
  double band_y_bottom = 0.0;
  double sigma_scale = 1.0;

  const KeyGeometry& key(int key_index) const {
    if (key_index < 1 || key_index > kKeyCount)
      throw Error(ErrorCode::OutOfRange,
                  "key " + std::to_string(key_index) + " outside 1..88");
    return keys[key_index - 1];
  }
};

// All fields needed to derive the full 88-key table.
struct Calibration {
  int frame_width = 0;
  int frame_height = 0;
  double band_y_top = 0.0;
  double band_y_bottom = 0.0;
  double white_left = 0.0;   // left edge of the first white key (A0)
  double white_width = 0.0;  // uniform white-key width
  double black_width_ratio = 0.6;
  double black_height_ratio = 0.6;
  double sigma_scale = 1.0;
};

inline KeyboardGeometry build_geometry(const Calibration& cal) {
  if (cal.white_width <= 0.0 || cal.band_y_bottom <= cal.band_y_top)
    throw Error(ErrorCode::BadCalibration, "degenerate band or key width");
  if (cal.black_width_ratio <= 0.0 || cal.black_height_ratio <= 0.0 ||
      cal.black_height_ratio > 1.0)
    throw Error(ErrorCode::BadCalibration, "bad black-key ratios");

  KeyboardGeometry geom;
  geom.frame_width = cal.frame_width;
  geom.frame_height = cal.frame_height;
  geom.band_y_top = cal.band_y_top;
  geom.band_y_bottom = cal.band_y_bottom;
  geom.sigma_scale = cal.sigma_scale;
  const double band_height = cal.band_y_bottom - cal.band_y_top;

  geom.keys.reserve(kKeyCount);
  int whites_so_far = 0;
  for (int k = 1; k <= kKeyCount; ++k) {
    KeyGeometry kg;
    kg.key_index = k;
    kg.midi_pitch = key_to_pitch(k);
    kg.is_black = is_black_key(k);
    kg.y_top = cal.band_y_top;
    if (kg.is_black) {
      // Centered on the boundary between its neighboring white keys,
      // occupying the upper part of the band.
      kg.x_center = cal.white_left + whites_so_far * cal.white_width;
      kg.width = cal.black_width_ratio * cal.white_width;
      kg.y_bottom = cal.band_y_top + cal.black_height_ratio * band_height;
    } else {
      ++whites_so_far;
      kg.x_center = cal.white_left + (whites_so_far - 0.5) * cal.white_width;
      kg.width = cal.white_width;
      kg.y_bottom = cal.band_y_bottom;
    }
    geom.keys.push_back(kg);
  }
  return geom;
}

// (mu, sigma) of the key's Gaussian: mu is the key center, sigma its width
// scaled by the calibration's sigma_scale.
inline std::pair<double, double> key_gaussian(const KeyboardGeometry& geom,
                                              int key_index) {
  const KeyGeometry& k = geom.key(key_index);
  return {k.x_center, k.width * geom.sigma_scale};
}

// --- calibration JSON --------------------------------------------------------

inline nlohmann::json calibration_to_json(const Calibration& cal) {
  return nlohmann::json{
      {"frame_width", cal.frame_width},
      {"frame_height", cal.frame_height},
      {"band", {{"y_top", cal.band_y_top}, {"y_bottom", cal.band_y_bottom}}},
      {"white_left", cal.white_left},
      {"white_width", cal.white_width},
      {"black_width_ratio", cal.black_width_ratio},
      {"black_height_ratio", cal.black_height_ratio},
      {"sigma_scale", cal.sigma_scale}};
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration cal;
  try {
    cal.frame_width = j.at("frame_width").get<int>();
    cal.frame_height = j.at("frame_height").get<int>();
    cal.band_y_top = j.at("band").at("y_top").get<double>();
    cal.band_y_bottom = j.at("band").at("y_bottom").get<double>();
    cal.white_left = j.at("white_left").get<double>();
    cal.white_width = j.at("white_width").get<double>();
    cal.black_width_ratio = j.value("black_width_ratio", 0.6);
    cal.black_height_ratio = j.value("black_height_ratio", 0.6);
    cal.sigma_scale = j.value("sigma_scale", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCalibration, e.what());
  }
  return cal;
}

// --- detection ----------------------------------------------------------------

struct DetectStats {
  int frames_used = 0;
  int frames_skipped = 0;        // no bright region covering >= 10% of the frame
  bool inconsistent_frames = false;
  double max_band_deviation_px = 0.0;
};

namespace detail {

struct Band {
  double y_top, y_bottom, x_left, x_right;
};

// Bounding box of the largest bright 4-connected component, or nullopt when
// that component covers less than 10% of the frame.
inline std::optional<Band> frame_band(const GrayImage& img) {
  const int t = otsu_threshold(img);
  const int w = img.width, h = img.height;
  std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::int32_t> stack;
  std::int64_t best_size = 0;
  Band best{};

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (label[idx] != -1 || img.pixels[idx] <= t) continue;
      // flood fill
      std::int64_t size = 0;
      int min_x = x, max_x = x, min_y = y, max_y = y;
      label[idx] = 1;
      stack.push_back(static_cast<std::int32_t>(idx));
      while (!stack.empty()) {
        const std::int32_t cur = stack.back();
        stack.pop_back();
        const int cx = cur % w, cy = cur / w;
        ++size;
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        const int nx[4] = {cx - 1, cx + 1, cx, cx};
        const int ny[4] = {cy, cy, cy - 1, cy + 1};
        for (int i = 0; i < 4; ++i) {
          if (nx[i] < 0 || nx[i] >= w || ny[i] < 0 || ny[i] >= h) continue;
          const std::size_t nidx =
              static_cast<std::size_t>(ny[i]) * w + nx[i];
          if (label[nidx] != -1 || img.pixels[nidx] <= t) continue;
          label[nidx] = 1;
          stack.push_back(static_cast<std::int32_t>(nidx));
        }
      }
      if (size > best_size) {
        best_size = size;
        best = {static_cast<double>(min_y), static_cast<double>(max_y),
                static_cast<double>(min_x), static_cast<double>(max_x)};
      }
    }
  }
  if (best_size * 10 < static_cast<std::int64_t>(w) * h) return std::nullopt;
  return best;
}

}  // namespace detail

// Finds the keyboard as the largest bright area per frame, averages the band
// edges over frames, and splits the band into the standard 88-key layout.
inline KeyboardGeometry detect_keyboard(std::span<const GrayImage> frames,
                                        DetectStats* stats = nullptr,
                                        double black_width_ratio = 0.6,
                                        double black_height_ratio = 0.6,
                                        double sigma_scale = 1.0) {
  if (frames.empty())
    throw Error(ErrorCode::NoBrightRegion, "no frames supplied");
  const int w = frames[0].width, h = frames[0].height;
  for (const GrayImage& f : frames) {
    if (f.width != w || f.height != h)
      throw Error(ErrorCode::BadImage, "frames differ in size");
  }

  DetectStats local;
  std::vector<detail::Band> bands;
  for (const GrayImage& f : frames) {
    if (auto band = detail::frame_band(f)) {
      bands.push_back(*band);
      ++local.frames_used;
    } else {
      ++local.frames_skipped;
    }
  }
  if (bands.empty())
    throw Error(ErrorCode::NoBrightRegion,
                "largest bright area is below 10% of the frame in every frame");

  detail::Band mean{0, 0, 0, 0};
  for (const detail::Band& b : bands) {
    mean.y_top += b.y_top;
    mean.y_bottom += b.y_bottom;
    mean.x_left += b.x_left;
    mean.x_right += b.x_right;
  }
  const double n = static_cast<double>(bands.size());
  mean.y_top /= n;
  mean.y_bottom /= n;
  mean.x_left /= n;
  mean.x_right /= n;

  for (const detail::Band& b : bands) {
    const double dev =
        std::max(std::abs(b.y_top - mean.y_top), std::abs(b.y_bottom - mean.y_bottom));
    local.max_band_deviation_px = std::max(local.max_band_deviation_px, dev);
  }
  local.inconsistent_frames = local.max_band_deviation_px > 0.1 * h;

  Calibration cal;
  cal.frame_width = w;
  cal.frame_height = h;
  cal.band_y_top = mean.y_top;
  cal.band_y_bottom = mean.y_bottom;
  cal.white_left = mean.x_left;
  cal.white_width = (mean.x_right - mean.x_left) / kWhiteKeyCount;
  cal.black_width_ratio = black_width_ratio;
  cal.black_height_ratio = black_height_ratio;
  cal.sigma_scale = sigma_scale;

  if (stats) *stats = local;
  return build_geometry(cal);
}

// Recovers the calibration parameters of a built geometry (for saving a
// detection result to a calibration file).
inline Calibration geometry_to_calibration(const KeyboardGeometry& geom) {
  Calibration cal;
  cal.frame_width = geom.frame_width;
  cal.frame_height = geom.frame_height;
  cal.band_y_top = geom.band_y_top;
  cal.band_y_bottom = geom.band_y_bottom;
  const KeyGeometry& a0 = geom.key(1);  // white
  cal.white_width = a0.width;
  cal.white_left = a0.x_center - 0.5 * a0.width;
  const KeyGeometry& asharp0 = geom.key(2);  // black
  cal.black_width_ratio = asharp0.width / a0.width;
  cal.black_height_ratio = (asharp0.y_bottom - geom.band_y_top) /
                           (geom.band_y_bottom - geom.band_y_top);
  cal.sigma_scale = geom.sigma_scale;
  return cal;
}

}  // namespace fingerkit
