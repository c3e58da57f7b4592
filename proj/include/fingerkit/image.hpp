#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fingerkit/error.hpp"

namespace fingerkit {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  static GrayImage filled(int w, int h, std::uint8_t value) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, value);
    return img;
  }
};

// Binary PGM (P5, 8-bit). Header comments (#) are accepted.
inline GrayImage parse_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    if (tok.empty()) throw Error(ErrorCode::BadImage, "truncated PGM header");
    return tok;
  };

  if (next_token() != "P5")
    throw Error(ErrorCode::BadImage, "not a binary PGM (P5) file");
  GrayImage img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval <= 0 || maxval > 255)
      throw Error(ErrorCode::BadImage, "only 8-bit PGM supported");
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadImage, "bad PGM header field");
  }
  if (img.width <= 0 || img.height <= 0)
    throw Error(ErrorCode::BadImage, "bad PGM dimensions");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos < need)
    throw Error(ErrorCode::BadImage, "PGM pixel data truncated");
  img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return img;
}

inline std::vector<std::uint8_t> write_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// Otsu's threshold: pixels > t are foreground.
inline int otsu_threshold(const GrayImage& img) {
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t p : img.pixels) ++hist[p];
  const double total = static_cast<double>(img.pixels.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];

  double best_var = -1.0;
  int best_t = 127;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    if (w0 == 0) continue;
    const double w1 = total - w0;
    if (w1 == 0) break;
    sum0 += static_cast<double>(t) * hist[t];
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace fingerkit
