#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace robustlab {

inline std::string_view trim_view(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

/// Whitespace-delimited word count.
inline long word_count(std::string_view s) {
  long n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  return fnv1a64(std::string_view(static_cast<const char*>(data), len));
}

// Round-half-up everywhere, including negatives: -1.5 -> -1.
inline double round_half_up(double x) { return std::floor(x + 0.5); }

inline std::uint8_t quantize_u8(double v) {
  double r = round_half_up(v);
  if (r < 0.0) return 0;
  if (r > 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

// Snap libm outputs to a 2^-24 grid. Different libm builds may disagree in
// the last ulp; after snapping those differences cannot reach the quantized
// 8-bit pixel output. Valid for |v| < 2^28.
inline double det_snap(double v) { return std::nearbyint(v * 16777216.0) / 16777216.0; }

inline double det_exp(double x) { return det_snap(std::exp(x)); }
inline double det_log(double x) { return det_snap(std::log(x)); }
inline double det_cos(double x) { return det_snap(std::cos(x)); }
inline double det_sin(double x) { return det_snap(std::sin(x)); }

std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace robustlab
