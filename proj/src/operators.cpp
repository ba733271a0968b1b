// The 16 degradation operators. Shared conventions:
//  - intensity 0 is handled in apply_spec and never reaches an operator,
//    so every operator may assume s > 0 and may consume rng draws freely;
//  - intermediate math runs in double, quantized once at operator exit
//    with round-half-up and clamping to [0,255];
//  - rng draw order is part of each operator's contract (goldens pin it).

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "robustlab/degradation.hpp"
#include "robustlab/errors.hpp"
#include "robustlab/util.hpp"

namespace robustlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // interleaved RGB

  double& at(int x, int y, int c) {
    return data[static_cast<std::size_t>(y * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[static_cast<std::size_t>(y * width + x) * 3 + c];
  }
};

FloatImage to_float(const RasterImage& img) {
  FloatImage f;
  f.width = img.width;
  f.height = img.height;
  f.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) f.data[i] = img.data[i];
  return f;
}

RasterImage quantize(const FloatImage& f) {
  RasterImage img;
  img.width = f.width;
  img.height = f.height;
  img.data.resize(f.data.size());
  for (std::size_t i = 0; i < f.data.size(); ++i) img.data[i] = quantize_u8(f.data[i]);
  return img;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Gaussian taps out to ceil(3*sigma), normalized.
std::vector<double> gaussian_kernel(double sigma) {
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = det_exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : k) w /= sum;
  return k;
}

// Separable convolution with replicated borders.
FloatImage convolve_separable(const FloatImage& src, const std::vector<double>& kernel) {
  int radius = static_cast<int>(kernel.size() / 2);
  FloatImage tmp = src, out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 src.at(clampi(x + i, 0, src.width - 1), y, c);
        tmp.at(x, y, c) = acc;
      }
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 tmp.at(x, clampi(y + i, 0, src.height - 1), c);
        out.at(x, y, c) = acc;
      }
  return out;
}

FloatImage gaussian_blur(const FloatImage& src, double sigma) {
  if (sigma <= 0.0) return src;
  return convolve_separable(src, gaussian_kernel(sigma));
}

double bilinear(const FloatImage& img, double x, double y, int c) {
  x = std::min(std::max(x, 0.0), static_cast<double>(img.width - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(img.height - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double fx = x - x0, fy = y - y0;
  double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
  double bot = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx <= 0.0 ? 0.0 : d / mx;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  double c = v * s;
  double hp = h / 60.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) {
    r1 = c; g1 = x;
  } else if (hp < 2) {
    r1 = x; g1 = c;
  } else if (hp < 3) {
    g1 = c; b1 = x;
  } else if (hp < 4) {
    g1 = x; b1 = c;
  } else if (hp < 5) {
    r1 = x; b1 = c;
  } else {
    r1 = c; b1 = x;
  }
  double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

// --- Acquisition ---------------------------------------------------------

// sigma = 8s, kernel radius ceil(3*sigma).
RasterImage op_lens_blur(const RasterImage& img, double s, RngState&) {
  return quantize(gaussian_blur(to_float(img), 8.0 * s));
}

// Additive radial blob: peak 180s, sigma 0.25*min(w,h), center uniform.
// Draws: cx, cy.
RasterImage op_lens_flare(const RasterImage& img, double s, RngState& rng) {
  double cx = rng.u01() * img.width;
  double cy = rng.u01() * img.height;
  double sigma = 0.25 * std::min(img.width, img.height);
  double peak = 180.0 * s;
  FloatImage f = to_float(img);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double dx = x - cx, dy = y - cy;
      double add = peak * det_exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      for (int c = 0; c < 3; ++c) f.at(x, y, c) += add;
    }
  return quantize(f);
}

// Linear kernel of length 1 + round(30s) at angle U[0,pi). Draws: angle.
RasterImage op_motion_blur(const RasterImage& img, double s, RngState& rng) {
  int len = 1 + static_cast<int>(round_half_up(30.0 * s));
  double theta = rng.u01() * kPi;
  if (len <= 1) return img;
  double ct = det_cos(theta), st = det_sin(theta);
  FloatImage src = to_float(img), out = src;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < len; ++i) {
          double t = i - (len - 1) / 2.0;
          acc += bilinear(src, x + t * ct, y + t * st, c);
        }
        out.at(x, y, c) = acc / len;
      }
  return quantize(out);
}

// Low-frequency smudge mask (5x5 control grid, bilinear upsample),
// alpha-composited at opacity 0.6s. Draws: 25 mask nodes, 25 color nodes.
RasterImage op_dirty_lens(const RasterImage& img, double s, RngState& rng) {
  constexpr int kGrid = 5;
  double mask[kGrid][kGrid], color[kGrid][kGrid];
  for (auto& row : mask)
    for (auto& v : row) v = rng.u01();
  for (auto& row : color)
    for (auto& v : row) v = 40.0 + rng.u01() * 120.0;

  auto sample_grid = [&](const double (&g)[kGrid][kGrid], double u, double v) {
    double gx = u * (kGrid - 1), gy = v * (kGrid - 1);
    int x0 = std::min(static_cast<int>(gx), kGrid - 2);
    int y0 = std::min(static_cast<int>(gy), kGrid - 2);
    double fx = gx - x0, fy = gy - y0;
    double top = g[y0][x0] * (1 - fx) + g[y0][x0 + 1] * fx;
    double bot = g[y0 + 1][x0] * (1 - fx) + g[y0 + 1][x0 + 1] * fx;
    return top * (1 - fy) + bot * fy;
  };

  FloatImage f = to_float(img);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double u = img.width > 1 ? static_cast<double>(x) / (img.width - 1) : 0.0;
      double v = img.height > 1 ? static_cast<double>(y) / (img.height - 1) : 0.0;
      double alpha = 0.6 * s * sample_grid(mask, u, v);
      double smudge = sample_grid(color, u, v);
      for (int c = 0; c < 3; ++c)
        f.at(x, y, c) = f.at(x, y, c) * (1.0 - alpha) + smudge * alpha;
    }
  return quantize(f);
}

// HSV saturation scaled by (1-0.9s) or (1+1.5s) on a fair coin. Draws: coin.
RasterImage op_saturation(const RasterImage& img, double s, RngState& rng) {
  bool desaturate = rng.u01() < 0.5;
  double factor = desaturate ? (1.0 - 0.9 * s) : (1.0 + 1.5 * s);
  FloatImage f = to_float(img);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double h, sat, v;
      rgb_to_hsv(f.at(x, y, 0) / 255.0, f.at(x, y, 1) / 255.0, f.at(x, y, 2) / 255.0, h, sat, v);
      sat = std::min(1.0, std::max(0.0, sat * factor));
      double r, g, b;
      hsv_to_rgb(h, sat, v, r, g, b);
      f.at(x, y, 0) = r * 255.0;
      f.at(x, y, 1) = g * 255.0;
      f.at(x, y, 2) = b * 255.0;
    }
  return quantize(f);
}

// --- Transmission --------------------------------------------------------

// JPEG round trip at quality round(95 - 85s).
RasterImage op_compression(const RasterImage& img, double s, RngState&) {
  int quality = static_cast<int>(round_half_up(95.0 - 85.0 * s));
  return jpeg_round_trip(img, quality);
}

// round(12s) blocks of size min(16, w, h) copied from random positions.
// Draws per block: dst y, dst x, src y, src x.
RasterImage op_block_change(const RasterImage& img, double s, RngState& rng) {
  int b = std::min({16, img.width, img.height});
  int k = static_cast<int>(round_half_up(12.0 * s));
  RasterImage out = img;
  for (int i = 0; i < k; ++i) {
    int dy = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(img.height - b + 1)));
    int dx = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(img.width - b + 1)));
    int sy = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(img.height - b + 1)));
    int sx = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(img.width - b + 1)));
    std::vector<std::uint8_t> block(static_cast<std::size_t>(b) * b * 3);
    for (int y = 0; y < b; ++y)
      std::memcpy(block.data() + static_cast<std::size_t>(y) * b * 3,
                  out.data.data() + (static_cast<std::size_t>(sy + y) * img.width + sx) * 3,
                  static_cast<std::size_t>(b) * 3);
    for (int y = 0; y < b; ++y)
      std::memcpy(out.data.data() + (static_cast<std::size_t>(dy + y) * img.width + dx) * 3,
                  block.data() + static_cast<std::size_t>(y) * b * 3,
                  static_cast<std::size_t>(b) * 3);
  }
  return out;
}

// Circular horizontal shift of round(0.2*s*w) px over a band of height
// round(0.3h) at a random offset. Draws: band start.
RasterImage op_shifting(const RasterImage& img, double s, RngState& rng) {
  int shift = static_cast<int>(round_half_up(0.2 * s * img.width));
  int band_h = std::max(1, static_cast<int>(round_half_up(0.3 * img.height)));
  band_h = std::min(band_h, img.height);
  int y0 = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(img.height - band_h + 1)));
  if (shift % img.width == 0) return img;
  RasterImage out = img;
  for (int y = y0; y < y0 + band_h; ++y)
    for (int x = 0; x < img.width; ++x) {
      int sx = (x - shift % img.width + img.width) % img.width;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, y, c);
    }
  return out;
}

// Every ceil(1/max(s,1/16))-th row darkened by (1 - 0.5s).
RasterImage op_scan_lines(const RasterImage& img, double s, RngState&) {
  int period = static_cast<int>(std::ceil(1.0 / std::max(s, 1.0 / 16.0)));
  double factor = 1.0 - 0.5 * s;
  RasterImage out = img;
  for (int y = 0; y < img.height; y += period)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = quantize_u8(img.at(x, y, c) * factor);
  return out;
}

// --- Environment ---------------------------------------------------------

// Per-sample gain (1 - 0.8s).
RasterImage op_darkness(const RasterImage& img, double s, RngState&) {
  double gain = 1.0 - 0.8 * s;
  RasterImage out = img;
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = quantize_u8(img.data[i] * gain);
  return out;
}

// Random displacement field (peak 6s px after sigma=8 smoothing and
// renormalization). Draws: per pixel row-major, dx then dy.
RasterImage op_atmospheric_turbulence(const RasterImage& img, double s, RngState& rng) {
  const int w = img.width, h = img.height;
  FloatImage dx, dy;
  dx.width = dy.width = w;
  dx.height = dy.height = h;
  dx.data.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
  dy.data.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double vx = rng.u01() * 2.0 - 1.0;
      double vy = rng.u01() * 2.0 - 1.0;
      for (int c = 0; c < 3; ++c) {
        dx.at(x, y, c) = vx;
        dy.at(x, y, c) = vy;
      }
    }
  dx = gaussian_blur(dx, 8.0);
  dy = gaussian_blur(dy, 8.0);

  double peak = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      peak = std::max({peak, std::fabs(dx.at(x, y, 0)), std::fabs(dy.at(x, y, 0))});
  double scale = peak > 1e-12 ? 6.0 * s / peak : 0.0;

  FloatImage src = to_float(img), out = src;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) =
            bilinear(src, x - dx.at(x, y, 0) * scale, y - dy.at(x, y, 0) * scale, c);
  return quantize(out);
}

// Additive i.i.d. Gaussian, sigma = 50s. Draws: one normal per sample,
// row-major across channels.
RasterImage op_noise(const RasterImage& img, double s, RngState& rng) {
  double sigma = 50.0 * s;
  RasterImage out = img;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = quantize_u8(img.data[i] + rng.normal() * sigma);
  return out;
}

// Channel-wise offsets up to 6s px in random directions.
// Draws per channel: angle, radius.
RasterImage op_color_diffusion(const RasterImage& img, double s, RngState& rng) {
  double d = 6.0 * s;
  RasterImage out = img;
  for (int c = 0; c < 3; ++c) {
    double theta = rng.u01() * 2.0 * kPi;
    double r = rng.u01() * d;
    int ox = static_cast<int>(round_half_up(r * det_cos(theta)));
    int oy = static_cast<int>(round_half_up(r * det_sin(theta)));
    if (ox == 0 && oy == 0) continue;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(x, y, c) =
            img.at(clampi(x - ox, 0, img.width - 1), clampi(y - oy, 0, img.height - 1), c);
  }
  return out;
}

// --- Postprocessing ------------------------------------------------------

// Coin: unsharp mask with amount 2s (fixed sigma 1.5) or soften with
// sigma = 3s. Draws: coin.
RasterImage op_sharpness_change(const RasterImage& img, double s, RngState& rng) {
  bool sharpen = rng.u01() < 0.5;
  FloatImage src = to_float(img);
  if (sharpen) {
    FloatImage blurred = gaussian_blur(src, 1.5);
    double amount = 2.0 * s;
    for (std::size_t i = 0; i < src.data.size(); ++i)
      src.data[i] += amount * (src.data[i] - blurred.data[i]);
    return quantize(src);
  }
  return quantize(gaussian_blur(src, 3.0 * s));
}

// 1 + round(4s) opaque polyline strokes, width 2..8, saturated colors.
// Draws per stroke: point count, width, hue, then x,y per point.
RasterImage op_graffiti(const RasterImage& img, double s, RngState& rng) {
  int strokes = 1 + static_cast<int>(round_half_up(4.0 * s));
  FloatImage f = to_float(img);

  auto stamp = [&](double cx, double cy, double radius, double r, double g, double b) {
    int x0 = clampi(static_cast<int>(std::floor(cx - radius)), 0, img.width - 1);
    int x1 = clampi(static_cast<int>(std::ceil(cx + radius)), 0, img.width - 1);
    int y0 = clampi(static_cast<int>(std::floor(cy - radius)), 0, img.height - 1);
    int y1 = clampi(static_cast<int>(std::ceil(cy + radius)), 0, img.height - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double ddx = x - cx, ddy = y - cy;
        if (ddx * ddx + ddy * ddy <= radius * radius) {
          f.at(x, y, 0) = r;
          f.at(x, y, 1) = g;
          f.at(x, y, 2) = b;
        }
      }
  };

  for (int i = 0; i < strokes; ++i) {
    int npts = 3 + static_cast<int>(rng.bounded(4));
    int width = 2 + static_cast<int>(rng.bounded(7));
    double hue = rng.u01() * 360.0;
    double r, g, b;
    hsv_to_rgb(hue, 1.0, 1.0, r, g, b);
    r *= 255.0;
    g *= 255.0;
    b *= 255.0;
    double px = 0, py = 0;
    for (int p = 0; p < npts; ++p) {
      double nx = rng.u01() * (img.width - 1);
      double ny = rng.u01() * (img.height - 1);
      if (p > 0) {
        double dist = std::hypot(nx - px, ny - py);
        int steps = std::max(1, static_cast<int>(std::ceil(dist * 2.0)));
        for (int t = 0; t <= steps; ++t) {
          double u = static_cast<double>(t) / steps;
          stamp(px + (nx - px) * u, py + (ny - py) * u, width / 2.0, r, g, b);
        }
      }
      px = nx;
      py = ny;
    }
  }
  return quantize(f);
}

// 5x7 bitmap glyphs, one bit per pixel, rows top to bottom.
constexpr std::uint8_t kGlyphW[7] = {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001};
constexpr std::uint8_t kGlyphM[7] = {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001};

// Tiled semi-transparent glyph pattern ("WM"), opacity 0.5s. No rng.
RasterImage op_watermark_damage(const RasterImage& img, double s, RngState&) {
  constexpr int kScale = 2;
  constexpr int kGlyphWidth = 5 * kScale, kGlyphHeight = 7 * kScale, kGap = 2 * kScale;
  constexpr int kWordW = kGlyphWidth * 2 + kGap;
  constexpr int kStrideX = kWordW + 12, kStrideY = kGlyphHeight + 10;
  double alpha = 0.5 * s;

  auto glyph_bit = [](const std::uint8_t* glyph, int gx, int gy) {
    return (glyph[gy] >> (4 - gx)) & 1;
  };

  FloatImage f = to_float(img);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int ty = y % kStrideY;
      // Stagger alternate tile rows by half a stride.
      int row = y / kStrideY;
      int tx = (x + (row % 2) * (kStrideX / 2)) % kStrideX;
      if (tx >= kWordW || ty >= kGlyphHeight) continue;
      int bit = 0;
      if (tx < kGlyphWidth)
        bit = glyph_bit(kGlyphW, tx / kScale, ty / kScale);
      else if (tx >= kGlyphWidth + kGap)
        bit = glyph_bit(kGlyphM, (tx - kGlyphWidth - kGap) / kScale, ty / kScale);
      if (!bit) continue;
      for (int c = 0; c < 3; ++c)
        f.at(x, y, c) = f.at(x, y, c) * (1.0 - alpha) + 235.0 * alpha;
    }
  return quantize(f);
}

}  // namespace

RasterImage apply_spec(const RasterImage& image, const DegradationSpec& spec, RngState& rng) {
  if (image.width < 8 || image.height < 8)
    throw UnsupportedImageSize("operators need at least 8x8, got " +
                               std::to_string(image.width) + "x" + std::to_string(image.height));
  if (image.data.size() !=
      static_cast<std::size_t>(image.width) * image.height * RasterImage::kChannels)
    throw Error("image data size does not match dimensions");

  // Exact identity at zero intensity; no rng draws happen.
  if (spec.intensity == 0.0) return image;

  double s = spec.intensity;
  switch (spec.type) {
    case DegradationType::LensBlur: return op_lens_blur(image, s, rng);
    case DegradationType::LensFlare: return op_lens_flare(image, s, rng);
    case DegradationType::MotionBlur: return op_motion_blur(image, s, rng);
    case DegradationType::DirtyLens: return op_dirty_lens(image, s, rng);
    case DegradationType::Saturation: return op_saturation(image, s, rng);
    case DegradationType::Compression: return op_compression(image, s, rng);
    case DegradationType::BlockChange: return op_block_change(image, s, rng);
    case DegradationType::Shifting: return op_shifting(image, s, rng);
    case DegradationType::ScanLines: return op_scan_lines(image, s, rng);
    case DegradationType::Darkness: return op_darkness(image, s, rng);
    case DegradationType::AtmosphericTurbulence: return op_atmospheric_turbulence(image, s, rng);
    case DegradationType::Noise: return op_noise(image, s, rng);
    case DegradationType::ColorDiffusion: return op_color_diffusion(image, s, rng);
    case DegradationType::SharpnessChange: return op_sharpness_change(image, s, rng);
    case DegradationType::Graffiti: return op_graffiti(image, s, rng);
    case DegradationType::WatermarkDamage: return op_watermark_damage(image, s, rng);
  }
  throw Error("unknown degradation type");
}

}  // namespace robustlab
