#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepagent/errors.hpp"
#include "deepagent/vision/frame.hpp"

namespace deepagent::vision {

namespace {

// Bilinear read at a real-valued position; coordinates outside the frame are
// clamped, which replicates the border.
double sample(const Frame& f, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(f.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(f.height - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
  const double wx = x - x0, wy = y - y0;
  const double top = f.at(x0, y0, c) * (1.0 - wx) + f.at(x1, y0, c) * wx;
  const double bottom = f.at(x0, y1, c) * (1.0 - wx) + f.at(x1, y1, c) * wx;
  return top * (1.0 - wy) + bottom * wy;
}

// Fills each output pixel from the source position given by inverse(x, y).
template <typename Inverse>
Frame remap(const Frame& f, Inverse inverse) {
  Frame out(f.width, f.height, f.channels);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const auto [sx, sy] = inverse(static_cast<double>(x), static_cast<double>(y));
      for (int c = 0; c < f.channels; ++c) out.at(x, y, c) = sample(f, sx, sy, c);
    }
  return out;
}

}  // namespace

void AugmentPolicy::validate() const {
  if (rotation_deg < 0.0 || rotation_deg > 10.0) throw ConfigError("rotation_deg must lie in [0, 10]");
  if (shift_frac < 0.0 || shift_frac > 0.1) throw ConfigError("shift_frac must lie in [0, 0.1]");
  if (zoom_frac < 0.0 || zoom_frac > 0.1) throw ConfigError("zoom_frac must lie in [0, 0.1]");
  if (brightness_min < 0.9 || brightness_max > 1.1 || brightness_min > brightness_max)
    throw ConfigError("brightness range must lie within [0.9, 1.1]");
}

Frame augment(const Frame& f, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  // Every draw happens regardless of its value so the stream stays aligned.
  const double angle = rng.uniform(-policy.rotation_deg, policy.rotation_deg) * std::numbers::pi / 180.0;
  const double tx = rng.uniform(-policy.shift_frac, policy.shift_frac) * f.width;
  const double ty = rng.uniform(-policy.shift_frac, policy.shift_frac) * f.height;
  const double zoom = rng.uniform(1.0 - policy.zoom_frac, 1.0 + policy.zoom_frac);
  const double gain = rng.uniform(policy.brightness_min, policy.brightness_max);
  const bool flip = rng.bernoulli(0.5) && policy.horizontal_flip;

  const double cx = (f.width - 1) / 2.0, cy = (f.height - 1) / 2.0;
  Frame out = f;
  if (angle != 0.0) {
    const double cs = std::cos(angle), sn = std::sin(angle);
    out = remap(out, [&](double x, double y) {
      const double dx = x - cx, dy = y - cy;
      return std::pair{cs * dx + sn * dy + cx, -sn * dx + cs * dy + cy};
    });
  }
  if (tx != 0.0 || ty != 0.0) out = remap(out, [&](double x, double y) { return std::pair{x - tx, y - ty}; });
  if (zoom != 1.0)
    out = remap(out, [&](double x, double y) { return std::pair{(x - cx) / zoom + cx, (y - cy) / zoom + cy}; });
  if (gain != 1.0) out.pixels = (out.pixels * gain).min(1.0).max(0.0);
  if (flip) {
    Frame mirrored(out.width, out.height, out.channels);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        for (int c = 0; c < out.channels; ++c) mirrored.at(x, y, c) = out.at(out.width - 1 - x, y, c);
    out = std::move(mirrored);
  }
  return out;
}

}  // namespace deepagent::vision
