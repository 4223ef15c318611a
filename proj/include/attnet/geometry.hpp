#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>

#include "attnet/decision.hpp"

namespace attnet {

/// Axis-aligned box in continuous original-image coordinates.
///
/// (x1, y1) is the top-left corner and (x2, y2) the bottom-right one. A Box
/// always has positive width and height; use Box::make when degeneracy is an
/// expected outcome rather than a bug.
class Box {
 public:
  // The unit box [0, 0, 1, 1].
  Box() noexcept : x1_(0.0), y1_(0.0), x2_(1.0), y2_(1.0) {}
  Box(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!valid(x1, y1, x2, y2)) {
      throw std::invalid_argument("degenerate or non-finite box [" + std::to_string(x1) + ", " +
                                  std::to_string(y1) + ", " + std::to_string(x2) + ", " +
                                  std::to_string(y2) + "]");
    }
  }

  static std::optional<Box> make(double x1, double y1, double x2, double y2) noexcept {
    if (!valid(x1, y1, x2, y2)) return std::nullopt;
    return Box(x1, y1, x2, y2, Unchecked{});
  }

  static constexpr bool valid(double x1, double y1, double x2, double y2) noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 < x2 && y1 < y2;
  }

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }

  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x1_ + x2_); }
  double center_y() const noexcept { return 0.5 * (y1_ + y2_); }

  bool contains(const Box& o) const noexcept {
    return x1_ <= o.x1_ && y1_ <= o.y1_ && o.x2_ <= x2_ && o.y2_ <= y2_;
  }

  // Lexicographic on (x1, y1, x2, y2).
  friend auto operator<=>(const Box&, const Box&) = default;
  friend bool operator==(const Box&, const Box&) = default;

 private:
  struct Unchecked {};
  Box(double x1, double y1, double x2, double y2, Unchecked) noexcept
      : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {}

  double x1_, y1_, x2_, y2_;
};

struct ImageSize {
  int width = 1;
  int height = 1;

  ImageSize() = default;
  ImageSize(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("image size must be at least 1x1");
  }

  Box bounds() const { return Box(0.0, 0.0, width, height); }

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// The fixed square network input; direction steps and the stop tolerance are
/// measured in this frame.
struct WarpFrame {
  double side = 227.0;

  WarpFrame() = default;
  explicit WarpFrame(double s) : side(s) {
    if (!(s >= 1.0) || !std::isfinite(s)) throw std::invalid_argument("warp side must be >= 1");
  }

  // Original-frame pixels per warped pixel along each axis of `window`.
  double scale_x(const Box& window) const noexcept { return window.width() / side; }
  double scale_y(const Box& window) const noexcept { return window.height() / side; }

  friend bool operator==(const WarpFrame&, const WarpFrame&) = default;
};

inline double intersection_area(const Box& a, const Box& b) noexcept {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline std::optional<Box> intersection(const Box& a, const Box& b) noexcept {
  return Box::make(std::max(a.x1(), b.x1()), std::max(a.y1(), b.y1()), std::min(a.x2(), b.x2()),
                   std::min(a.y2(), b.y2()));
}

inline double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

/// Moves the two corners of `window` by one quantized step.
///
/// The step length `l` is in warped pixels and is back-projected per axis, so
/// a corner moves by l * window_extent / warp.side original pixels. Returns
/// nullopt when the moved corners cross or the move no longer changes the box. Reject is not a movement and must be
/// mapped by the caller.
inline std::optional<Box> apply_directions(const Box& window, TlDecision tl, BrDecision br,
                                           double l, const WarpFrame& warp) {
  if (tl == TlDecision::Reject || br == BrDecision::Reject) {
    throw std::invalid_argument("apply_directions: reject is not a direction");
  }
  const double dx = l * warp.scale_x(window);
  const double dy = l * warp.scale_y(window);

  double x1 = window.x1(), y1 = window.y1(), x2 = window.x2(), y2 = window.y2();
  if (tl == TlDecision::Right || tl == TlDecision::RightDown) x1 += dx;
  if (tl == TlDecision::Down || tl == TlDecision::RightDown) y1 += dy;
  if (br == BrDecision::Left || br == BrDecision::LeftUp) x2 -= dx;
  if (br == BrDecision::Up || br == BrDecision::LeftUp) y2 -= dy;
  const auto out = Box::make(x1, y1, x2, y2);
  // A move too small to change any coordinate in floating point cannot
  // shrink the window; that is as degenerate as crossing.
  const bool moves = tl != TlDecision::Stop || br != BrDecision::Stop;
  if (out && moves && *out == window) return std::nullopt;
  return out;
}

// Intersection with [0, width] x [0, height]; nullopt when nothing remains.
inline std::optional<Box> clamp(const Box& box, const ImageSize& img) noexcept {
  return Box::make(std::max(box.x1(), 0.0), std::max(box.y1(), 0.0),
                   std::min(box.x2(), static_cast<double>(img.width)),
                   std::min(box.y2(), static_cast<double>(img.height)));
}

inline std::optional<Box> clamp(const Box& box, const Box& frame) noexcept {
  return intersection(box, frame);
}

inline Box rescale_about_center(const Box& box, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("rescale factor must be positive");
  const double hw = 0.5 * box.width() * beta;
  const double hh = 0.5 * box.height() * beta;
  const double cx = box.center_x(), cy = box.center_y();
  return Box(cx - hw, cy - hh, cx + hw, cy + hh);
}

/// The queryable frame: the image centred on a canvas twice its size, so a
/// window may overhang each image border by half the image extent.
inline Box enlarged_frame(const ImageSize& img) {
  const double w = img.width, h = img.height;
  return Box(-0.5 * w, -0.5 * h, 1.5 * w, 1.5 * h);
}

}  // namespace attnet
