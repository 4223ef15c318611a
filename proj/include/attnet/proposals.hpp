#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnet/decision.hpp"
#include "attnet/detector.hpp"
#include "attnet/errors.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/oracles.hpp"

namespace attnet {

struct PyramidSpec {
  int n_scales = 7;
  double scale_step = 2.0;
  std::vector<double> aspects{1.0, 1.5, 2.0};
  double window = 227.0;  // receptive field, canvas pixels
  double stride = 32.0;   // output-map stride, canvas pixels

  void validate() const {
    if (n_scales < 1) throw std::invalid_argument("n_scales must be >= 1");
    if (!(scale_step > 1.0)) throw std::invalid_argument("scale_step must be > 1");
    if (aspects.empty()) throw std::invalid_argument("at least one aspect is required");
    for (double a : aspects)
      if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("aspects must be positive");
    if (!(window >= 1.0)) throw std::invalid_argument("window must be >= 1");
    if (!(stride > 0.0)) throw std::invalid_argument("stride must be positive");
  }
};

struct Canvas {
  ImageSize size;
  double scale = 1.0;   // scale_step^k
  double aspect = 1.0;  // height stretch relative to the aspect-1 canvas
};

/// Resized inputs of the multi-scale, multi-aspect pyramid, scale-major.
///
/// At k = 0 the aspect-1 canvas has its smaller side equal to the window, so
/// the whole frame fits one receptive field; each further scale multiplies
/// both sides by scale_step, and aspect a stretches the height by a.
inline std::vector<Canvas> canvas_sizes(const ImageSize& img, const PyramidSpec& spec) {
  spec.validate();
  std::vector<Canvas> out;
  const double base = spec.window / std::min(img.width, img.height);
  for (int k = 0; k < spec.n_scales; ++k) {
    const double scale = std::pow(spec.scale_step, k);
    for (double a : spec.aspects) {
      const double w = std::round(img.width * base * scale);
      const double h = std::round(img.height * base * scale * a);
      if (w < spec.window || h < spec.window) continue;
      if (w > 1e9 || h > 1e9) throw std::invalid_argument("pyramid canvas too large");
      out.push_back({ImageSize(static_cast<int>(w), static_cast<int>(h)), scale, a});
    }
  }
  return out;
}

inline int grid_count(int side, const PyramidSpec& spec) {
  if (side < spec.window) return 0;
  return static_cast<int>(std::floor((side - spec.window) / spec.stride)) + 1;
}

/// Calls fn(row, col, box) for every receptive field of `canvas`, row-major.
template <typename Fn>
void for_each_grid_window(const ImageSize& canvas, const PyramidSpec& spec, Fn&& fn) {
  const int cols = grid_count(canvas.width, spec);
  const int rows = grid_count(canvas.height, spec);
  if (cols == 0 || rows == 0) {
    throw CanvasTooSmall("canvas " + std::to_string(canvas.width) + "x" +
                         std::to_string(canvas.height) + " is smaller than the window");
  }
  for (int r = 0; r < rows; ++r) {
    const double y = r * spec.stride;
    for (int c = 0; c < cols; ++c) {
      const double x = c * spec.stride;
      fn(r, c, *Box::make(x, y, x + spec.window, y + spec.window));
    }
  }
}

inline std::vector<Box> grid_windows(const ImageSize& canvas, const PyramidSpec& spec) {
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(grid_count(canvas.width, spec)) *
              static_cast<std::size_t>(grid_count(canvas.height, spec)));
  for_each_grid_window(canvas, spec, [&](int, int, const Box& b) { out.push_back(b); });
  return out;
}

/// Calls fn(canvas, box) for every pyramid window mapped back to the
/// original frame, in scale, aspect, row, column order.
///
/// The pyramid is built over the enlarged frame (the image centred on a
/// canvas twice its size).
template <typename Fn>
void for_each_pyramid_window(const ImageSize& img, const PyramidSpec& spec, Fn&& fn) {
  const Box frame = enlarged_frame(img);
  const ImageSize frame_size(2 * img.width, 2 * img.height);
  for (const Canvas& cv : canvas_sizes(frame_size, spec)) {
    const double fx = frame.width() / cv.size.width;
    const double fy = frame.height() / cv.size.height;
    const int cols = grid_count(cv.size.width, spec);
    const int rows = grid_count(cv.size.height, spec);
    for (int r = 0; r < rows; ++r) {
      const double y1 = frame.y1() + r * spec.stride * fy;
      const double y2 = frame.y1() + (r * spec.stride + spec.window) * fy;
      for (int c = 0; c < cols; ++c) {
        const double x1 = frame.x1() + c * spec.stride * fx;
        const double x2 = frame.x1() + (c * spec.stride + spec.window) * fx;
        fn(cv, Box(x1, y1, x2, y2));
      }
    }
  }
}

/// Single-instance region proposals: every pyramid window whose prediction
/// is (right-down, left-up), queried once each.
template <DirectionOracle Oracle>
std::vector<Box> propose(const Scene& scene, const Oracle& oracle, const PyramidSpec& spec,
                         const DetectorConfig& /*cfg*/) {
  std::vector<Box> kept;
  for_each_pyramid_window(scene.image, spec, [&](const Canvas&, const Box& w) {
    const CornerLabels d = decide(oracle, scene, w);
    if (d.tl == TlDecision::RightDown && d.br == BrDecision::LeftUp) kept.push_back(w);
  });
  return kept;
}

/// Replays `oracle` over the full pyramid into a grid document, keyed the
/// way GridOracle looks windows up.
template <DirectionOracle Oracle>
GridData record_grid(const Scene& scene, const Oracle& oracle, const PyramidSpec& spec) {
  GridData g;
  g.image = scene.image;
  g.stride = spec.stride;
  g.window = spec.window;
  // Keys use the canvas's nominal factors so each canvas forms one level.
  const double fw = 2.0 * scene.image.width, fh = 2.0 * scene.image.height;
  for_each_pyramid_window(scene.image, spec, [&](const Canvas& cv, const Box& w) {
    const double fx = fw / cv.size.width, fy = fh / cv.size.height;
    const Activations y = oracle.predict(scene, w);
    g.cells.push_back({w.x1(), w.y1(), fx, fy / fx, y.tl, y.br});
  });
  return g;
}

}  // namespace attnet
