#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "attnet/decision.hpp"
#include "attnet/geometry.hpp"

namespace attnet {

struct Instance {
  Box box;
  int class_id = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Scene {
  std::uint64_t id = 0;
  ImageSize image;
  std::vector<Instance> instances;
  int target_class = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Minimum share of the target's own area that must fall inside the window.
inline constexpr double kMinTargetCoverage = 0.5;
// In-window area ratio by which the target must dominate every other instance.
inline constexpr double kTargetDominance = 1.5;

/// Index of the instance a window is committed to, if any.
///
/// The candidate is the target-class instance with the largest in-window area
/// (lowest index on exact ties). It is accepted when at least half of it lies
/// in the window and its in-window area is at least 1.5x that of every other
/// instance, of any class.
inline std::optional<std::size_t> select_target(const Box& window, const Scene& scene) noexcept {
  const auto& inst = scene.instances;
  std::optional<std::size_t> best;
  double best_area = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (inst[i].class_id != scene.target_class) continue;
    const double a = intersection_area(window, inst[i].box);
    if (a > best_area) {
      best_area = a;
      best = i;
    }
  }
  if (!best) return std::nullopt;
  if (best_area < kMinTargetCoverage * inst[*best].box.area()) return std::nullopt;
  for (std::size_t j = 0; j < inst.size(); ++j) {
    if (j == *best) continue;
    if (best_area < kTargetDominance * intersection_area(window, inst[j].box)) return std::nullopt;
  }
  return best;
}

struct LabelParams {
  double tau = 15.0;  // stop tolerance, warped pixels
  WarpFrame warp{};
};

/// Ground-truth direction for each corner of `window`.
///
/// Deficits are the distances a corner would have to move inward to reach
/// the target's corner; negative deficits (the window already truncates the
/// target) clamp to zero because the alphabet has no outward moves.
inline CornerLabels label_corners(const Box& window, const Scene& scene,
                                  const LabelParams& params) noexcept {
  const auto target = select_target(window, scene);
  if (!target) return {};
  const Box& g = scene.instances[*target].box;
  // Warped deficit d / s > tau, compared as d > tau * s.
  const double tx = params.tau * params.warp.scale_x(window);
  const double ty = params.tau * params.warp.scale_y(window);

  const bool tl_x = std::max(0.0, g.x1() - window.x1()) > tx;
  const bool tl_y = std::max(0.0, g.y1() - window.y1()) > ty;
  const bool br_x = std::max(0.0, window.x2() - g.x2()) > tx;
  const bool br_y = std::max(0.0, window.y2() - g.y2()) > ty;

  CornerLabels out;
  out.tl = tl_x ? (tl_y ? TlDecision::RightDown : TlDecision::Right)
                : (tl_y ? TlDecision::Down : TlDecision::Stop);
  out.br = br_x ? (br_y ? BrDecision::LeftUp : BrDecision::Left)
                : (br_y ? BrDecision::Up : BrDecision::Stop);
  return out;
}

inline CornerLabels label_corners(const Box& window, const Scene& scene, double tau,
                                  const WarpFrame& warp) noexcept {
  return label_corners(window, scene, LabelParams{tau, warp});
}

}  // namespace attnet
