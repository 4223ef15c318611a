#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnet/decision.hpp"
#include "attnet/errors.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/random.hpp"

namespace attnet {

struct AugmentedRegion {
  std::uint64_t scene_id = 0;
  Box window;
  TlDecision tl = TlDecision::Reject;
  BrDecision br = BrDecision::Reject;
  std::optional<std::size_t> target_index;

  CornerLabels labels() const noexcept { return {tl, br}; }

  friend bool operator==(const AugmentedRegion&, const AugmentedRegion&) = default;
};

/// Proposal distribution for training windows.
///
/// Positive windows are drawn in deficit space: each side's warped-frame
/// distance to the target is sampled from the band its requested decision
/// needs (above tau for moving sides, within [-stop_inset, tau] for stopped
/// ones), which yields varying window scales and aspects around the target.
/// Negative windows have a log-uniform extent relative to the image's
/// smaller side and a uniform height/width aspect.
struct SamplingLaw {
  double move_deficit_max = 60.0;  // warped pixels
  double stop_inset = 15.0;        // warped pixels a stopped side may truncate
  double negative_extent_min = 0.1;
  double negative_extent_max = 1.0;
  double aspect_min = 0.5;
  double aspect_max = 2.0;
  int max_attempts = 10000;

  void validate(const LabelParams& p) const {
    if (!(move_deficit_max > p.tau)) throw std::invalid_argument("move_deficit_max must exceed tau");
    if (2.0 * move_deficit_max >= p.warp.side)
      throw std::invalid_argument("move_deficit_max must be below half the warp side");
    if (!(stop_inset >= 0.0)) throw std::invalid_argument("stop_inset must be non-negative");
    if (!(negative_extent_min > 0.0) || negative_extent_max < negative_extent_min)
      throw std::invalid_argument("bad negative extent range");
    if (!(aspect_min > 0.0) || aspect_max < aspect_min)
      throw std::invalid_argument("bad aspect range");
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
  }
};

namespace detail {

// Warped-frame deficit for one side given whether that side must move.
inline double sample_deficit(Rng& rng, bool moves, const LabelParams& p, const SamplingLaw& law) {
  return moves ? rng.uniform(p.tau, law.move_deficit_max) : rng.uniform(-law.stop_inset, p.tau);
}

constexpr bool tl_moves_x(TlDecision d) { return d == TlDecision::Right || d == TlDecision::RightDown; }
constexpr bool tl_moves_y(TlDecision d) { return d == TlDecision::Down || d == TlDecision::RightDown; }
constexpr bool br_moves_x(BrDecision d) { return d == BrDecision::Left || d == BrDecision::LeftUp; }
constexpr bool br_moves_y(BrDecision d) { return d == BrDecision::Up || d == BrDecision::LeftUp; }

}  // namespace detail

/// Rejection-samples a window whose labels equal `combo`.
///
/// Accepted windows are committed to some instance (coverage and dominance
/// rules hold) and lie in the enlarged frame. Throws Unsatisfiable once the
/// attempt budget is spent.
inline AugmentedRegion sample_positive(const Scene& scene, CornerLabels combo, std::uint64_t seed,
                                       const LabelParams& params = {},
                                       const SamplingLaw& law = {}) {
  if (combo.tl == TlDecision::Reject || combo.br == BrDecision::Reject)
    throw std::invalid_argument("sample_positive: combo must not contain reject");
  law.validate(params);
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < scene.instances.size(); ++i)
    if (scene.instances[i].class_id == scene.target_class) targets.push_back(i);
  if (targets.empty()) throw std::invalid_argument("sample_positive: scene has no target instance");

  const Box frame = enlarged_frame(scene.image);
  const double side = params.warp.side;
  Rng rng(seed);
  for (int attempt = 0; attempt < law.max_attempts; ++attempt) {
    const Box& g = scene.instances[targets[rng.index(targets.size())]].box;
    const double dl = detail::sample_deficit(rng, detail::tl_moves_x(combo.tl), params, law);
    const double dt = detail::sample_deficit(rng, detail::tl_moves_y(combo.tl), params, law);
    const double dr = detail::sample_deficit(rng, detail::br_moves_x(combo.br), params, law);
    const double db = detail::sample_deficit(rng, detail::br_moves_y(combo.br), params, law);
    // Window extent W satisfies W = g + (d_near + d_far) * W / side.
    const double w = g.width() / (1.0 - (dl + dr) / side);
    const double h = g.height() / (1.0 - (dt + db) / side);
    const auto window = Box::make(g.x1() - dl * w / side, g.y1() - dt * h / side,
                                  g.x2() + dr * w / side, g.y2() + db * h / side);
    if (!window || !frame.contains(*window)) continue;
    const auto target = select_target(*window, scene);
    if (!target) continue;
    if (label_corners(*window, scene, params) != combo) continue;
    return {scene.id, *window, combo.tl, combo.br, target};
  }
  throw Unsatisfiable("sample_positive: no window with labels (" + std::string(to_string(combo.tl)) +
                      ", " + std::string(to_string(combo.br)) + ") found in scene " +
                      std::to_string(scene.id));
}

/// Rejection-samples a window that is committed to no instance. The window
/// centre lies inside the image and the window inside the enlarged frame.
inline AugmentedRegion sample_negative(const Scene& scene, std::uint64_t seed,
                                       const LabelParams& params = {},
                                       const SamplingLaw& law = {}) {
  law.validate(params);
  const double short_side = std::min(scene.image.width, scene.image.height);
  if (short_side * law.negative_extent_max < 1.0)
    throw std::invalid_argument("sample_negative: image too small to host a window");
  const Box frame = enlarged_frame(scene.image);
  Rng rng(seed);
  for (int attempt = 0; attempt < law.max_attempts; ++attempt) {
    const double w = rng.log_uniform(law.negative_extent_min, law.negative_extent_max) * short_side;
    const double h = w * rng.uniform(law.aspect_min, law.aspect_max);
    const double cx = rng.uniform(0.0, scene.image.width);
    const double cy = rng.uniform(0.0, scene.image.height);
    const auto window = Box::make(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
    if (!window || !frame.contains(*window)) continue;
    if (select_target(*window, scene)) continue;
    return {scene.id, *window, TlDecision::Reject, BrDecision::Reject, std::nullopt};
  }
  throw Unsatisfiable("sample_negative: no negative window found in scene " +
                      std::to_string(scene.id));
}

inline constexpr std::size_t kBatchQuantum = 32;  // 2 x 16 combos

/// Training batch with batch_size / 32 regions per positive combo and
/// batch_size / 2 negatives, shuffled by `seed`.
///
/// Each region draws its scene uniformly from the pool (positives only from
/// scenes holding a target); a scene that cannot host the request is
/// replaced by another draw a bounded number of times.
inline std::vector<AugmentedRegion> compose_batch(std::span<const Scene> pool, std::size_t batch_size,
                                                  std::uint64_t seed, const LabelParams& params = {},
                                                  const SamplingLaw& law = {}) {
  if (batch_size == 0 || batch_size % kBatchQuantum != 0)
    throw IndivisibleBatch("batch size " + std::to_string(batch_size) + " is not a multiple of 32");
  if (pool.empty()) throw std::invalid_argument("compose_batch: empty scene pool");

  std::vector<std::size_t> hosts;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (const auto& inst : pool[i].instances) {
      if (inst.class_id == pool[i].target_class) {
        hosts.push_back(i);
        break;
      }
    }
  }
  if (hosts.empty()) throw Unsatisfiable("compose_batch: no scene in the pool holds a target");

  constexpr int kSceneRetries = 8;
  const std::size_t per_combo = batch_size / kBatchQuantum;
  std::vector<AugmentedRegion> batch;
  batch.reserve(batch_size);
  Rng pick(hash_combine(seed, 0x5ce7e));
  std::uint64_t slot = 0;

  auto with_retries = [&](auto&& draw) {
    for (int r = 0;; ++r) {
      try {
        return draw(hash_combine(seed, slot++));
      } catch (const Unsatisfiable&) {
        if (r + 1 >= kSceneRetries) throw;
      }
    }
  };

  for (const CornerLabels combo : positive_combos()) {
    for (std::size_t k = 0; k < per_combo; ++k) {
      batch.push_back(with_retries([&](std::uint64_t s) {
        return sample_positive(pool[hosts[pick.index(hosts.size())]], combo, s, params, law);
      }));
    }
  }
  for (std::size_t k = 0; k < batch_size / 2; ++k) {
    batch.push_back(with_retries([&](std::uint64_t s) {
      return sample_negative(pool[pick.index(pool.size())], s, params, law);
    }));
  }
  pick.shuffle(batch);
  return batch;
}

}  // namespace attnet
