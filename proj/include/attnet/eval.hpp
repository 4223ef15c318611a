#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "attnet/detector.hpp"
#include "attnet/errors.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/merge_refine.hpp"
#include "attnet/random.hpp"

namespace attnet {

struct RankedMatch {
  std::size_t index;  // position in the input detection list
  bool tp;
};

/// Greedy matching in rank order (score descending, box ascending on ties).
///
/// A detection is a true positive when the unmatched ground truth it
/// overlaps most (lowest index on ties) reaches `iou_thresh`; that ground
/// truth is then consumed. Returned in rank order.
inline std::vector<RankedMatch> match(std::span<const Detection> dets, std::span<const Box> gts,
                                      double iou_thresh = 0.5) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });

  std::vector<bool> used(gts.size(), false);
  std::vector<RankedMatch> out;
  out.reserve(dets.size());
  for (std::size_t i : order) {
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double o = iou(dets[i].box, gts[g]);
      if (o > best) {
        best = o;
        best_g = g;
      }
    }
    const bool tp = best_g < gts.size() && best >= iou_thresh;
    if (tp) used[best_g] = true;
    out.push_back({i, tp});
  }
  return out;
}

struct PrPoint {
  double recall;
  double precision;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

// One point per ranked detection. Empty when n_gt is zero.
inline std::vector<PrPoint> pr_curve(const std::vector<bool>& flags, std::size_t n_gt) {
  std::vector<PrPoint> out;
  if (n_gt == 0) return out;
  out.reserve(flags.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k]) ++tp;
    out.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                   static_cast<double>(tp) / static_cast<double>(k + 1)});
  }
  return out;
}

enum class ApMode { ElevenPoint, AllPoint };

/// Average precision of rank-ordered TP/FP flags.
///
/// ElevenPoint averages the best precision at recall >= 0, 0.1, ..., 1
/// (VOC 2007). AllPoint integrates the monotone precision envelope.
inline double average_precision(const std::vector<bool>& flags, std::size_t n_gt,
                                ApMode mode = ApMode::ElevenPoint) {
  if (n_gt == 0) return 0.0;
  const auto pr = pr_curve(flags, n_gt);
  if (mode == ApMode::ElevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0.0;
      for (const auto& pt : pr)
        if (pt.recall >= t) p = std::max(p, pt.precision);
      sum += p;
    }
    return sum / 11.0;
  }
  std::vector<double> rec{0.0}, prec{0.0};
  for (const auto& pt : pr) {
    rec.push_back(pt.recall);
    prec.push_back(pt.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

/// Parameters of the synthetic scene distribution.
struct SceneLaw {
  int width_min = 500, width_max = 500;
  int height_min = 500, height_max = 500;
  int instances_min = 1, instances_max = 1;
  double extent_min = 40.0, extent_max = 300.0;  // per instance side, pixels
  double aspect_min = 0.5, aspect_max = 2.0;     // instance height / width
  double max_iou = 0.3;                          // between any two instances
  double distractor_rate = 0.0;                  // chance an instance is non-target
  int target_class = 1;
  int distractor_class = 2;
  int max_attempts = 1000;                       // per instance

  void validate() const {
    if (width_min < 1 || width_max < width_min || height_min < 1 || height_max < height_min)
      throw std::invalid_argument("scene law: bad image size range");
    if (instances_min < 0 || instances_max < instances_min)
      throw std::invalid_argument("scene law: bad instance count range");
    if (!(extent_min >= 1.0) || extent_max < extent_min)
      throw std::invalid_argument("scene law: bad extent range");
    if (!(aspect_min > 0.0) || aspect_max < aspect_min)
      throw std::invalid_argument("scene law: bad aspect range");
    if (!(max_iou >= 0.0 && max_iou <= 1.0))
      throw std::invalid_argument("scene law: max_iou must be in [0, 1]");
    if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0))
      throw std::invalid_argument("scene law: distractor_rate must be in [0, 1]");
    if (target_class == distractor_class)
      throw std::invalid_argument("scene law: distractor class equals target class");
    if (max_attempts < 1) throw std::invalid_argument("scene law: max_attempts must be >= 1");
  }
};

/// Deterministic synthetic scenes. Scene i depends only on (law, seed, i) and
/// carries id i. Instance boxes have integer corners.
inline std::vector<Scene> generate_scenes(std::size_t n, const SceneLaw& law, std::uint64_t seed) {
  law.validate();
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(hash_combine(seed, i));
    Scene s;
    s.id = i;
    s.target_class = law.target_class;
    s.image = ImageSize(static_cast<int>(rng.integer(law.width_min, law.width_max)),
                        static_cast<int>(rng.integer(law.height_min, law.height_max)));
    const auto count = rng.integer(law.instances_min, law.instances_max);
    for (long long k = 0; k < count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < law.max_attempts && !placed; ++attempt) {
        const double w = std::round(rng.log_uniform(law.extent_min, law.extent_max));
        const double h = std::round(w * rng.uniform(law.aspect_min, law.aspect_max));
        if (w < law.extent_min || h < law.extent_min || w > law.extent_max || h > law.extent_max ||
            w > s.image.width || h > s.image.height)
          continue;
        const double x = static_cast<double>(rng.integer(0, s.image.width - static_cast<long long>(w)));
        const double y = static_cast<double>(rng.integer(0, s.image.height - static_cast<long long>(h)));
        const Box b(x, y, x + w, y + h);
        const bool overlaps = std::any_of(s.instances.begin(), s.instances.end(),
                                          [&](const Instance& o) { return iou(o.box, b) > law.max_iou; });
        if (overlaps) continue;
        const bool distractor = rng.uniform() < law.distractor_rate;
        s.instances.push_back({b, distractor ? law.distractor_class : law.target_class});
        placed = true;
      }
      if (!placed) {
        throw LawUnsatisfiable("scene law: could not place instance " + std::to_string(k) +
                               " of scene " + std::to_string(i));
      }
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace attnet
