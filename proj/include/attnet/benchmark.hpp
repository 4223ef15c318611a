#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "attnet/detector.hpp"
#include "attnet/eval.hpp"
#include "attnet/io.hpp"
#include "attnet/labeling.hpp"
#include "attnet/merge_refine.hpp"
#include "attnet/oracles.hpp"
#include "attnet/parallel.hpp"
#include "attnet/proposals.hpp"

namespace attnet {

struct IterationStats {
  double mean = 0.0;
  int max = 0;
};

struct BenchmarkReport {
  double ap = 0.0;
  ApMode mode = ApMode::ElevenPoint;
  std::size_t n_boxes = 0;
  std::size_t n_gt = 0;
  std::size_t n_scenes = 0;
  std::vector<PrPoint> pr;
  IterationStats iters;
  double mean_best_iou = 0.0;
  std::vector<io::SceneDetections> detections;  // parallel to the scene list
};

inline std::vector<Box> ground_truths(const Scene& s) {
  std::vector<Box> out;
  for (const auto& i : s.instances)
    if (i.class_id == s.target_class) out.push_back(i.box);
  return out;
}

/// Mean over all ground truths of the best IoU any detection of the same
/// scene reaches (0 for a missed ground truth). Zero when there are none.
inline double mean_best_iou(std::span<const Scene> scenes,
                            std::span<const io::SceneDetections> dets) {
  if (scenes.size() != dets.size()) throw std::invalid_argument("mean_best_iou: size mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    for (const Box& g : ground_truths(scenes[k])) {
      double best = 0.0;
      for (const auto& d : dets[k].detections) best = std::max(best, iou(d.box, g));
      sum += best;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Pools detections over all scenes and scores them against each scene's
/// target-class instances at IoU `iou_thresh`. `dets[k]` belongs to
/// `scenes[k]`. Pooled rank: score descending, then scene order, then box.
inline BenchmarkReport evaluate(std::span<const Scene> scenes, std::vector<io::SceneDetections> dets,
                                ApMode mode = ApMode::ElevenPoint, double iou_thresh = 0.5) {
  if (scenes.size() != dets.size()) throw std::invalid_argument("evaluate: size mismatch");
  struct Ranked {
    double score;
    std::size_t scene;
    Box box;
    bool tp;
  };
  std::vector<Ranked> pooled;
  BenchmarkReport r;
  r.mode = mode;
  r.n_scenes = scenes.size();
  long long iter_sum = 0;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const auto gts = ground_truths(scenes[k]);
    r.n_gt += gts.size();
    const auto& sd = dets[k].detections;
    for (const auto& m : match(sd, gts, iou_thresh)) {
      pooled.push_back({sd[m.index].score, k, sd[m.index].box, m.tp});
      iter_sum += sd[m.index].iterations;
      r.iters.max = std::max(r.iters.max, sd[m.index].iterations);
    }
  }
  std::stable_sort(pooled.begin(), pooled.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene != b.scene) return a.scene < b.scene;
    return a.box < b.box;
  });
  std::vector<bool> flags;
  flags.reserve(pooled.size());
  for (const auto& p : pooled) flags.push_back(p.tp);

  r.n_boxes = pooled.size();
  r.ap = average_precision(flags, r.n_gt, mode);
  r.pr = pr_curve(flags, r.n_gt);
  r.iters.mean = pooled.empty() ? 0.0 : static_cast<double>(iter_sum) / static_cast<double>(pooled.size());
  r.mean_best_iou = mean_best_iou(scenes, dets);
  r.detections = std::move(dets);
  return r;
}

/// Groups (scene_id, detection) pairs under the scenes they name, keeping
/// file order within a scene. Unknown scene ids are a FormatError.
inline std::vector<io::SceneDetections> group_by_scene(
    std::span<const Scene> scenes, const std::vector<std::pair<std::uint64_t, Detection>>& flat) {
  std::vector<io::SceneDetections> out(scenes.size());
  std::vector<std::pair<std::uint64_t, std::size_t>> index;
  index.reserve(scenes.size());
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    out[k].scene_id = scenes[k].id;
    index.emplace_back(scenes[k].id, k);
  }
  std::sort(index.begin(), index.end());
  for (std::size_t k = 1; k < index.size(); ++k)
    if (index[k].first == index[k - 1].first)
      throw FormatError("duplicate scene id " + std::to_string(index[k].first));
  for (const auto& [id, det] : flat) {
    auto it = std::lower_bound(index.begin(), index.end(), std::make_pair(id, std::size_t{0}));
    if (it == index.end() || it->first != id)
      throw FormatError("detection refers to unknown scene id " + std::to_string(id));
    out[it->second].detections.push_back(det);
  }
  return out;
}

/// detect_scene on every scene, then evaluate. Scenes run in parallel; the
/// result does not depend on `threads`.
template <DirectionOracle Oracle>
BenchmarkReport run_benchmark(std::span<const Scene> scenes, const Oracle& oracle,
                              const PyramidSpec& spec, const DetectorConfig& cfg,
                              unsigned threads = default_threads(),
                              ApMode mode = ApMode::ElevenPoint) {
  spec.validate();
  cfg.validate();
  std::vector<io::SceneDetections> dets(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t k) {
    dets[k].scene_id = scenes[k].id;
    dets[k].detections = detect_scene(scenes[k], oracle, spec, cfg);
  });
  return evaluate(scenes, std::move(dets), mode);
}

inline BenchmarkReport run_benchmark(std::span<const Scene> scenes, const OracleSpec& oracle,
                                     const PyramidSpec& spec, const DetectorConfig& cfg,
                                     unsigned threads = default_threads(),
                                     ApMode mode = ApMode::ElevenPoint) {
  const AnyOracle o = io::make_oracle(oracle, cfg.label_params());
  return o.visit([&](const auto& concrete) {
    return run_benchmark(scenes, concrete, spec, cfg, threads, mode);
  });
}

namespace io {

inline json report_to_json(const BenchmarkReport& r) {
  json pr = json::array();
  for (const auto& p : r.pr) pr.push_back({{"recall", p.recall}, {"precision", p.precision}});
  return {{"ap", r.ap},
          {"ap_mode", r.mode == ApMode::ElevenPoint ? "eleven_point" : "all_point"},
          {"n_boxes", r.n_boxes},
          {"n_gt", r.n_gt},
          {"n_scenes", r.n_scenes},
          {"mean_best_iou", r.mean_best_iou},
          {"iters", {{"mean", r.iters.mean}, {"max", r.iters.max}}},
          {"pr", std::move(pr)}};
}

inline std::string pr_csv(const BenchmarkReport& r) {
  std::string out = "rank,recall,precision\n";
  for (std::size_t k = 0; k < r.pr.size(); ++k) {
    out += std::to_string(k + 1) + ',' + json(r.pr[k].recall).dump() + ',' +
           json(r.pr[k].precision).dump() + '\n';
  }
  return out;
}

}  // namespace io

}  // namespace attnet
