#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "attnet/detector.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/oracles.hpp"
#include "attnet/proposals.hpp"

namespace attnet {

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  // The smaller root survives, so every root is its set's minimum index.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

using Cluster = std::vector<std::size_t>;

/// Connected components of the graph linking detections with IoU >= t.
/// Clusters are ordered by their smallest member; members ascend.
inline std::vector<Cluster> single_linkage(std::span<const Detection> dets, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("single_linkage threshold must be positive");
  detail::DisjointSets sets(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = i + 1; j < dets.size(); ++j)
      if (iou(dets[i].box, dets[j].box) >= t) sets.unite(i, j);

  std::vector<Cluster> clusters;
  std::vector<std::size_t> slot_of(dets.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::size_t root = sets.find(i);
    if (slot_of[root] == static_cast<std::size_t>(-1)) {
      slot_of[root] = clusters.size();
      clusters.emplace_back();
    }
    clusters[slot_of[root]].push_back(i);
  }
  return clusters;
}

/// Coordinate mean of the members; score is the member maximum (or mean).
inline Detection merge_cluster(std::span<const Detection> members,
                               MergeScore mode = MergeScore::Max) {
  if (members.empty()) throw std::invalid_argument("merge_cluster: empty cluster");
  if (members.size() == 1) return members.front();
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0, sum = 0;
  double best = members.front().score;
  int iters = 0;
  for (const auto& d : members) {
    x1 += d.box.x1();
    y1 += d.box.y1();
    x2 += d.box.x2();
    y2 += d.box.y2();
    sum += d.score;
    best = std::max(best, d.score);
    iters = std::max(iters, d.iterations);
  }
  const double n = static_cast<double>(members.size());
  return {Box(x1 / n, y1 / n, x2 / n, y2 / n), mode == MergeScore::Max ? best : sum / n, iters};
}

inline std::vector<Detection> merge(std::span<const Detection> dets, double t,
                                    MergeScore mode = MergeScore::Max) {
  std::vector<Detection> out;
  std::vector<Detection> members;
  for (const auto& cluster : single_linkage(dets, t)) {
    members.clear();
    for (std::size_t i : cluster) members.push_back(dets[i]);
    out.push_back(merge_cluster(members, mode));
  }
  return out;
}

// Descending score, then ascending box.
inline bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.box < b.box;
}

inline void sort_detections(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(), ranks_before);
}

enum class RunStage { Initial, Refine };

/// Every detect_from run made while processing one scene.
struct SceneRunLog {
  struct Run {
    RunStage stage;
    Box start;
    DetectionOutcome outcome;
  };
  std::vector<Run> runs;
};

/// Full multi-instance pipeline for one scene.
///
///   1. single-instance proposals over the pyramid
///   2. iterative detection from each proposal
///   3. single-linkage merge at alpha0
///   4. (refine) re-initialise each merged box at beta times its size and
///      detect again; runs that do not end in a detection are dropped
///   5. (refine) merge the re-detections at alpha1
template <DirectionOracle Oracle>
std::vector<Detection> detect_scene(const Scene& scene, const Oracle& oracle,
                                    const PyramidSpec& spec, const DetectorConfig& cfg,
                                    SceneRunLog* log = nullptr) {
  cfg.validate();
  const Box frame = enlarged_frame(scene.image);

  auto run_all = [&](const std::vector<Box>& starts, RunStage stage) {
    std::vector<Detection> found;
    for (const Box& s : starts) {
      DetectionOutcome o = detect_from(s, scene, oracle, cfg);
      if (o.status == DetectionStatus::Detected) found.push_back({*o.box, o.score, o.iterations});
      if (log) log->runs.push_back({stage, s, std::move(o)});
    }
    return found;
  };

  const std::vector<Box> proposals = propose(scene, oracle, spec, cfg);
  std::vector<Detection> dets =
      merge(run_all(proposals, RunStage::Initial), cfg.effective_alpha0(), cfg.merge_score);

  if (cfg.refine) {
    std::vector<Box> starts;
    starts.reserve(dets.size());
    for (const auto& d : dets) {
      if (auto s = clamp(rescale_about_center(d.box, cfg.beta), frame)) starts.push_back(*s);
    }
    dets = merge(run_all(starts, RunStage::Refine), cfg.alpha1, cfg.merge_score);
  }
  sort_detections(dets);
  return dets;
}

}  // namespace attnet
