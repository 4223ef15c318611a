#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "attnet/decision.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/oracles.hpp"

namespace attnet {

enum class MergeScore { Max, Mean };

/// Test-time parameters. Defaults are the published operating point.
struct DetectorConfig {
  double l = 30.0;       // step length, warped pixels
  int max_iters = 50;    // feed-forward cap per run
  WarpFrame warp{};      // 227 x 227 input
  double tau = 15.0;     // stop tolerance, warped pixels
  // Initial merge threshold; unset means 0.8 with refinement, 0.6 without.
  std::optional<double> alpha0;
  double alpha1 = 0.5;   // final merge threshold
  double beta = 2.5;     // re-initialisation scale
  bool refine = true;
  MergeScore merge_score = MergeScore::Max;

  double effective_alpha0() const noexcept { return alpha0.value_or(refine ? 0.8 : 0.6); }

  LabelParams label_params() const noexcept { return {tau, warp}; }

  void validate() const {
    if (!(l > 0.0)) throw std::invalid_argument("l must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(tau >= 0.0)) throw std::invalid_argument("tau must be non-negative");
    const double a0 = effective_alpha0();
    if (!(alpha1 > 0.0 && alpha1 <= a0 && a0 <= 1.0))
      throw std::invalid_argument("merge thresholds must satisfy 0 < alpha1 <= alpha0 <= 1");
    if (!(beta >= 1.0)) throw std::invalid_argument("beta must be >= 1");
  }
};

enum class DetectionStatus {
  Detected,
  Rejected,
  MaxIters,
  Degenerate,
  // Mixed stop/reject: neither corner moves, so a deterministic oracle would
  // answer the same way for every remaining iteration.
  Stalled,
};

constexpr std::string_view to_string(DetectionStatus s) noexcept {
  switch (s) {
    case DetectionStatus::Detected: return "detected";
    case DetectionStatus::Rejected: return "rejected";
    case DetectionStatus::MaxIters: return "max-iters";
    case DetectionStatus::Degenerate: return "degenerate";
    case DetectionStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct TraceStep {
  Box window;
  TlDecision tl;
  BrDecision br;
};

struct DetectionOutcome {
  DetectionStatus status = DetectionStatus::Rejected;
  std::optional<Box> box;  // Detected only, clamped to the image
  double score = 0.0;      // Detected only
  int iterations = 0;
  std::vector<TraceStep> trace;
};

struct Detection {
  Box box;
  double score = 0.0;
  // Iterations of the run that produced the box (max over merged members).
  int iterations = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Stop confidence minus the mass on every other decision, summed over both
/// corners.
inline double score(const CornerActivations& y_tl, const CornerActivations& y_br) noexcept {
  auto corner = [](const CornerActivations& y) {
    return y[kStopSlot] - (y[0] + y[1] + y[2] + y[kRejectSlot]);
  };
  return corner(y_tl) + corner(y_br);
}

/// Iterative crop-and-query loop starting from `start`.
///
/// Each step queries the oracle and moves the corners by one quantized step.
/// Both corners rejecting ends the run without a box; both stopping ends it
/// with the current window as the detection. A lone stop or reject holds its
/// corner while the other keeps moving. Windows may overhang the image by
/// the enlarged frame; only the reported box is clamped to the image.
template <DirectionOracle Oracle>
DetectionOutcome detect_from(const Box& start, const Scene& scene, const Oracle& oracle,
                             const DetectorConfig& cfg) {
  auto clamped = clamp(start, enlarged_frame(scene.image));
  if (!clamped) throw std::invalid_argument("detect_from: start window misses the frame");

  DetectionOutcome out;
  Box window = *clamped;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Activations y = oracle.predict(scene, window);
    const CornerLabels d = y.decisions();
    out.trace.push_back({window, d.tl, d.br});
    out.iterations = it;

    if (d.rejected()) {
      out.status = DetectionStatus::Rejected;
      return out;
    }
    if (d.stopped()) {
      out.box = clamp(window, scene.image);
      if (!out.box) {
        out.status = DetectionStatus::Degenerate;
        return out;
      }
      out.status = DetectionStatus::Detected;
      out.score = score(y.tl, y.br);
      return out;
    }

    const TlDecision tl = d.tl == TlDecision::Reject ? TlDecision::Stop : d.tl;
    const BrDecision br = d.br == BrDecision::Reject ? BrDecision::Stop : d.br;
    if (tl == TlDecision::Stop && br == BrDecision::Stop) {
      out.status = DetectionStatus::Stalled;
      return out;
    }
    // Moves only shrink the window, so it stays inside the enlarged frame.
    const auto next = apply_directions(window, tl, br, cfg.l, cfg.warp);
    if (!next) {
      out.status = DetectionStatus::Degenerate;
      return out;
    }
    window = *next;
  }
  out.status = DetectionStatus::MaxIters;
  return out;
}

}  // namespace attnet
