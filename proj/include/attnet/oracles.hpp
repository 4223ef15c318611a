#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "attnet/decision.hpp"
#include "attnet/errors.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/random.hpp"

namespace attnet {

/// Non-negative confidence 5-vector for one corner, in decision slot order.
struct CornerActivations {
  std::array<double, kDecisionSlots> values{};

  CornerActivations() = default;
  explicit CornerActivations(const std::array<double, kDecisionSlots>& v) : values(v) {
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw std::invalid_argument("activations must be finite and non-negative");
    }
  }

  // Argmax entry 1 - eps, the other four eps / 4.
  static CornerActivations softened(std::size_t hot, double eps) noexcept {
    CornerActivations a;
    a.values.fill(0.25 * eps);
    a.values[hot] = 1.0 - eps;
    return a;
  }

  double operator[](std::size_t s) const noexcept { return values[s]; }

  // Lowest slot wins exact ties.
  std::size_t argmax() const noexcept {
    std::size_t best = 0;
    for (std::size_t s = 1; s < kDecisionSlots; ++s)
      if (values[s] > values[best]) best = s;
    return best;
  }

  friend bool operator==(const CornerActivations&, const CornerActivations&) = default;
};

struct Activations {
  CornerActivations tl;
  CornerActivations br;

  CornerLabels decisions() const noexcept {
    return {from_slot<TlDecision>(tl.argmax()), from_slot<BrDecision>(br.argmax())};
  }

  friend bool operator==(const Activations&, const Activations&) = default;
};

/// Anything that stands in for the network's forward pass.
template <typename O>
concept DirectionOracle = requires(const O& o, const Scene& s, const Box& w) {
  { o.predict(s, w) } -> std::same_as<Activations>;
};

/// Oracles may also expose decide(), which must equal predict().decisions();
/// one-shot callers such as the proposal scan use it to skip building the
/// activation vectors.
template <typename O>
concept DecidingOracle = DirectionOracle<O> && requires(const O& o, const Scene& s, const Box& w) {
  { o.decide(s, w) } -> std::same_as<CornerLabels>;
};

template <DirectionOracle O>
CornerLabels decide(const O& oracle, const Scene& scene, const Box& window) {
  if constexpr (DecidingOracle<O>) {
    return oracle.decide(scene, window);
  } else {
    return oracle.predict(scene, window).decisions();
  }
}

// Above this softening the hot entry no longer wins the argmax.
inline constexpr double kMaxFaithfulEpsilon = 0.8;

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("epsilon must be in [0, 1)");
}

/// Softened one-hot encoding of the ground-truth labels.
class GroundTruthOracle {
 public:
  explicit GroundTruthOracle(LabelParams params = {}, double epsilon = 0.1)
      : params_(params), epsilon_(epsilon) {
    check_epsilon(epsilon);
  }

  Activations predict(const Scene& scene, const Box& window) const noexcept {
    const CornerLabels labels = label_corners(window, scene, params_);
    return {CornerActivations::softened(slot(labels.tl), epsilon_),
            CornerActivations::softened(slot(labels.br), epsilon_)};
  }

  CornerLabels decide(const Scene& scene, const Box& window) const noexcept {
    if (epsilon_ < kMaxFaithfulEpsilon) return label_corners(window, scene, params_);
    return predict(scene, window).decisions();
  }

  const LabelParams& params() const noexcept { return params_; }
  double epsilon() const noexcept { return epsilon_; }

 private:
  LabelParams params_;
  double epsilon_;
};

/// Ground truth with independent per-corner label substitution.
///
/// With probability noise_p a corner's true decision is replaced by one of
/// the other four, uniformly. The draw is a hash of (seed, scene id, window
/// coordinates, corner), so revisiting a window reproduces the same answer.
class NoisyOracle {
 public:
  NoisyOracle(LabelParams params, double epsilon, double noise_p, std::uint64_t seed)
      : params_(params), epsilon_(epsilon), noise_p_(noise_p), seed_key_(mix64(seed)) {
    check_epsilon(epsilon);
    if (!(noise_p >= 0.0 && noise_p <= 1.0))
      throw std::invalid_argument("noise_p must be in [0, 1]");
    // noise_p is resolved to 2^-30.
    threshold_ = static_cast<std::uint64_t>(std::round(noise_p * 0x1.0p30));
  }

  Activations predict(const Scene& scene, const Box& window) const noexcept {
    const auto [tl, br] = noisy_slots(scene, window);
    return {CornerActivations::softened(tl, epsilon_), CornerActivations::softened(br, epsilon_)};
  }

  CornerLabels decide(const Scene& scene, const Box& window) const noexcept {
    if (!(epsilon_ < kMaxFaithfulEpsilon)) return predict(scene, window).decisions();
    const auto [tl, br] = noisy_slots(scene, window);
    return {from_slot<TlDecision>(tl), from_slot<BrDecision>(br)};
  }

  double noise_p() const noexcept { return noise_p_; }

 private:
  std::pair<std::size_t, std::size_t> noisy_slots(const Scene& scene,
                                                  const Box& window) const noexcept {
    const CornerLabels truth = label_corners(window, scene, params_);
    if (threshold_ == 0) return {slot(truth.tl), slot(truth.br)};
    // Multiply-xor folding with a single finaliser keeps the per-window cost
    // low; the proposal scan hashes about a million windows per scene.
    std::uint64_t key = seed_key_ ^ (scene.id * 0xd6e8feb86659fd93ULL);
    for (double v : {window.x1(), window.y1(), window.x2(), window.y2()}) {
      if (v == 0.0) v = 0.0;
      key = (key ^ std::bit_cast<std::uint64_t>(v)) * 0x9e3779b97f4a7c15ULL;
      key ^= key >> 29;
    }
    const std::uint64_t h = mix64(key);
    // Bits 0-29 / 32-61: flip draws; bits 30-31 / 62-63: substitute choice.
    return {corrupt(slot(truth.tl), h & kDrawMask, (h >> 30) & 3),
            corrupt(slot(truth.br), (h >> 32) & kDrawMask, (h >> 62) & 3)};
  }

  std::size_t corrupt(std::size_t truth, std::uint64_t draw, std::uint64_t pick) const noexcept {
    // Branch-free: flips are unpredictable by construction.
    const std::size_t flipped = (truth + 1 + static_cast<std::size_t>(pick)) % kDecisionSlots;
    const std::size_t mask = std::size_t{0} - static_cast<std::size_t>(draw < threshold_);
    return truth ^ ((truth ^ flipped) & mask);
  }

  static constexpr std::uint64_t kDrawMask = (std::uint64_t{1} << 30) - 1;

  LabelParams params_;
  double epsilon_;
  double noise_p_;
  std::uint64_t seed_key_;
  std::uint64_t threshold_ = 0;
};

struct GridCell {
  double x = 0.0;       // window x1, original frame
  double y = 0.0;       // window y1, original frame
  double scale = 1.0;   // original pixels per warped pixel, horizontally
  double aspect = 1.0;  // window height / width, original frame
  CornerActivations tl;
  CornerActivations br;
};

/// Stored activation maps, e.g. replayed network outputs for one image.
struct GridData {
  ImageSize image;
  double stride = 32.0;
  double window = 227.0;
  std::vector<GridCell> cells;
};

/// Nearest-cell lookup over a stored grid.
///
/// A window is keyed by (x1, y1, width / window, height / width). Distance is
/// measured in grid units: positions in strides of the cell's footprint,
/// scale and aspect in octaves. A query whose nearest cell is more than one
/// unit away on any axis is outside coverage.
class GridOracle {
 public:
  explicit GridOracle(GridData data) : data_(std::make_shared<Data>(std::move(data))) {
    if (!(data_->grid.stride > 0.0) || !(data_->grid.window > 0.0))
      throw std::invalid_argument("grid stride and window must be positive");
    std::map<std::pair<double, double>, std::size_t> index;
    for (const auto& c : data_->grid.cells) {
      if (!(c.scale > 0.0) || !(c.aspect > 0.0))
        throw std::invalid_argument("grid cell scale and aspect must be positive");
      auto [it, inserted] = index.try_emplace({c.scale, c.aspect}, data_->levels.size());
      if (inserted) data_->levels.push_back({c.scale, c.aspect, {}});
      data_->levels[it->second].cells.push_back(&c);
    }
    for (auto& lvl : data_->levels) {
      std::sort(lvl.cells.begin(), lvl.cells.end(),
                [](const GridCell* a, const GridCell* b) { return a->x < b->x; });
    }
  }

  Activations predict(const Scene& scene, const Box& window) const {
    if (scene.image != data_->grid.image) throw GridMiss("grid oracle: image size mismatch");
    const double qs = window.width() / data_->grid.window;
    const double qa = window.height() / window.width();
    const double stride = data_->grid.stride;

    const GridCell* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& lvl : data_->levels) {
      const double es = std::log2(qs / lvl.scale);
      const double ea = std::log2(qa / lvl.aspect);
      const double partial = es * es + ea * ea;
      if (partial >= best_d) continue;
      const double ux = stride * lvl.scale;
      const double uy = ux * lvl.aspect;
      const double reach = std::isinf(best_d) ? best_d : std::sqrt(best_d - partial) * ux;
      auto it = std::lower_bound(lvl.cells.begin(), lvl.cells.end(), window.x1() - reach,
                                 [](const GridCell* c, double x) { return c->x < x; });
      for (; it != lvl.cells.end() && (*it)->x <= window.x1() + reach; ++it) {
        const double ex = (window.x1() - (*it)->x) / ux;
        const double ey = (window.y1() - (*it)->y) / uy;
        const double d = partial + ex * ex + ey * ey;
        if (d < best_d) {
          best_d = d;
          best = *it;
        }
      }
    }
    if (!best || !covers(*best, window, qs, qa)) throw GridMiss("grid oracle: window outside coverage");
    return {best->tl, best->br};
  }

  const GridData& data() const noexcept { return data_->grid; }

 private:
  bool covers(const GridCell& c, const Box& w, double qs, double qa) const noexcept {
    const double ux = data_->grid.stride * c.scale;
    const double uy = ux * c.aspect;
    return std::abs(w.x1() - c.x) <= ux && std::abs(w.y1() - c.y) <= uy &&
           std::abs(std::log2(qs / c.scale)) <= 1.0 && std::abs(std::log2(qa / c.aspect)) <= 1.0;
  }

  struct Level {
    double scale;
    double aspect;
    std::vector<const GridCell*> cells;
  };
  struct Data {
    explicit Data(GridData g) : grid(std::move(g)) {}
    GridData grid;
    std::vector<Level> levels;
  };
  // Shared, read-only after construction; copies of the oracle are cheap.
  std::shared_ptr<Data> data_;
};

enum class OracleKind { GroundTruth, Noisy, Grid };

struct OracleSpec {
  OracleKind kind = OracleKind::GroundTruth;
  double noise_p = 0.0;  // Noisy only
  double epsilon = 0.1;
  std::string grid_path;  // Grid only
  std::uint64_t seed = 0;
};

/// Closed set of the built-in oracles. Hot loops should dispatch once with
/// visit() and run against the concrete type.
class AnyOracle {
 public:
  using Variant = std::variant<GroundTruthOracle, NoisyOracle, GridOracle>;

  template <typename O>
    requires std::constructible_from<Variant, O>
  AnyOracle(O oracle) : impl_(std::move(oracle)) {}

  Activations predict(const Scene& scene, const Box& window) const {
    return std::visit([&](const auto& o) { return o.predict(scene, window); }, impl_);
  }

  CornerLabels decide(const Scene& scene, const Box& window) const {
    return std::visit([&](const auto& o) { return attnet::decide(o, scene, window); }, impl_);
  }

  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), impl_);
  }

 private:
  Variant impl_;
};

static_assert(DirectionOracle<GroundTruthOracle>);
static_assert(DirectionOracle<NoisyOracle>);
static_assert(DirectionOracle<GridOracle>);
static_assert(DirectionOracle<AnyOracle>);
static_assert(DecidingOracle<GroundTruthOracle>);
static_assert(DecidingOracle<NoisyOracle>);

}  // namespace attnet
