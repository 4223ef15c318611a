// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <attnet/attnet.hpp>

#include "support/oracles.hpp"

using namespace attnet;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSceneSeed = 7;
constexpr std::uint64_t kOracleSeed = 7;

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CornerActivations vec(double a, double b, double c, double d, double e) {
  return CornerActivations({a, b, c, d, e});
}

// The score evaluated in extended precision and rounded once to double. On the
// inputs below no intermediate is inexact in long double.
double reference_score(const CornerActivations& t, const CornerActivations& b) {
  auto corner = [](const CornerActivations& y) {
    return static_cast<long double>(y[3]) -
           (static_cast<long double>(y[0]) + y[1] + y[2] + y[4]);
  };
  return static_cast<double>(corner(t) + corner(b));
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void ac1() {
  bool ok = true;
  std::string detail;
  const auto stop = vec(0, 0, 0, 1, 0), zero = vec(0, 0, 0, 0, 0), mixed = vec(0.1, 0.1, 0.1, 0.6, 0.1);
  const double s_stop = score(stop, stop), s_zero = score(zero, zero), s_mixed = score(mixed, mixed);
  ok &= s_stop == 2.0 && same_bits(s_stop, reference_score(stop, stop));
  ok &= same_bits(s_zero, 0.0) && same_bits(s_zero, reference_score(zero, zero));
  ok &= same_bits(s_mixed, reference_score(mixed, mixed)) && std::abs(s_mixed - 0.4) < 1e-15;
  detail = fmt("stop=%.17g zero=%.17g mixed=%.17g (exact on stored inputs %.17g)", s_stop, s_zero, s_mixed,
               reference_score(mixed, mixed));
  report("AC1", ok, detail);
}

void ac2() {
  Stopwatch sw;
  PyramidSpec spec;
  const auto w = grid_windows(ImageSize(321, 321), spec);
  bool grid_ok = w.size() == 9;
  for (std::size_t i = 0; grid_ok && i < w.size(); ++i) {
    const double x = 32.0 * (i % 3), y = 32.0 * (i / 3);
    grid_ok = w[i] == Box(x, y, x + 227, y + 227);
  }
  int mismatches = 0;
  for (int side = 227; side <= 1000; ++side)
    mismatches += grid_count(side, spec) != testsupport::enumerate_positions(side, 227, 32);
  // Full 2D check on a spread of canvases.
  for (int a = 227; a <= 1000; a += 37)
    for (int b = 227; b <= 1000; b += 53) {
      const auto g = grid_windows(ImageSize(a, b), spec);
      mismatches += g.size() != static_cast<std::size_t>(testsupport::enumerate_positions(a, 227, 32) *
                                                         testsupport::enumerate_positions(b, 227, 32));
    }
  const double t = sw.seconds();
  report("AC2", grid_ok && mismatches == 0 && t < 1.0,
         fmt("321x321 windows=%zu offsets_ok=%d count_mismatches=%d time=%.3fs (< 1 s)", w.size(), grid_ok,
             mismatches, t));
}

void ac3() {
  const auto scenes = generate_scenes(1000, SceneLaw{}, kSceneSeed);
  Stopwatch sw;
  const GroundTruthOracle oracle;
  const DetectorConfig cfg;
  const PyramidSpec spec;
  int good = 0, unterminated = 0, max_it = 0;
  for (const auto& s : scenes) {
    SceneRunLog log;
    const auto dets = detect_scene(s, oracle, spec, cfg, &log);
    const Box& gt = s.instances.at(0).box;
    good += dets.size() == 1 && iou(dets[0].box, gt) >= 0.8;
    for (const auto& r : log.runs) {
      unterminated += r.outcome.status == DetectionStatus::MaxIters || r.outcome.iterations > 50;
      max_it = std::max(max_it, r.outcome.iterations);
    }
  }
  const double t = sw.seconds(), rate = good / 1000.0;
  report("AC3", rate >= 0.99 && unterminated == 0 && t < 30.0,
         fmt("one_detection_iou>=0.8=%.3f (>= 0.99) unterminated_runs=%d max_iterations=%d time=%.1fs (< 30 s)",
             rate, unterminated, max_it, t));
}

void ac4() {
  SceneLaw law;
  law.instances_min = 0;
  law.instances_max = 4;
  law.distractor_rate = 0.3;
  law.width_min = law.height_min = 200;
  law.width_max = law.height_max = 800;
  const auto scenes = generate_scenes(500, law, 41);
  std::mt19937_64 rng(43);
  long long steps = 0, violations = 0;
  for (int k = 0; k < 10000; ++k) {
    const Scene& s = scenes[static_cast<std::size_t>(k) % scenes.size()];
    const Box frame = enlarged_frame(s.image);
    std::uniform_real_distribution<double> ux(frame.x1(), frame.x2()), uy(frame.y1(), frame.y2());
    double x1 = ux(rng), x2 = ux(rng), y1 = uy(rng), y2 = uy(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const auto start = Box::make(x1, y1, x2 + 1.0, y2 + 1.0);
    if (!start) continue;
    DetectorConfig cfg;
    cfg.l = std::uniform_real_distribution<double>(5.0, 60.0)(rng);
    DetectionOutcome o;
    switch (k % 4) {
      case 0: o = detect_from(*start, s, GroundTruthOracle(), cfg); break;
      case 1: {
        const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        o = detect_from(*start, s, NoisyOracle(LabelParams{}, 0.1, p, rng()), cfg);
        break;
      }
      case 2: o = detect_from(*start, s, testsupport::ChaosOracle{rng()}, cfg); break;
      default: {
        const auto tl = static_cast<TlDecision>(rng() % 3);
        const auto br = static_cast<BrDecision>(rng() % 3);
        o = detect_from(*start, s, testsupport::ConstantOracle{tl, br}, cfg);
      }
    }
    for (std::size_t i = 1; i < o.trace.size(); ++i) {
      const Box& prev = o.trace[i - 1].window;
      const Box& cur = o.trace[i].window;
      ++steps;
      violations += !(prev.contains(cur) && cur.area() < prev.area());
    }
  }
  report("AC4", violations == 0, fmt("traces=10000 steps=%lld violations=%lld", steps, violations));
}

// Rules 1-2 from raw areas, without select_target.
bool satisfies_rules(const Box& w, const Scene& s, std::size_t t) {
  if (t >= s.instances.size() || s.instances[t].class_id != s.target_class) return false;
  const double a = intersection_area(w, s.instances[t].box);
  if (a < 0.5 * s.instances[t].box.area()) return false;
  for (std::size_t j = 0; j < s.instances.size(); ++j)
    if (j != t && a < 1.5 * intersection_area(w, s.instances[j].box)) return false;
  return true;
}

void ac5() {
  const auto pool = generate_scenes(50, SceneLaw{}, 51);
  const auto batch = compose_batch(pool, 64, 53);
  std::map<std::pair<int, int>, int> hist;
  int negatives = 0, relabel_errors = 0;
  for (const auto& r : batch) {
    relabel_errors += label_corners(r.window, pool[r.scene_id], LabelParams{}) != r.labels();
    if (r.labels().rejected())
      ++negatives;
    else
      ++hist[{static_cast<int>(r.tl), static_cast<int>(r.br)}];
  }
  bool combos_ok = hist.size() == 16;
  for (const auto& [c, n] : hist) combos_ok &= n == 2;

  SceneLaw law;
  law.instances_max = 3;
  law.distractor_rate = 0.3;
  const auto scenes = generate_scenes(500, law, 55);
  std::vector<std::size_t> hosts;
  for (std::size_t k = 0; k < scenes.size(); ++k)
    for (const auto& i : scenes[k].instances)
      if (i.class_id == scenes[k].target_class) {
        hosts.push_back(k);
        break;
      }
  const auto combos = positive_combos();
  int sampled = 0, rule_failures = 0, unsatisfiable = 0;
  for (std::uint64_t k = 0; sampled < 10000; ++k) {
    const Scene& s = scenes[hosts[k % hosts.size()]];
    try {
      const auto r = sample_positive(s, combos[k % 16], k);
      ++sampled;
      rule_failures += !r.target_index || !satisfies_rules(r.window, s, *r.target_index);
    } catch (const Unsatisfiable&) {
      ++unsatisfiable;
    }
  }
  report("AC5", batch.size() == 64 && combos_ok && negatives == 32 && relabel_errors == 0 && rule_failures == 0,
         fmt("batch=%zu combos=%zu x2=%d negatives=%d relabel_errors=%d positives=%d rule_failures=%d "
             "(unsatisfiable draws skipped=%d)",
             batch.size(), hist.size(), combos_ok, negatives, relabel_errors, sampled, rule_failures,
             unsatisfiable));
}

// Quick-find union-find over the pairwise matrix, IoU compared exactly in
// integers: inter / union >= num / den.
std::vector<std::vector<std::size_t>> union_find_oracle(const std::vector<Box>& boxes, long long num,
                                                        long long den) {
  const std::size_t n = boxes.size();
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Box& a = boxes[i];
      const Box& b = boxes[j];
      const auto w = std::max(0LL, std::min<long long>(a.x2(), b.x2()) - std::max<long long>(a.x1(), b.x1()));
      const auto h = std::max(0LL, std::min<long long>(a.y2(), b.y2()) - std::max<long long>(a.y1(), b.y1()));
      const long long inter = w * h;
      const long long uni = static_cast<long long>(a.area() + b.area()) - inter;
      if (i == j || den * inter < num * uni) continue;
      const std::size_t from = label[j], to = label[i];
      for (auto& l : label)
        if (l == from) l = to;
    }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[label[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [l, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end());
  return out;
}

void ac6() {
  std::mt19937_64 rng(61);
  const std::pair<long long, long long> thresholds[] = {{1, 10}, {3, 10}, {1, 2}, {3, 5}, {4, 5}};
  int mismatches = 0, nontrivial = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = rng() % 21;
    std::vector<Box> boxes;
    std::vector<Detection> dets;
    // Boxes jittered around a few seeds so chains actually form.
    const Box seeds[] = {testsupport::random_box(rng, 200, 20), testsupport::random_box(rng, 200, 20)};
    std::uniform_int_distribution<int> j(-8, 8);
    while (boxes.size() < n) {
      const Box& b = seeds[rng() % 2];
      const auto c = Box::make(b.x1() + j(rng), b.y1() + j(rng), b.x2() + j(rng), b.y2() + j(rng));
      if (!c) continue;
      boxes.push_back(*c);
      dets.push_back({*c, 0.0, 0});
    }
    const auto [num, den] = thresholds[k % 5];
    auto got = single_linkage(dets, static_cast<double>(num) / static_cast<double>(den));
    std::sort(got.begin(), got.end());
    const auto want = union_find_oracle(boxes, num, den);
    mismatches += got != want;
    nontrivial += want.size() > 1 && want.size() < n;
  }
  report("AC6", mismatches == 0, fmt("sets=200 mismatches=%d mixed_partitions=%d", mismatches, nontrivial));
}

void ac7() {
  const double hand = average_precision({true, false, true}, 2, ApMode::ElevenPoint);
  const double want = (6.0 + 5.0 * (2.0 / 3.0)) / 11.0;
  const bool hand_ok = std::abs(hand - want) <= 1e-9;

  const auto scenes = generate_scenes(1000, SceneLaw{}, kSceneSeed);
  std::vector<io::SceneDetections> perfect;
  for (const auto& s : scenes) {
    io::SceneDetections d{s.id, {}};
    for (const Box& g : ground_truths(s)) d.detections.push_back({g, 1.0, 1});
    perfect.push_back(d);
  }
  const double ap_perfect = evaluate(scenes, perfect).ap;

  Stopwatch sw;
  std::vector<double> ap;
  for (double p : {0.0, 0.1, 0.2, 0.3}) {
    OracleSpec o;
    o.kind = OracleKind::Noisy;
    o.noise_p = p;
    o.seed = kOracleSeed;
    ap.push_back(run_benchmark(scenes, o, PyramidSpec{}, DetectorConfig{}).ap);
  }
  const double t = sw.seconds();
  bool monotone = true;
  for (std::size_t i = 1; i < ap.size(); ++i) monotone &= ap[i] <= ap[i - 1];
  report("AC7", hand_ok && ap_perfect == 1.0 && monotone && ap[0] >= 0.99 && ap[3] < ap[0] && t < 120.0,
         fmt("hand=%.12f (want %.12f) perfect=%.6f sweep=[%.4f %.4f %.4f %.4f] non_increasing=%d "
             "time=%.1fs (< 120 s)",
             hand, want, ap_perfect, ap[0], ap[1], ap[2], ap[3], monotone, t));
}

void ac8() {
  const auto scenes = generate_scenes(1000, SceneLaw{}, kSceneSeed);
  OracleSpec o;
  o.kind = OracleKind::Noisy;
  o.noise_p = 0.15;
  o.seed = kOracleSeed;
  Stopwatch sw;
  DetectorConfig with, without;
  without.refine = false;
  const double a = run_benchmark(scenes, o, PyramidSpec{}, with).mean_best_iou;
  const double b = run_benchmark(scenes, o, PyramidSpec{}, without).mean_best_iou;
  const double t = sw.seconds();
  report("AC8", a >= b && t < 120.0,
         fmt("mean_final_iou refine=%.4f no_refine=%.4f time=%.1fs (< 120 s)", a, b, t));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ac9() {
  const fs::path dir = fs::temp_directory_path() / "attnet_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  int exit_codes = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("'") + ATTNET_CLI_PATH + "' simulate --seed 7 --n 40 --oracle noisy " +
                            "--noise-p 0.1 --out '" + (dir / run).string() + "' >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    exit_codes += !(WIFEXITED(raw) && WEXITSTATUS(raw) == 0);
  }
  int files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    const fs::path other = dir / "b" / e.path().filename();
    differing += !fs::exists(other) || slurp(e.path()) != slurp(other);
  }
  int files_b = 0;
  if (fs::exists(dir / "b"))
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "b")) ++files_b;
  report("AC9", exit_codes == 0 && files == 4 && files_b == 4 && differing == 0,
         fmt("runs_failed=%d files=%d/%d differing=%d", exit_codes, files, files_b, differing));
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)()> all[] = {{"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3},
                                                    {"AC4", ac4}, {"AC5", ac5}, {"AC6", ac6},
                                                    {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}};
  for (const auto& [id, fn] : all) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
