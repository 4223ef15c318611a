// attnet: scene generation, detection, augmentation and evaluation.
//
// Every parameter can come from a flag, from a JSON config file (keys are the
// flag names without dashes) or from the built-in default, in that order of
// precedence. Each run prints its resolved configuration as one JSON line.

#include <attnet/attnet.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <list>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace attnet;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { Real, OptReal, Int, Count, Flag, Text, Reals };

struct Param {
  std::string name;
  Kind kind;
  json def;
  std::string help;
};

// ---- parameter table -------------------------------------------------------

const std::vector<Param> kCommon = {
    {"config", Kind::Text, "", "JSON config file; keys are flag names"},
    {"seed", Kind::Count, 0, "master seed"},
    {"threads", Kind::Count, 0, "worker threads (0 = all cores)"},
};

const std::vector<Param> kLaw = {
    {"n", Kind::Count, 100, "number of scenes"},
    {"width-min", Kind::Int, 500, "image width range"},
    {"width-max", Kind::Int, 500, ""},
    {"height-min", Kind::Int, 500, "image height range"},
    {"height-max", Kind::Int, 500, ""},
    {"instances-min", Kind::Int, 1, "instances per scene"},
    {"instances-max", Kind::Int, 1, ""},
    {"extent-min", Kind::Real, 40.0, "instance side range, pixels"},
    {"extent-max", Kind::Real, 300.0, ""},
    {"instance-aspect-min", Kind::Real, 0.5, "instance height/width range"},
    {"instance-aspect-max", Kind::Real, 2.0, ""},
    {"max-iou", Kind::Real, 0.3, "max pairwise instance IoU"},
    {"distractor-rate", Kind::Real, 0.0, "chance an instance has the distractor class"},
};

const std::vector<Param> kOracle = {
    {"oracle", Kind::Text, "ground-truth", "ground-truth | noisy | grid"},
    {"noise-p", Kind::Real, 0.0, "per-corner corruption probability (noisy)"},
    {"epsilon", Kind::Real, 0.1, "activation softness"},
    {"grid", Kind::Text, "", "grid file (grid oracle)"},
};

const std::vector<Param> kDetector = {
    {"l", Kind::Real, 30.0, "step length, warped pixels"},
    {"max-iters", Kind::Int, 50, "iteration cap per run"},
    {"tau", Kind::Real, 15.0, "stop tolerance, warped pixels"},
    {"alpha0", Kind::OptReal, nullptr, "initial merge IoU (default 0.8, 0.6 with --no-refine)"},
    {"alpha1", Kind::Real, 0.5, "final merge IoU"},
    {"beta", Kind::Real, 2.5, "refinement rescale factor"},
    {"no-refine", Kind::Flag, false, "skip the refinement pass"},
    {"merge-score", Kind::Text, "max", "max | mean"},
    {"warp", Kind::Real, 227.0, "warped frame side and receptive field"},
};

const std::vector<Param> kPyramid = {
    {"scales", Kind::Int, 7, "pyramid scales"},
    {"scale-step", Kind::Real, 2.0, "scale factor between levels"},
    {"aspects", Kind::Reals, json::array({1.0, 1.5, 2.0}), "comma-separated canvas aspects"},
    {"stride", Kind::Real, 32.0, "output-map stride"},
};

const std::vector<Param> kEval = {
    {"ap-mode", Kind::Text, "eleven-point", "eleven-point | all-point"},
};

std::vector<Param> concat(std::initializer_list<const std::vector<Param>*> groups,
                          std::vector<Param> extra = {}) {
  std::vector<Param> out;
  for (const auto* g : groups) out.insert(out.end(), g->begin(), g->end());
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
};

std::vector<Command> commands() {
  return {
      {"gen-scenes", "generate a synthetic scene file",
       concat({&kCommon, &kLaw}, {{"out", Kind::Text, "", "scene file to write"}})},
      {"detect", "run detection over a scene file",
       concat({&kCommon, &kOracle, &kDetector, &kPyramid},
              {{"scenes", Kind::Text, "", "scene file"},
               {"out", Kind::Text, "", "detections file to write"},
               {"trace", Kind::Text, "", "optional file for per-run traces"}})},
      {"augment", "compose labelled training batches",
       concat({&kCommon},
              {{"scenes", Kind::Text, "", "scene file"},
               {"out", Kind::Text, "", "regions file to write"},
               {"batch-size", Kind::Count, 64, "regions per batch, multiple of 32"},
               {"batches", Kind::Count, 1, "number of batches"},
               {"tau", Kind::Real, 15.0, "stop tolerance, warped pixels"},
               {"warp", Kind::Real, 227.0, "warped frame side"}})},
      {"eval", "score a detections file against its scenes",
       concat({&kCommon, &kEval},
              {{"scenes", Kind::Text, "", "scene file"},
               {"detections", Kind::Text, "", "detections file"},
               {"out", Kind::Text, "", "report file to write"},
               {"pr-csv", Kind::Text, "", "optional PR curve CSV"}})},
      {"sweep", "AP as a function of oracle noise",
       concat({&kCommon, &kLaw, &kOracle, &kDetector, &kPyramid, &kEval},
              {{"scenes", Kind::Text, "", "scene file (generated from the law if empty)"},
               {"noise", Kind::Reals, json::array({0.0, 0.1, 0.2, 0.3}), "comma-separated noise_p grid"},
               {"out", Kind::Text, "", "CSV to write"}})},
      {"simulate", "generate, detect and evaluate in one run",
       concat({&kCommon, &kLaw, &kOracle, &kDetector, &kPyramid, &kEval},
              {{"out", Kind::Text, "", "output directory"}})},
      {"record-grid", "replay an oracle over one scene's pyramid into a grid file",
       concat({&kCommon, &kOracle, &kPyramid},
              {{"scenes", Kind::Text, "", "scene file"},
               {"scene-index", Kind::Count, 0, "position of the scene in the file"},
               {"out", Kind::Text, "", "grid file to write"},
               {"tau", Kind::Real, 15.0, "stop tolerance, warped pixels"},
               {"warp", Kind::Real, 227.0, "warped frame side"}})},
  };
}

// ---- value conversion ------------------------------------------------------

double parse_real(const std::string& s, const std::string& name) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw UsageError("--" + name + ": not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& name) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw UsageError("--" + name + ": not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& name) {
  errno = 0;
  char* end = nullptr;
  if (s.empty() || s[0] == '-') throw UsageError("--" + name + ": not a non-negative integer: '" + s + "'");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw UsageError("--" + name + ": not a non-negative integer: '" + s + "'");
  return v;
}

json from_text(const Param& p, const std::string& s) {
  switch (p.kind) {
    case Kind::Real: return parse_real(s, p.name);
    case Kind::OptReal: return s == "none" ? json(nullptr) : json(parse_real(s, p.name));
    case Kind::Int: return parse_int(s, p.name);
    case Kind::Count: return parse_count(s, p.name);
    case Kind::Text: return s;
    case Kind::Flag: return true;
    case Kind::Reals: {
      json arr = json::array();
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_real(item, p.name));
      if (arr.empty()) throw UsageError("--" + p.name + ": empty list");
      return arr;
    }
  }
  throw UsageError("unknown parameter kind");
}

json from_file(const Param& p, const json& v) {
  const std::string where = "config key '" + p.name + "'";
  switch (p.kind) {
    case Kind::Real:
      if (v.is_number()) return v.get<double>();
      break;
    case Kind::OptReal:
      if (v.is_null()) return nullptr;
      if (v.is_number()) return v.get<double>();
      break;
    case Kind::Int:
      if (v.is_number_integer()) return v.get<long long>();
      break;
    case Kind::Count:
      if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))
        return v.get<std::uint64_t>();
      break;
    case Kind::Flag:
      if (v.is_boolean()) return v;
      break;
    case Kind::Text:
      if (v.is_string()) return v;
      break;
    case Kind::Reals:
      if (v.is_string()) return from_text(p, v.get<std::string>());
      if (v.is_array() && !v.empty()) {
        json arr = json::array();
        for (const auto& x : v) {
          if (!x.is_number()) throw UsageError(where + ": list entries must be numbers");
          arr.push_back(x.get<double>());
        }
        return arr;
      }
      break;
  }
  throw UsageError(where + ": wrong type " + v.dump());
}

// ---- resolution ------------------------------------------------------------

struct Bound {
  const Command* cmd = nullptr;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> opts;
};

json resolve(const Bound& b, const std::vector<Command>& all) {
  json file = json::object();
  const auto& cfg = b.text.at("config");
  if (b.opts.at("config")->count() > 0 && !cfg.empty()) {
    file = io::parse(io::read_file(cfg), cfg);
    if (!file.is_object()) throw UsageError(cfg + ": config must be a JSON object");
    for (const auto& [key, _] : file.items()) {
      bool known = false;
      for (const auto& c : all)
        for (const auto& p : c.params) known = known || p.name == key;
      if (!known || key == "config") throw UsageError(cfg + ": unknown config key '" + key + "'");
    }
  }
  json out = json::object();
  out["command"] = b.cmd->name;
  for (const auto& p : b.cmd->params) {
    if (p.name == "config") continue;
    json v = p.def;
    if (file.contains(p.name)) v = from_file(p, file[p.name]);
    if (b.opts.at(p.name)->count() > 0)
      v = p.kind == Kind::Flag ? json(b.flags.at(p.name)) : from_text(p, b.text.at(p.name));
    out[p.name] = std::move(v);
  }
  return out;
}

std::string need_path(const json& c, const char* key) {
  std::string s = c.at(key).get<std::string>();
  if (s.empty()) throw UsageError(std::string("--") + key + " is required");
  return s;
}

unsigned threads_of(const json& c) {
  const auto t = c.at("threads").get<std::uint64_t>();
  return t == 0 ? default_threads() : static_cast<unsigned>(std::min<std::uint64_t>(t, 1024));
}

SceneLaw law_of(const json& c) {
  SceneLaw law;
  auto narrow = [](long long v, const char* name) {
    if (v < 0 || v > 1000000) throw UsageError(std::string("--") + name + " out of range");
    return static_cast<int>(v);
  };
  law.width_min = narrow(c.at("width-min"), "width-min");
  law.width_max = narrow(c.at("width-max"), "width-max");
  law.height_min = narrow(c.at("height-min"), "height-min");
  law.height_max = narrow(c.at("height-max"), "height-max");
  law.instances_min = narrow(c.at("instances-min"), "instances-min");
  law.instances_max = narrow(c.at("instances-max"), "instances-max");
  law.extent_min = c.at("extent-min");
  law.extent_max = c.at("extent-max");
  law.aspect_min = c.at("instance-aspect-min");
  law.aspect_max = c.at("instance-aspect-max");
  law.max_iou = c.at("max-iou");
  law.distractor_rate = c.at("distractor-rate");
  law.validate();
  return law;
}

DetectorConfig detector_of(const json& c) {
  DetectorConfig cfg;
  cfg.l = c.at("l");
  const long long iters = c.at("max-iters");
  if (iters < 1 || iters > 1000000) throw UsageError("--max-iters out of range");
  cfg.max_iters = static_cast<int>(iters);
  cfg.tau = c.at("tau");
  if (!c.at("alpha0").is_null()) cfg.alpha0 = c.at("alpha0").get<double>();
  cfg.alpha1 = c.at("alpha1");
  cfg.beta = c.at("beta");
  cfg.refine = !c.at("no-refine").get<bool>();
  const std::string ms = c.at("merge-score");
  if (ms == "max") cfg.merge_score = MergeScore::Max;
  else if (ms == "mean") cfg.merge_score = MergeScore::Mean;
  else throw UsageError("--merge-score must be max or mean");
  const double warp = c.at("warp");
  if (!(warp >= 1.0)) throw UsageError("--warp must be >= 1");
  cfg.warp = WarpFrame(warp);
  cfg.validate();
  return cfg;
}

PyramidSpec pyramid_of(const json& c) {
  PyramidSpec spec;
  const long long n = c.at("scales");
  if (n < 1 || n > 64) throw UsageError("--scales out of range");
  spec.n_scales = static_cast<int>(n);
  spec.scale_step = c.at("scale-step");
  spec.aspects = c.at("aspects").get<std::vector<double>>();
  spec.stride = c.at("stride");
  spec.window = c.at("warp");
  spec.validate();
  return spec;
}

OracleSpec oracle_of(const json& c) {
  OracleSpec o;
  const std::string kind = c.at("oracle");
  if (kind == "ground-truth") o.kind = OracleKind::GroundTruth;
  else if (kind == "noisy") o.kind = OracleKind::Noisy;
  else if (kind == "grid") o.kind = OracleKind::Grid;
  else throw UsageError("--oracle must be ground-truth, noisy or grid");
  o.noise_p = c.at("noise-p");
  if (!(o.noise_p >= 0.0 && o.noise_p <= 1.0)) throw UsageError("--noise-p must be in [0, 1]");
  o.epsilon = c.at("epsilon");
  check_epsilon(o.epsilon);
  o.grid_path = c.at("grid");
  if (o.kind == OracleKind::Grid && o.grid_path.empty()) throw UsageError("--oracle grid needs --grid");
  o.seed = c.at("seed");
  return o;
}

ApMode ap_mode_of(const json& c) {
  const std::string m = c.at("ap-mode");
  if (m == "eleven-point") return ApMode::ElevenPoint;
  if (m == "all-point") return ApMode::AllPoint;
  throw UsageError("--ap-mode must be eleven-point or all-point");
}

std::string report_text(const BenchmarkReport& r) { return io::report_to_json(r).dump(2) + "\n"; }

// ---- subcommands -----------------------------------------------------------

int cmd_gen_scenes(const json& c) {
  const auto out = need_path(c, "out");
  const auto scenes = generate_scenes(c.at("n").get<std::uint64_t>(), law_of(c), c.at("seed"));
  io::write_scenes(out, scenes);
  std::cout << "wrote " << scenes.size() << " scenes to " << out << "\n";
  return 0;
}

int cmd_detect(const json& c) {
  const auto scenes = io::read_scenes(need_path(c, "scenes"));
  const auto out = need_path(c, "out");
  const std::string trace = c.at("trace");
  const auto cfg = detector_of(c);
  const auto spec = pyramid_of(c);
  const AnyOracle oracle = io::make_oracle(oracle_of(c), cfg.label_params());

  std::vector<io::SceneDetections> dets(scenes.size());
  std::vector<SceneRunLog> logs(trace.empty() ? 0 : scenes.size());
  oracle.visit([&](const auto& o) {
    parallel_for(scenes.size(), threads_of(c), [&](std::size_t k) {
      dets[k].scene_id = scenes[k].id;
      dets[k].detections = detect_scene(scenes[k], o, spec, cfg, logs.empty() ? nullptr : &logs[k]);
    });
  });
  io::write_atomic(out, io::detections_lines(dets));
  if (!trace.empty()) {
    std::vector<json> docs;
    for (std::size_t k = 0; k < logs.size(); ++k)
      for (const auto& run : logs[k].runs) docs.push_back(io::trace_to_json(scenes[k].id, run));
    io::write_atomic(trace, io::json_lines(docs));
  }
  std::size_t n = 0;
  for (const auto& d : dets) n += d.detections.size();
  std::cout << "wrote " << n << " detections for " << scenes.size() << " scenes to " << out << "\n";
  return 0;
}

int cmd_augment(const json& c) {
  const auto scenes = io::read_scenes(need_path(c, "scenes"));
  const auto out = need_path(c, "out");
  const double warp = c.at("warp");
  if (!(warp >= 1.0)) throw UsageError("--warp must be >= 1");
  const LabelParams params{c.at("tau").get<double>(), WarpFrame(warp)};
  const std::uint64_t seed = c.at("seed");
  const auto batches = c.at("batches").get<std::uint64_t>();
  const auto batch_size = c.at("batch-size").get<std::uint64_t>();

  std::vector<std::vector<AugmentedRegion>> all(batches);
  parallel_for(batches, threads_of(c), [&](std::size_t b) {
    all[b] = compose_batch(scenes, batch_size, hash_combine(seed, b), params);
  });
  std::vector<json> docs;
  for (const auto& batch : all)
    for (const auto& r : batch) docs.push_back(io::region_to_json(r));
  io::write_atomic(out, io::json_lines(docs));
  std::cout << "wrote " << docs.size() << " regions to " << out << "\n";
  return 0;
}

int cmd_eval(const json& c) {
  const auto scenes = io::read_scenes(need_path(c, "scenes"));
  const auto flat = io::read_detections(need_path(c, "detections"));
  const auto out = need_path(c, "out");
  const auto report = evaluate(scenes, group_by_scene(scenes, flat), ap_mode_of(c));
  io::write_atomic(out, report_text(report));
  const std::string csv = c.at("pr-csv");
  if (!csv.empty()) io::write_atomic(csv, io::pr_csv(report));
  std::cout << "ap " << json(report.ap).dump() << " over " << report.n_boxes << " boxes\n";
  return 0;
}

int cmd_sweep(const json& c) {
  const auto out = need_path(c, "out");
  const std::string scene_path = c.at("scenes");
  const auto scenes = scene_path.empty()
                          ? generate_scenes(c.at("n").get<std::uint64_t>(), law_of(c), c.at("seed"))
                          : io::read_scenes(scene_path);
  const auto cfg = detector_of(c);
  const auto spec = pyramid_of(c);
  OracleSpec o = oracle_of(c);
  if (o.kind == OracleKind::Grid) throw UsageError("sweep needs a ground-truth or noisy oracle");
  o.kind = OracleKind::Noisy;
  std::string csv = "noise_p,ap\n";
  for (double p : c.at("noise").get<std::vector<double>>()) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--noise entries must be in [0, 1]");
    o.noise_p = p;
    const auto r = run_benchmark(scenes, o, spec, cfg, threads_of(c), ap_mode_of(c));
    csv += json(p).dump() + ',' + json(r.ap).dump() + '\n';
    std::cout << "noise_p " << json(p).dump() << " ap " << json(r.ap).dump() << "\n";
  }
  io::write_atomic(out, csv);
  return 0;
}

int cmd_simulate(const json& c) {
  const fs::path dir = need_path(c, "out");
  fs::create_directories(dir);
  const auto scenes = generate_scenes(c.at("n").get<std::uint64_t>(), law_of(c), c.at("seed"));
  const auto report =
      run_benchmark(scenes, oracle_of(c), pyramid_of(c), detector_of(c), threads_of(c), ap_mode_of(c));
  io::write_scenes(dir / "scenes.jsonl", scenes);
  io::write_atomic(dir / "detections.jsonl", io::detections_lines(report.detections));
  io::write_atomic(dir / "report.json", report_text(report));
  io::write_atomic(dir / "pr.csv", io::pr_csv(report));
  std::cout << "ap " << json(report.ap).dump() << " over " << report.n_boxes << " boxes, "
            << report.n_gt << " ground truths\n";
  return 0;
}

int cmd_record_grid(const json& c) {
  const auto scenes = io::read_scenes(need_path(c, "scenes"));
  const auto out = need_path(c, "out");
  const auto k = c.at("scene-index").get<std::uint64_t>();
  if (k >= scenes.size()) throw UsageError("--scene-index beyond the scene file");
  const OracleSpec o = oracle_of(c);
  if (o.kind == OracleKind::Grid) throw UsageError("record-grid needs a ground-truth or noisy oracle");
  const double warp = c.at("warp");
  if (!(warp >= 1.0)) throw UsageError("--warp must be >= 1");
  const AnyOracle oracle = io::make_oracle(o, LabelParams{c.at("tau").get<double>(), WarpFrame(warp)});
  const auto grid = record_grid(scenes[k], oracle, pyramid_of(c));
  io::write_atomic(out, io::grid_to_json(grid).dump() + "\n");
  std::cout << "wrote " << grid.cells.size() << " cells to " << out << "\n";
  return 0;
}

int dispatch(const json& c) {
  const std::string name = c.at("command");
  if (name == "gen-scenes") return cmd_gen_scenes(c);
  if (name == "detect") return cmd_detect(c);
  if (name == "augment") return cmd_augment(c);
  if (name == "eval") return cmd_eval(c);
  if (name == "sweep") return cmd_sweep(c);
  if (name == "simulate") return cmd_simulate(c);
  if (name == "record-grid") return cmd_record_grid(c);
  throw UsageError("unknown command " + name);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Command> all = commands();
  CLI::App app{"attention-based iterative detection toolkit", "attnet"};
  app.require_subcommand(1);
  std::list<Bound> bound;
  for (const auto& cmd : all) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    Bound& b = bound.emplace_back();
    b.cmd = &cmd;
    for (const auto& p : cmd.params) {
      const std::string help = p.help + (p.def.is_null() || p.def == "" ? "" : " [" + p.def.dump() + "]");
      if (p.kind == Kind::Flag) {
        b.opts[p.name] = sub->add_flag("--" + p.name, b.flags[p.name], help);
      } else {
        b.opts[p.name] = sub->add_option("--" + p.name, b.text[p.name], help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "attnet: error: " << e.what() << "\n";
    return 2;
  }

  try {
    for (const auto& b : bound) {
      if (!app.got_subcommand(b.cmd->name)) continue;
      const json resolved = resolve(b, all);
      std::cout << "config " << resolved.dump() << "\n" << std::flush;
      return dispatch(resolved);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "attnet: error: " << msg << "\n";
    return 1;
  }
  return 1;
}
