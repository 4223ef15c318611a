#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnet/augmentation.hpp"
#include "attnet/decision.hpp"
#include "attnet/detector.hpp"
#include "attnet/errors.hpp"
#include "attnet/geometry.hpp"
#include "attnet/labeling.hpp"
#include "attnet/merge_refine.hpp"
#include "attnet/oracles.hpp"

// JSON documents exchanged by the CLI:
//   scene       {id, image: {w, h}, target_class, instances: [{class, box}]}
//   detection   {scene_id, box, score, iterations}           (one per line)
//   region      {scene_id, window, tl, br, target_index}     (one per line)
//   grid        {image: {w, h}, stride, window,
//                cells: [{x, y, scale, aspect, tl: [5], br: [5]}]}
// Boxes are [x1, y1, x2, y2].

namespace attnet::io {

using json = nlohmann::json;

namespace detail {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json box_to_json(const Box& b) { return json::array({b.x1(), b.y1(), b.x2(), b.y2()}); }

inline Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw FormatError("box must be an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw FormatError("box must be an array of 4 numbers");
  auto b = Box::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  if (!b) throw FormatError("degenerate box " + j.dump());
  return *b;
}

inline json image_to_json(const ImageSize& s) { return {{"w", s.width}, {"h", s.height}}; }

inline ImageSize image_from_json(const json& j) {
  const int w = detail::get<int>(j, "w");
  const int h = detail::get<int>(j, "h");
  if (w < 1 || h < 1) throw FormatError("image size must be at least 1x1");
  return ImageSize(w, h);
}

inline json scene_to_json(const Scene& s) {
  json inst = json::array();
  for (const auto& i : s.instances) inst.push_back({{"class", i.class_id}, {"box", box_to_json(i.box)}});
  return {{"id", s.id}, {"image", image_to_json(s.image)}, {"target_class", s.target_class},
          {"instances", std::move(inst)}};
}

inline Scene scene_from_json(const json& j) {
  Scene s;
  s.id = detail::get<std::uint64_t>(j, "id");
  s.image = image_from_json(detail::get<json>(j, "image"));
  s.target_class = detail::get<int>(j, "target_class");
  const json inst = detail::get<json>(j, "instances");
  if (!inst.is_array()) throw FormatError("instances must be an array");
  for (const auto& i : inst) {
    Instance in{box_from_json(detail::get<json>(i, "box")), detail::get<int>(i, "class")};
    if (!clamp(in.box, s.image)) {
      throw FormatError("scene " + std::to_string(s.id) + ": instance outside the image");
    }
    s.instances.push_back(in);
  }
  return s;
}

inline json detection_to_json(std::uint64_t scene_id, const Detection& d) {
  return {{"scene_id", scene_id}, {"box", box_to_json(d.box)}, {"score", d.score},
          {"iterations", d.iterations}};
}

inline json region_to_json(const AugmentedRegion& r) {
  return {{"scene_id", r.scene_id},
          {"window", box_to_json(r.window)},
          {"tl", std::string(to_string(r.tl))},
          {"br", std::string(to_string(r.br))},
          {"target_index", r.target_index ? json(*r.target_index) : json(nullptr)}};
}

inline AugmentedRegion region_from_json(const json& j) {
  AugmentedRegion r;
  r.scene_id = detail::get<std::uint64_t>(j, "scene_id");
  r.window = box_from_json(detail::get<json>(j, "window"));
  const auto tl = parse_decision<TlDecision>(detail::get<std::string>(j, "tl"));
  const auto br = parse_decision<BrDecision>(detail::get<std::string>(j, "br"));
  if (!tl || !br) throw FormatError("unknown corner decision in region");
  r.tl = *tl;
  r.br = *br;
  if (j.contains("target_index") && !j["target_index"].is_null())
    r.target_index = detail::get<std::size_t>(j, "target_index");
  return r;
}

inline json activations_to_json(const CornerActivations& a) {
  return json::array({a[0], a[1], a[2], a[3], a[4]});
}

inline CornerActivations activations_from_json(const json& j) {
  if (!j.is_array() || j.size() != kDecisionSlots) throw FormatError("activations must have 5 entries");
  std::array<double, kDecisionSlots> v{};
  for (std::size_t i = 0; i < kDecisionSlots; ++i) {
    if (!j[i].is_number()) throw FormatError("activations must be numbers");
    v[i] = j[i].get<double>();
  }
  try {
    return CornerActivations(v);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

inline json grid_to_json(const GridData& g) {
  json cells = json::array();
  for (const auto& c : g.cells) {
    cells.push_back({{"x", c.x}, {"y", c.y}, {"scale", c.scale}, {"aspect", c.aspect},
                     {"tl", activations_to_json(c.tl)}, {"br", activations_to_json(c.br)}});
  }
  return {{"image", image_to_json(g.image)}, {"stride", g.stride}, {"window", g.window},
          {"cells", std::move(cells)}};
}

inline GridData grid_from_json(const json& j) {
  GridData g;
  g.image = image_from_json(detail::get<json>(j, "image"));
  g.stride = detail::get<double>(j, "stride");
  g.window = detail::get<double>(j, "window");
  if (!(g.stride > 0.0) || !(g.window > 0.0)) throw FormatError("grid stride and window must be positive");
  const json cells = detail::get<json>(j, "cells");
  if (!cells.is_array()) throw FormatError("cells must be an array");
  for (const auto& c : cells) {
    GridCell cell{detail::get<double>(c, "x"), detail::get<double>(c, "y"),
                  detail::get<double>(c, "scale"), detail::get<double>(c, "aspect"),
                  activations_from_json(detail::get<json>(c, "tl")),
                  activations_from_json(detail::get<json>(c, "br"))};
    if (!(cell.scale > 0.0) || !(cell.aspect > 0.0))
      throw FormatError("grid cell scale and aspect must be positive");
    g.cells.push_back(cell);
  }
  return g;
}

inline json trace_to_json(std::uint64_t scene_id, const SceneRunLog::Run& run) {
  json steps = json::array();
  for (const auto& s : run.outcome.trace) {
    steps.push_back({{"window", box_to_json(s.window)}, {"tl", std::string(to_string(s.tl))},
                     {"br", std::string(to_string(s.br))}});
  }
  json j = {{"scene_id", scene_id},
            {"stage", run.stage == RunStage::Initial ? "initial" : "refine"},
            {"start", box_to_json(run.start)},
            {"status", std::string(to_string(run.outcome.status))},
            {"iterations", run.outcome.iterations},
            {"trace", std::move(steps)}};
  if (run.outcome.box) {
    j["box"] = box_to_json(*run.outcome.box);
    j["score"] = run.outcome.score;
  }
  return j;
}

// ---- files ---------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

/// A JSON array of documents or one document per non-blank line.
inline std::vector<json> read_documents(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  if (text[first] == '[') {
    json arr = parse(text, path.string());
    return {arr.begin(), arr.end()};
  }
  std::vector<json> docs;
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    docs.push_back(parse(line, path.string() + ":" + std::to_string(n)));
  }
  return docs;
}

/// Writes via a sibling temporary and rename, so readers never observe a
/// partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw FormatError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

inline std::string json_lines(const std::vector<json>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += d.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::vector<Scene> scenes;
  for (const auto& d : read_documents(path)) scenes.push_back(scene_from_json(d));
  return scenes;
}

inline void write_scenes(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::vector<json> docs;
  docs.reserve(scenes.size());
  for (const auto& s : scenes) docs.push_back(scene_to_json(s));
  write_atomic(path, json_lines(docs));
}

struct SceneDetections {
  std::uint64_t scene_id = 0;
  std::vector<Detection> detections;
};

inline std::string detections_lines(const std::vector<SceneDetections>& all) {
  std::vector<json> docs;
  for (const auto& sd : all)
    for (const auto& d : sd.detections) docs.push_back(detection_to_json(sd.scene_id, d));
  return json_lines(docs);
}

/// Detection lines as (scene_id, detection) pairs in file order.
inline std::vector<std::pair<std::uint64_t, Detection>> read_detections(
    const std::filesystem::path& path) {
  std::vector<std::pair<std::uint64_t, Detection>> out;
  for (const auto& d : read_documents(path)) {
    Detection det{box_from_json(detail::get<json>(d, "box")), detail::get<double>(d, "score"),
                  d.contains("iterations") ? detail::get<int>(d, "iterations") : 0};
    out.emplace_back(detail::get<std::uint64_t>(d, "scene_id"), det);
  }
  return out;
}

inline GridData read_grid(const std::filesystem::path& path) {
  return grid_from_json(parse(read_file(path), path.string()));
}

inline AnyOracle make_oracle(const OracleSpec& spec, const LabelParams& params) {
  switch (spec.kind) {
    case OracleKind::GroundTruth: return GroundTruthOracle(params, spec.epsilon);
    case OracleKind::Noisy: return NoisyOracle(params, spec.epsilon, spec.noise_p, spec.seed);
    case OracleKind::Grid:
      if (spec.grid_path.empty()) throw std::invalid_argument("grid oracle requires a grid path");
      return GridOracle(read_grid(spec.grid_path));
  }
  throw std::invalid_argument("unknown oracle kind");
}

}  // namespace attnet::io
