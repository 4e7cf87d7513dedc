// Copyright (c) 2026 The surgvoice Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "surgvoice/agent_ar.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice::ar {
namespace {

std::string normalize(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == '_' || c == '-' || c == '/') {
      out += ' ';
    } else {
      out += static_cast<char>(std::tolower(c));
    }
  }
  const auto b = out.find_first_not_of(' ');
  const auto e = out.find_last_not_of(' ');
  return b == std::string::npos ? "" : out.substr(b, e - b + 1);
}

using S = Structure;

const std::map<std::string, std::vector<Structure>>& structure_aliases() {
  static const std::map<std::string, std::vector<Structure>> kAliases = {
      {"lll", {S::kLLL}},
      {"left lower lobe", {S::kLLL}},
      {"lul", {S::kLUL}},
      {"left upper lobe", {S::kLUL}},
      {"rll", {S::kRLL}},
      {"right lower lobe", {S::kRLL}},
      {"rml", {S::kRML}},
      {"right middle lobe", {S::kRML}},
      {"rul", {S::kRUL}},
      {"right upper lobe", {S::kRUL}},
      {"nodules", {S::kNodules}},
      {"nodule", {S::kNodules}},
      {"lung nodules", {S::kNodules}},
      {"lung nodule", {S::kNodules}},
      {"tumor", {S::kNodules}},
      {"lesion", {S::kNodules}},
      {"trachea bronchia", {S::kTracheaBronchia}},
      {"trachea", {S::kTracheaBronchia}},
      {"bronchia", {S::kTracheaBronchia}},
      {"bronchi", {S::kTracheaBronchia}},
      {"airway", {S::kTracheaBronchia}},
      {"airways", {S::kTracheaBronchia}},
      {"right lung", {S::kRUL, S::kRML, S::kRLL}},
      {"left lung", {S::kLUL, S::kLLL}},
      {"lobes", {S::kLLL, S::kLUL, S::kRLL, S::kRML, S::kRUL}},
      {"all lobes", {S::kLLL, S::kLUL, S::kRLL, S::kRML, S::kRUL}},
      {"lungs", {S::kLLL, S::kLUL, S::kRLL, S::kRML, S::kRUL}},
      {"all", {kAllStructures.begin(), kAllStructures.end()}},
      {"everything", {kAllStructures.begin(), kAllStructures.end()}},
  };
  return kAliases;
}

std::set<Structure> structures_from_json(const nlohmann::json& j) {
  std::set<Structure> out;
  if (j.is_null()) return out;
  if (j.is_string()) {
    const auto list = resolve_structures(j.get<std::string>());
    if (list.empty()) throw ParseError("unknown structure '" + j.get<std::string>() + "'");
    out.insert(list.begin(), list.end());
    return out;
  }
  if (!j.is_array()) throw ParseError("structure list must be a string or array");
  for (const auto& item : j) {
    const auto sub = structures_from_json(item);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

Vec3 vec_from_json(const nlohmann::json& j) { return j.get<std::array<double, 3>>(); }

bool inside(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  for (int i = 0; i < 3; ++i) {
    if (p[i] < lo[i] || p[i] > hi[i]) return false;
  }
  return true;
}

std::set<Structure> default_visible(const StructureManifest& manifest) {
  std::set<Structure> out;
  for (const auto& s : manifest.structures) {
    if (!s.is_lobe || s.contains_nodules) out.insert(s.label);
  }
  return out;
}

// Linear zoom transition from one frame to another over kZoomSeconds.
void add_zoom_transition(TimelineBuilder& tb, const ArState& from, const ArState& to) {
  const std::array<double, 4> a{from.zoom.center[0], from.zoom.center[1], from.zoom.center[2],
                                from.zoom.scale};
  const std::array<double, 4> b{to.zoom.center[0], to.zoom.center[1], to.zoom.center[2],
                                to.zoom.scale};
  const auto samples = interpolate_linear(a, b, kZoomSeconds, tb.fps());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ScenePayload p = scene_of(to);
    p.zoom_center = {samples[i][0], samples[i][1], samples[i][2]};
    p.zoom_scale = samples[i][3];
    // Report the level being approached until the last frame lands.
    if (i + 1 < samples.size()) p.zoom_level = std::min(from.zoom.level, to.zoom.level);
    tb.add(static_cast<double>(i) / tb.fps(), DirectiveKind::kScene3d, Anchor::kTopRight, p);
  }
}

}  // namespace

StructureManifest StructureManifest::defaults() {
  // Synthetic thorax in mm, patient coordinates: x left-right, y
  // anterior-posterior, z inferior-superior.
  StructureManifest m;
  m.structures = {
      {S::kLLL, {75, 10, 60}, {35, -40, 20}, {120, 60, 110}, true, false, std::nullopt},
      {S::kLUL, {70, 0, 140}, {30, -45, 95}, {115, 50, 190}, true, false, std::nullopt},
      {S::kRLL, {-75, 10, 60}, {-120, -40, 20}, {-35, 60, 110}, true, true, std::nullopt},
      {S::kRML, {-80, -25, 105}, {-120, -50, 85}, {-40, 5, 125}, true, false, std::nullopt},
      {S::kRUL, {-70, 0, 150}, {-115, -45, 120}, {-30, 50, 195}, true, false, std::nullopt},
      {S::kNodules, {-82, 18, 62}, {-92, 8, 52}, {-72, 28, 72}, false, false, std::nullopt},
      {S::kTracheaBronchia, {0, 0, 170}, {-40, -20, 110}, {40, 20, 240}, false, false,
       std::nullopt},
  };
  return m;
}

StructureManifest StructureManifest::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("structures") || !j["structures"].is_array()) {
    throw SchemaError("structure manifest needs a 'structures' array");
  }
  StructureManifest m;
  std::set<Structure> seen;
  std::size_t row = 0;
  for (const auto& s : j["structures"]) {
    ++row;
    StructureInfo info;
    const std::string label = s.at("label").get<std::string>();
    auto parsed = structure_from_string(label);
    if (!parsed) throw SchemaError("unknown structure label '" + label + "'", row);
    info.label = *parsed;
    if (!seen.insert(info.label).second) {
      throw SchemaError("duplicate structure label '" + label + "'", row);
    }
    info.centroid = vec_from_json(s.at("centroid"));
    info.bbox_min = vec_from_json(s.at("bbox").at("min"));
    info.bbox_max = vec_from_json(s.at("bbox").at("max"));
    if (!inside(info.centroid, info.bbox_min, info.bbox_max)) {
      throw SchemaError("centroid of '" + label + "' lies outside its bbox", row);
    }
    info.is_lobe = s.value("is_lobe", false);
    info.contains_nodules = s.value("contains_nodules", false);
    if (s.contains("mesh") && s["mesh"].is_string()) info.mesh = s["mesh"].get<std::string>();
    m.structures.push_back(std::move(info));
  }
  if (seen.size() != kAllStructures.size()) {
    throw SchemaError("structure manifest must list all seven structures");
  }
  return m;
}

StructureManifest StructureManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open structure manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError("structure manifest is not valid JSON");
  return from_json(j);
}

nlohmann::json StructureManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : structures) {
    nlohmann::json sj = {{"label", to_string(s.label)},
                         {"centroid", s.centroid},
                         {"bbox", {{"min", s.bbox_min}, {"max", s.bbox_max}}},
                         {"is_lobe", s.is_lobe},
                         {"contains_nodules", s.contains_nodules}};
    if (s.mesh) sj["mesh"] = *s.mesh;
    list.push_back(std::move(sj));
  }
  return {{"structures", list}};
}

const StructureInfo* StructureManifest::find(Structure label) const {
  for (const auto& s : structures) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

Vec3 StructureManifest::model_center() const {
  if (structures.empty()) return {0, 0, 0};
  Vec3 lo = structures.front().bbox_min;
  Vec3 hi = structures.front().bbox_max;
  for (const auto& s : structures) {
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], s.bbox_min[i]);
      hi[i] = std::max(hi[i], s.bbox_max[i]);
    }
  }
  return {(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
}

CameraAngles camera_for(Viewpoint v) {
  switch (v) {
    case Viewpoint::kAnterior: return {0, 0};
    case Viewpoint::kPosterior: return {180, 0};
    case Viewpoint::kLeft: return {90, 0};
    case Viewpoint::kRight: return {-90, 0};
    case Viewpoint::kSuperior: return {0, 90};
    case Viewpoint::kInferior: return {0, -90};
    // Looking down on a supine patient from above and slightly toward the feet.
    case Viewpoint::kSurgical: return {0, 60};
  }
  return {0, 0};
}

std::vector<Structure> resolve_structures(std::string_view phrase) {
  std::string key = normalize(phrase);
  if (key.rfind("the ", 0) == 0) key = key.substr(4);
  if (auto s = structure_from_string(phrase)) return {*s};
  const auto& aliases = structure_aliases();
  if (auto it = aliases.find(key); it != aliases.end()) return it->second;
  return {};
}

std::optional<Viewpoint> resolve_view(std::string_view phrase) {
  std::string key = normalize(phrase);
  for (std::string_view prefix : {"from the ", "from "}) {
    if (key.rfind(prefix, 0) == 0) key = key.substr(prefix.size());
  }
  if (key.size() > 5 && key.substr(key.size() - 5) == " view") key = key.substr(0, key.size() - 5);
  if (auto v = viewpoint_from_string(key)) return v;
  static const std::map<std::string, Viewpoint> kViews = {
      {"front", Viewpoint::kAnterior},     {"back", Viewpoint::kPosterior},
      {"behind", Viewpoint::kPosterior},   {"top", Viewpoint::kSuperior},
      {"above", Viewpoint::kSuperior},     {"bottom", Viewpoint::kInferior},
      {"below", Viewpoint::kInferior},     {"operating", Viewpoint::kSurgical},
      {"left side", Viewpoint::kLeft},     {"right side", Viewpoint::kRight},
  };
  if (auto it = kViews.find(key); it != kViews.end()) return it->second;
  return std::nullopt;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kStaticView: return "STATIC_VIEW";
    case Action::kRotate: return "ROTATE";
    case Action::kZoomIn: return "ZOOM_IN";
    case Action::kZoomOut: return "ZOOM_OUT";
    case Action::kRemove: return "REMOVE";
  }
  return "STATIC_VIEW";
}

std::optional<Action> action_from_string(std::string_view s) {
  std::string k(s);
  std::transform(k.begin(), k.end(), k.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  std::replace(k.begin(), k.end(), ' ', '_');
  for (Action a : {Action::kStaticView, Action::kRotate, Action::kZoomIn, Action::kZoomOut,
                   Action::kRemove}) {
    if (k == to_string(a)) return a;
  }
  return std::nullopt;
}

Decision parse_decision(std::string_view reply) {
  const nlohmann::json obj = extract_json_object(reply);
  Decision d;
  if (obj.contains("action_probs") && obj["action_probs"].is_object()) {
    double best = -1.0;
    bool any = false;
    for (const auto& [k, v] : obj["action_probs"].items()) {
      auto a = action_from_string(k);
      if (!a || !v.is_number()) continue;
      if (v.get<double>() > best) {
        best = v.get<double>();
        d.action = *a;
        any = true;
      }
    }
    if (!any) throw ParseError("AR reply has no usable action_probs");
  } else if (obj.contains("action") && obj["action"].is_string()) {
    auto a = action_from_string(obj["action"].get<std::string>());
    if (!a) throw ParseError("unknown AR action '" + obj["action"].get<std::string>() + "'");
    d.action = *a;
  } else {
    throw ParseError("AR reply has no action");
  }
  d.reset = obj.value("reset", false);
  if (obj.contains("add")) d.add = structures_from_json(obj["add"]);
  if (obj.contains("remove")) d.remove = structures_from_json(obj["remove"]);
  if (obj.contains("view") && obj["view"].is_string()) {
    d.view = resolve_view(obj["view"].get<std::string>());
    if (!d.view) throw ParseError("unknown view '" + obj["view"].get<std::string>() + "'");
  }
  if (obj.contains("rotation") && obj["rotation"].is_string()) {
    d.rotation = rotation_from_string(obj["rotation"].get<std::string>());
    if (!d.rotation) {
      throw ParseError("unknown rotation '" + obj["rotation"].get<std::string>() + "'");
    }
  }
  if (obj.contains("target") && obj["target"].is_string()) {
    const auto list = resolve_structures(obj["target"].get<std::string>());
    if (list.size() != 1) {
      throw ParseError("unknown zoom target '" + obj["target"].get<std::string>() + "'");
    }
    d.target = list.front();
  }
  if (d.action == Action::kRotate && !d.rotation) throw ParseError("ROTATE without a rotation");
  return d;
}

std::string build_prompt(std::string_view command, const ArState& state) {
  std::string p;
  p += "You are the anatomy rendering agent. You control a 3D lung model overlay.\n\n";
  p += "Structures: LLL, LUL, RLL, RML, RUL, nodules, trachea_bronchia "
       "(\"airway\" means trachea_bronchia).\n";
  p += "Views: anterior, posterior, left, right, superior, inferior, surgical.\n";
  p += "Rotations: left, right, up, down (30 degrees and back), horizontal, vertical (full "
       "turn).\n";
  p += "Actions: STATIC_VIEW, ROTATE, ZOOM_IN, ZOOM_OUT, REMOVE.\n";
  p += "\"Reset\" or \"Initialize\" restores the default model.\n\n";
  p += "Current state:\n- visible:";
  for (Structure s : state.visible) p += " " + std::string(to_string(s));
  p += "\n- view: " + std::string(to_string(state.view));
  p += "\n- zoom level: " + std::to_string(state.zoom.level) + "\n\n";
  p += "Output JSON only: {\"action\": \"STATIC_VIEW\", \"add\": [], \"remove\": [], "
       "\"view\": null, \"rotation\": null, \"target\": null, \"reset\": false}\n\n";
  p += "Revised command: \"" + std::string(command) + "\"\n";
  return p;
}

Decision determine_action(std::string_view command, const ArState& state, LlmBackend& backend) {
  ChatRequest req;
  req.label = "ar_agent";
  req.user_prompt = build_prompt(command, state);
  const ChatResponse res = backend.chat(req);
  try {
    return parse_decision(res.text);
  } catch (const Error& e) {
    throw StageFailure(std::string("AR action determination: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw StageFailure(std::string("AR action determination: ") + e.what());
  }
}

ArState default_state(const StructureManifest& manifest) {
  ArState s;
  s.visible = default_visible(manifest);
  s.view = Viewpoint::kSurgical;
  s.rotation = Rotation::kStatic;
  s.zoom = ZoomFrame{manifest.model_center(), 1.0, 0};
  return s;
}

std::set<Structure> update_structures(const std::set<Structure>& visible,
                                      const std::set<Structure>& add,
                                      const std::set<Structure>& remove) {
  std::set<Structure> out = visible;
  out.insert(add.begin(), add.end());
  for (Structure s : remove) out.erase(s);
  return out;
}

ArState zoom_in(const ArState& state, Structure target, const StructureManifest& manifest) {
  const StructureInfo* info = manifest.find(target);
  if (!info) throw UnknownStructure("structure '" + std::string(to_string(target)) +
                                    "' is not in the manifest");
  ArState out = state;
  out.zoom_stack.push_back(state.zoom);
  out.zoom.center = info->centroid;
  out.zoom.scale = state.zoom.scale * 2.0;
  out.zoom.level = state.zoom.level + 1;
  out.target = target;
  return out;
}

ArState zoom_in(const ArState& state, std::string_view target, const StructureManifest& manifest) {
  const auto list = resolve_structures(target);
  if (list.size() != 1) throw UnknownStructure("unknown zoom target '" + std::string(target) + "'");
  return zoom_in(state, list.front(), manifest);
}

ArState zoom_out(const ArState& state) {
  if (state.zoom_stack.empty()) return state;
  ArState out = state;
  out.zoom = out.zoom_stack.back();
  out.zoom_stack.pop_back();
  if (out.zoom_stack.empty()) out.target.reset();
  return out;
}

ScenePayload scene_of(const ArState& state, double angle_deg) {
  ScenePayload p;
  p.visible.assign(state.visible.begin(), state.visible.end());
  p.view = state.view;
  p.rotation = state.rotation;
  p.angle_deg = angle_deg;
  p.zoom_center = state.zoom.center;
  p.zoom_scale = state.zoom.scale;
  p.zoom_level = state.zoom.level;
  return p;
}

Applied apply(const ArState& state, const Decision& decision, const StructureManifest& manifest,
              int fps) {
  Applied out;
  TimelineBuilder tb(fps);
  ArState s = decision.reset ? default_state(manifest) : state;

  if (decision.action == Action::kRemove) {
    s.visible.clear();
    s.rotation = Rotation::kStatic;
    out.state = s;
    tb.add(0.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
    out.timeline = std::move(tb).finish();
    return out;
  }

  // Bringing the model back after a removal shows the default set again.
  if (s.visible.empty() && decision.add.empty()) s.visible = default_visible(manifest);
  s.visible = update_structures(s.visible, decision.add, decision.remove);
  if (decision.view) s.view = *decision.view;
  s.rotation = Rotation::kStatic;

  double t = 0.0;
  if (decision.action == Action::kZoomIn) {
    const Structure target = decision.target.value_or(s.target.value_or(S::kNodules));
    const ArState before = s;
    s = zoom_in(s, target, manifest);
    add_zoom_transition(tb, before, s);
    t = kZoomSeconds;
  } else if (decision.action == Action::kZoomOut && !s.zoom_stack.empty()) {
    const ArState before = s;
    s = zoom_out(s);
    add_zoom_transition(tb, before, s);
    t = kZoomSeconds;
  }

  const Rotation r = decision.rotation.value_or(Rotation::kStatic);
  if (r != Rotation::kStatic) {
    s.rotation = r;
    const auto angles = rotation_profile(r, fps);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      tb.add(t + static_cast<double>(i) / fps, DirectiveKind::kScene3d, Anchor::kTopRight,
             scene_of(s, angles[i]));
    }
  } else if (t == 0.0) {
    tb.add(0.0, DirectiveKind::kScene3d, Anchor::kTopRight, scene_of(s));
  }
  out.state = s;
  out.timeline = std::move(tb).finish();
  return out;
}

nlohmann::json canonical_params(const Decision& d) {
  auto labels = [](const std::set<Structure>& set) {
    nlohmann::json a = nlohmann::json::array();
    for (Structure s : set) a.push_back(to_string(s));
    return a;
  };
  nlohmann::json j = {{"add", labels(d.add)}, {"remove", labels(d.remove)}};
  j["view"] = d.view ? nlohmann::json(std::string(to_string(*d.view))) : nullptr;
  j["rotation"] = d.rotation ? nlohmann::json(std::string(to_string(*d.rotation))) : nullptr;
  j["target"] = d.target ? nlohmann::json(std::string(to_string(*d.target))) : nullptr;
  if (d.reset) j["reset"] = true;
  return j;
}

}  // namespace surgvoice::ar
