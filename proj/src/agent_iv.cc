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

#include "surgvoice/agent_iv.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice::iv {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Anatomical axis that is normal to each plane.
Axis normal_axis(Plane plane) {
  switch (plane) {
    case Plane::kAxial: return Axis::kInfSup;
    case Plane::kCoronal: return Axis::kAntPost;
    case Plane::kSagittal: return Axis::kLeftRight;
  }
  return Axis::kInfSup;
}

int grid_of(const AxisMap& m, Axis a) { return m.grid_axis[static_cast<int>(a)]; }

std::optional<Named> named_from_string(std::string_view s) {
  const std::string k = lower(s);
  if (k == "min" || k == "first" || k == "minimum") return Named::kMin;
  if (k == "middle" || k == "mid" || k == "center" || k == "centre") return Named::kMiddle;
  if (k == "max" || k == "last" || k == "maximum") return Named::kMax;
  return std::nullopt;
}

PlaneTarget target_from_json(const nlohmann::json& v) {
  if (v.is_number_integer()) return Delta{v.get<int>()};
  if (v.is_number()) return Delta{static_cast<int>(std::lround(v.get<double>()))};
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (auto n = named_from_string(s)) return *n;
    try {
      std::size_t used = 0;
      const int value = std::stoi(s, &used);
      if (used == s.size()) {
        if (s[0] == '+' || s[0] == '-') return Delta{value};
        return Absolute{value};
      }
    } catch (const std::exception&) {
    }
    throw ParseError("bad slice target '" + s + "'");
  }
  if (v.is_object()) {
    if (v.contains("delta")) return Delta{v["delta"].get<int>()};
    if (v.contains("to")) {
      const auto& to = v["to"];
      if (to.is_string()) {
        if (auto n = named_from_string(to.get<std::string>())) return *n;
        throw ParseError("bad named target '" + to.get<std::string>() + "'");
      }
      return Absolute{to.get<int>()};
    }
  }
  throw ParseError("bad slice target " + v.dump());
}

nlohmann::json target_to_json(const PlaneTarget& t) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Delta>) {
          return {{"delta", x.value}};
        } else if constexpr (std::is_same_v<T, Absolute>) {
          return {{"to", x.value}};
        } else {
          return {{"to", x == Named::kMin ? "min" : x == Named::kMiddle ? "middle" : "max"}};
        }
      },
      t);
}

void add_delta(std::optional<PlaneTarget>& slot, int delta) {
  if (slot && std::holds_alternative<Delta>(*slot)) {
    std::get<Delta>(*slot).value += delta;
  } else {
    slot = Delta{delta};
  }
}

}  // namespace

int Volume::extent(Plane plane) const { return dims[grid_of(axis_map, normal_axis(plane))]; }

SlicePositions Volume::bounds() const {
  return {extent(Plane::kAxial), extent(Plane::kCoronal), extent(Plane::kSagittal)};
}

Volume Volume::gradient(std::array<int, 3> dims, int axis) {
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw std::invalid_argument("volume dims must be positive");
  }
  Volume v;
  v.dims = dims;
  v.voxels.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  std::size_t i = 0;
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        const int c[3] = {x, y, z};
        v.voxels[i++] = static_cast<std::int16_t>(c[axis]);
      }
    }
  }
  return v;
}

Volume Volume::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open volume " + path.string());
  std::string header_line;
  std::getline(in, header_line);
  auto header = nlohmann::json::parse(header_line, nullptr, false);
  if (!header.is_object() || !header.contains("dims")) {
    throw SchemaError("volume header must be a JSON object with dims");
  }
  Volume v;
  v.dims = header["dims"].get<std::array<int, 3>>();
  if (v.dims[0] <= 0 || v.dims[1] <= 0 || v.dims[2] <= 0) {
    throw SchemaError("volume dims must be positive");
  }
  if (header.contains("spacing")) v.spacing = header["spacing"].get<std::array<double, 3>>();
  if (header.contains("axis_map")) {
    const auto& am = header["axis_map"];
    v.axis_map.grid_axis = {am.value("left_right", 0), am.value("ant_post", 1),
                            am.value("inf_sup", 2)};
    auto sorted = v.axis_map.grid_axis;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 3>{0, 1, 2}) throw SchemaError("axis_map is not a permutation");
  }
  const std::string dtype = header.value("dtype", "int16");
  const std::size_t n = static_cast<std::size_t>(v.dims[0]) * v.dims[1] * v.dims[2];
  v.voxels.resize(n);
  if (dtype == "int16") {
    std::vector<unsigned char> raw(n * 2);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw SchemaError("volume blob is shorter than the header says");
    }
    for (std::size_t i = 0; i < n; ++i) {
      v.voxels[i] = static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    }
  } else if (dtype == "uint8") {
    std::vector<unsigned char> raw(n);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw SchemaError("volume blob is shorter than the header says");
    }
    std::copy(raw.begin(), raw.end(), v.voxels.begin());
  } else {
    throw SchemaError("unsupported volume dtype '" + dtype + "'");
  }
  return v;
}

void Volume::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write volume " + path.string());
  const nlohmann::json header = {
      {"dims", dims},
      {"spacing", spacing},
      {"dtype", "int16"},
      {"axis_map",
       {{"left_right", axis_map.grid_axis[0]},
        {"ant_post", axis_map.grid_axis[1]},
        {"inf_sup", axis_map.grid_axis[2]}}}};
  out << header.dump() << '\n';
  std::vector<unsigned char> raw(voxels.size() * 2);
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(voxels[i]);
    raw[2 * i] = static_cast<unsigned char>(u & 0xff);
    raw[2 * i + 1] = static_cast<unsigned char>(u >> 8);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

Image2D slice_volume(const Volume& volume, Plane plane, int index) {
  const int n_lr = volume.dims[grid_of(volume.axis_map, Axis::kLeftRight)];
  const int n_ap = volume.dims[grid_of(volume.axis_map, Axis::kAntPost)];
  const int n_is = volume.dims[grid_of(volume.axis_map, Axis::kInfSup)];
  if (index < 0 || index >= volume.extent(plane)) {
    throw OutOfBounds("slice " + std::to_string(index) + " outside " + std::string(to_string(plane)) +
                      " range [0, " + std::to_string(volume.extent(plane) - 1) + "]");
  }

  Image2D img;
  // Each pixel maps to anatomical (lr, ap, is) coordinates.
  std::function<std::array<int, 3>(int, int)> coord;
  switch (plane) {
    case Plane::kAxial:
      img.rows = n_ap;
      img.cols = n_lr;
      coord = [&](int r, int c) { return std::array<int, 3>{c, r, index}; };
      break;
    case Plane::kCoronal:
      img.rows = n_is;
      img.cols = n_lr;
      coord = [&](int r, int c) { return std::array<int, 3>{c, index, n_is - 1 - r}; };
      break;
    case Plane::kSagittal:
      img.rows = n_is;
      img.cols = n_ap;
      coord = [&](int r, int c) { return std::array<int, 3>{index, c, n_is - 1 - r}; };
      break;
  }
  img.pixels.resize(static_cast<std::size_t>(img.rows) * img.cols);
  std::size_t i = 0;
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const auto a = coord(r, c);
      std::array<int, 3> g{};
      for (int k = 0; k < 3; ++k) g[volume.axis_map.grid_axis[k]] = a[k];
      img.pixels[i++] = volume.at(g[0], g[1], g[2]);
    }
  }
  return img;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kShowMove: return "SHOW_MOVE";
    case Action::kZoomInMove: return "ZOOM_IN_MOVE";
    case Action::kZoomOut: return "ZOOM_OUT";
    case Action::kRemove: return "REMOVE";
  }
  return "SHOW_MOVE";
}

std::optional<Action> action_from_string(std::string_view s) {
  std::string k(s);
  std::transform(k.begin(), k.end(), k.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  std::replace(k.begin(), k.end(), ' ', '_');
  for (Action a : {Action::kShowMove, Action::kZoomInMove, Action::kZoomOut, Action::kRemove}) {
    if (k == to_string(a)) return a;
  }
  return std::nullopt;
}

std::optional<std::pair<Plane, int>> direction(std::string_view word) {
  const std::string w = lower(word);
  if (w == "right") return std::pair{Plane::kSagittal, +1};
  if (w == "left") return std::pair{Plane::kSagittal, -1};
  if (w == "up") return std::pair{Plane::kAxial, +1};
  if (w == "down") return std::pair{Plane::kAxial, -1};
  if (w == "front" || w == "forward") return std::pair{Plane::kCoronal, +1};
  if (w == "back" || w == "backward" || w == "posterior") return std::pair{Plane::kCoronal, -1};
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
    if (!any) throw ParseError("IV reply has no usable action_probs");
  } else if (obj.contains("action") && obj["action"].is_string()) {
    auto a = action_from_string(obj["action"].get<std::string>());
    if (!a) throw ParseError("unknown IV action '" + obj["action"].get<std::string>() + "'");
    d.action = *a;
  } else {
    throw ParseError("IV reply has no action");
  }
  d.reset = obj.value("reset", false);

  if (obj.contains("moves") && obj["moves"].is_object()) {
    for (const auto& [k, v] : obj["moves"].items()) {
      auto plane = plane_from_string(lower(k));
      if (!plane) throw ParseError("unknown plane '" + k + "'");
      d.targets[static_cast<int>(*plane)] = target_from_json(v);
    }
  }
  // Unlabeled absolute targets apply in axial, coronal, sagittal order.
  if (obj.contains("targets") && obj["targets"].is_array()) {
    const auto& t = obj["targets"];
    if (t.size() > 3) throw ParseError("more than three slice targets");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].is_null()) continue;
      PlaneTarget pt = target_from_json(t[i]);
      if (auto* dl = std::get_if<Delta>(&pt)) pt = Absolute{dl->value};
      d.targets[i] = pt;
    }
  }
  if (obj.contains("directions") && obj["directions"].is_array()) {
    for (const auto& w : obj["directions"]) {
      if (!w.is_string()) continue;
      auto dir = direction(w.get<std::string>());
      if (!dir) throw ParseError("unknown direction '" + w.get<std::string>() + "'");
      add_delta(d.targets[static_cast<int>(dir->first)], dir->second * kDefaultStep);
    }
  }
  if (obj.contains("main_view") && obj["main_view"].is_string()) {
    auto plane = plane_from_string(lower(obj["main_view"].get<std::string>()));
    if (!plane) throw ParseError("unknown main view '" + obj["main_view"].get<std::string>() + "'");
    d.main_view = plane;
  }
  if (d.action == Action::kZoomOut || d.action == Action::kRemove) {
    for (auto& t : d.targets) {
      if (t) spdlog::warn("IV {} carries a slice move; ignored", to_string(d.action));
      t.reset();
    }
  }
  return d;
}

std::string build_prompt(std::string_view command, const IvState& state,
                         const SlicePositions& bounds) {
  std::string p;
  p += "You are the image viewer agent. You control CT slice overlays in three planes.\n\n";
  p += "Current state:\n";
  for (Plane pl : kAllPlanes) {
    p += "- " + std::string(to_string(pl)) + " slice " + std::to_string(at(state.positions, pl)) +
         " of 0.." + std::to_string(at(bounds, pl) - 1) + "\n";
  }
  p += "- display mode: " + std::string(to_string(state.mode)) + "\n";
  p += "- main view: " + std::string(to_string(state.main_view)) + "\n\n";
  p += "Actions: SHOW_MOVE, ZOOM_IN_MOVE, ZOOM_OUT, REMOVE.\n"
       "Directions: right/left move sagittal +/-, up/down move axial +/-, "
       "front/forward move coronal +, back/backward/posterior move coronal -.\n"
       "A bare direction word moves 10 units; repeated words add up.\n"
       "Targets may be a delta, an absolute index, or min/middle/max.\n"
       "\"Reset\" or \"Initialize\" restores the default positions.\n\n";
  p += "Output JSON only: {\"action\": \"SHOW_MOVE\", \"moves\": {\"coronal\": {\"delta\": 30}}, "
       "\"main_view\": null, \"reset\": false}\n\n";
  p += "Revised command: \"" + std::string(command) + "\"\n";
  return p;
}

Decision determine_action(std::string_view command, const IvState& state,
                          const SlicePositions& bounds, LlmBackend& backend) {
  ChatRequest req;
  req.label = "iv_agent";
  req.user_prompt = build_prompt(command, state, bounds);
  const ChatResponse res = backend.chat(req);
  try {
    return parse_decision(res.text);
  } catch (const ParseError& e) {
    throw StageFailure(std::string("IV action determination: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw StageFailure(std::string("IV action determination: ") + e.what());
  }
}

IvState default_state(const SlicePositions& bounds) {
  IvState s;
  for (Plane pl : kAllPlanes) at(s.positions, pl) = at(bounds, pl) / 2;
  return s;
}

SlicePositions update_positions(const SlicePositions& p, const Decision& decision,
                                const SlicePositions& bounds) {
  SlicePositions out = p;
  for (Plane pl : kAllPlanes) {
    const int i = static_cast<int>(pl);
    const int dim = bounds[i];
    const auto& t = decision.targets[i];
    if (!t) continue;
    long long v = out[i];
    if (auto* d = std::get_if<Delta>(&*t)) {
      v += d->value;
    } else if (auto* a = std::get_if<Absolute>(&*t)) {
      v = a->value;
    } else {
      switch (std::get<Named>(*t)) {
        case Named::kMin: v = 0; break;
        case Named::kMiddle: v = dim / 2; break;
        case Named::kMax: v = dim - 1; break;
      }
    }
    out[i] = static_cast<int>(std::clamp<long long>(v, 0, dim - 1));
  }
  return out;
}

Applied apply(const IvState& state, const Decision& decision, const SlicePositions& bounds,
              int fps) {
  Applied out;
  TimelineBuilder tb(fps);

  if (decision.reset) {
    out.state = default_state(bounds);
    out.state.mode = DisplayMode::kSmallViews;
    tb.add(0.0, DirectiveKind::kCtSmallViews, Anchor::kRightSide,
           SlicePayload{out.state.positions, std::nullopt});
    out.timeline = std::move(tb).finish();
    return out;
  }

  out.state = state;
  switch (decision.action) {
    case Action::kRemove:
      out.state.mode = DisplayMode::kNone;
      tb.add(0.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
      out.timeline = std::move(tb).finish();
      return out;
    case Action::kZoomOut:
      out.state.mode = DisplayMode::kSmallViews;
      tb.add(0.0, DirectiveKind::kCtSmallViews, Anchor::kRightSide,
             SlicePayload{out.state.positions, std::nullopt});
      out.timeline = std::move(tb).finish();
      return out;
    case Action::kShowMove:
    case Action::kZoomInMove:
      break;
  }

  const SlicePositions target = update_positions(state.positions, decision, bounds);
  out.state.positions = target;
  DirectiveKind kind = DirectiveKind::kCtSmallViews;
  Anchor anchor = Anchor::kRightSide;
  std::optional<Plane> main_view;
  if (decision.action == Action::kZoomInMove) {
    out.state.mode = DisplayMode::kZoomView;
    if (decision.main_view) {
      out.state.main_view = *decision.main_view;
    } else {
      for (Plane pl : kAllPlanes) {
        if (decision.targets[static_cast<int>(pl)]) {
          out.state.main_view = pl;
          break;
        }
      }
    }
    kind = DirectiveKind::kCtZoomView;
    anchor = Anchor::kCenter;
    main_view = out.state.main_view;
  } else {
    out.state.mode = DisplayMode::kSmallViews;
  }

  if (target == state.positions) {
    tb.add(0.0, kind, anchor, SlicePayload{target, main_view});
  } else {
    const std::array<double, 3> from{double(state.positions[0]), double(state.positions[1]),
                                     double(state.positions[2])};
    const std::array<double, 3> to{double(target[0]), double(target[1]), double(target[2])};
    const auto samples = interpolate_linear(from, to, kMoveSeconds, fps, true);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      SlicePositions p{static_cast<int>(samples[i][0]), static_cast<int>(samples[i][1]),
                       static_cast<int>(samples[i][2])};
      tb.add(static_cast<double>(i) / fps, kind, anchor, SlicePayload{p, main_view});
    }
  }
  out.timeline = std::move(tb).finish();
  return out;
}

nlohmann::json canonical_params(const Decision& d) {
  nlohmann::json moves = nlohmann::json::object();
  for (Plane pl : kAllPlanes) {
    const auto& t = d.targets[static_cast<int>(pl)];
    if (t) moves[std::string(to_string(pl))] = target_to_json(*t);
  }
  nlohmann::json j = {{"moves", moves}};
  j["main_view"] = d.main_view ? nlohmann::json(std::string(to_string(*d.main_view))) : nullptr;
  if (d.reset) j["reset"] = true;
  return j;
}

}  // namespace surgvoice::iv
