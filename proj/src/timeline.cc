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

#include "surgvoice/timeline.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace surgvoice {

std::string_view to_string(DirectiveKind k) {
  switch (k) {
    case DirectiveKind::kTextOverlay: return "text_overlay";
    case DirectiveKind::kClearOverlay: return "clear_overlay";
    case DirectiveKind::kCtSmallViews: return "ct_small_views";
    case DirectiveKind::kCtZoomView: return "ct_zoom_view";
    case DirectiveKind::kScene3d: return "scene_3d";
  }
  return "clear_overlay";
}

std::string_view to_string(Anchor a) {
  switch (a) {
    case Anchor::kNone: return "none";
    case Anchor::kTopRight: return "top_right";
    case Anchor::kRightSide: return "right_side";
    case Anchor::kCenter: return "center";
  }
  return "none";
}

int sample_count(double duration_s, int fps) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (fps <= 0) throw std::invalid_argument("fps must be positive");
  return std::max(1, static_cast<int>(std::lround(duration_s * fps)));
}

std::vector<std::vector<double>> interpolate_linear(std::span<const double> from,
                                                    std::span<const double> to,
                                                    double duration_s, int fps,
                                                    bool round_to_integer) {
  if (from.size() != to.size()) throw std::invalid_argument("endpoint size mismatch");
  const int n = sample_count(duration_s, fps);
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(n),
                                           std::vector<double>(from.size()));
  for (int i = 0; i < n; ++i) {
    auto& s = samples[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < from.size(); ++c) {
      double v;
      if (i == n - 1) {
        v = to[c];
      } else if (i == 0) {
        v = from[c];
      } else {
        v = from[c] + (to[c] - from[c]) * static_cast<double>(i) / (n - 1);
      }
      s[c] = round_to_integer ? std::round(v) : v;
    }
  }
  return samples;
}

double rotation_duration_s(Rotation mode) {
  switch (mode) {
    case Rotation::kLeft:
    case Rotation::kRight:
    case Rotation::kUp:
    case Rotation::kDown:
      return 7.0;
    case Rotation::kHorizontal:
    case Rotation::kVertical:
      return 6.0;
    case Rotation::kStatic:
      break;
  }
  return 0.0;
}

double rotation_angle_at(Rotation mode, double t) {
  constexpr double kTilt = 30.0;
  constexpr double kMove = 3.0;
  constexpr double kHold = 1.0;
  switch (mode) {
    case Rotation::kStatic:
      return 0.0;
    case Rotation::kHorizontal:
    case Rotation::kVertical:
      return 360.0 * std::clamp(t / 6.0, 0.0, 1.0);
    default:
      break;
  }
  if (t <= 0.0) return 0.0;
  if (t <= kMove) return kTilt * t / kMove;
  if (t <= kMove + kHold) return kTilt;
  const double back = t - kMove - kHold;
  if (back >= kMove) return 0.0;
  return kTilt * (kMove - back) / kMove;
}

std::vector<double> rotation_profile(Rotation mode, int fps) {
  if (mode == Rotation::kStatic) {
    throw std::invalid_argument("static mode has no rotation profile");
  }
  const double duration = rotation_duration_s(mode);
  const int n = sample_count(duration, fps);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    angles[static_cast<std::size_t>(k - 1)] = rotation_angle_at(mode, duration * k / n);
  }
  return angles;
}

TimelineBuilder::TimelineBuilder(int fps) {
  if (fps <= 0) throw std::invalid_argument("fps must be positive");
  timeline_.fps = fps;
}

void TimelineBuilder::add(double t_s, DirectiveKind kind, Anchor anchor, Payload payload) {
  if (!timeline_.keyframes.empty() && t_s <= timeline_.keyframes.back().span.t0_s) {
    throw std::logic_error("keyframe times must be strictly increasing");
  }
  OverlayDirective d;
  d.kind = kind;
  d.anchor = anchor;
  d.payload = std::move(payload);
  d.span.t0_s = t_s;
  timeline_.keyframes.push_back(std::move(d));
}

void TimelineBuilder::warn(std::string message) {
  timeline_.warnings.push_back(std::move(message));
}

OverlayTimeline TimelineBuilder::finish(double clip_s) && {
  auto& keys = timeline_.keyframes;
  const auto past = std::find_if(keys.begin(), keys.end(), [clip_s](const OverlayDirective& d) {
    return d.span.t0_s >= clip_s;
  });
  if (past != keys.end()) {
    const auto dropped = std::distance(past, keys.end());
    keys.erase(past, keys.end());
    timeline_.warnings.push_back("truncated " + std::to_string(dropped) +
                                 " keyframe(s) past the clip end");
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i].span.t1_s = i + 1 < keys.size() ? keys[i + 1].span.t0_s : clip_s;
  }
  return std::move(timeline_);
}

namespace {

nlohmann::json payload_json(const Payload& p) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, TextPayload>) {
          return {{"text", v.text}};
        } else if constexpr (std::is_same_v<T, SlicePayload>) {
          nlohmann::json j = {{"axial", v.positions[0]},
                              {"coronal", v.positions[1]},
                              {"sagittal", v.positions[2]}};
          j["main_view"] = v.main_view ? nlohmann::json(to_string(*v.main_view)) : nullptr;
          return j;
        } else {
          nlohmann::json visible = nlohmann::json::array();
          for (Structure s : v.visible) visible.push_back(to_string(s));
          return {{"visible", visible},
                  {"view", to_string(v.view)},
                  {"rotation", to_string(v.rotation)},
                  {"angle_deg", v.angle_deg},
                  {"zoom_center", v.zoom_center},
                  {"zoom_scale", v.zoom_scale},
                  {"zoom_level", v.zoom_level}};
        }
      },
      p);
}

DirectiveKind kind_from_string(std::string_view s) {
  for (auto k : {DirectiveKind::kTextOverlay, DirectiveKind::kClearOverlay,
                 DirectiveKind::kCtSmallViews, DirectiveKind::kCtZoomView,
                 DirectiveKind::kScene3d}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown directive kind: " + std::string(s));
}

Anchor anchor_from_string(std::string_view s) {
  for (auto a : {Anchor::kNone, Anchor::kTopRight, Anchor::kRightSide, Anchor::kCenter}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown anchor: " + std::string(s));
}

Payload payload_from_json(DirectiveKind kind, const nlohmann::json& j) {
  switch (kind) {
    case DirectiveKind::kClearOverlay:
      return std::monostate{};
    case DirectiveKind::kTextOverlay:
      return TextPayload{j.at("text").get<std::string>()};
    case DirectiveKind::kCtSmallViews:
    case DirectiveKind::kCtZoomView: {
      SlicePayload p;
      p.positions = {j.at("axial").get<int>(), j.at("coronal").get<int>(),
                     j.at("sagittal").get<int>()};
      if (j.contains("main_view") && !j["main_view"].is_null()) {
        p.main_view = plane_from_string(j["main_view"].get<std::string>());
      }
      return p;
    }
    case DirectiveKind::kScene3d: {
      ScenePayload p;
      for (const auto& s : j.at("visible")) {
        if (auto label = structure_from_string(s.get<std::string>())) p.visible.push_back(*label);
      }
      p.view = viewpoint_from_string(j.at("view").get<std::string>()).value();
      p.rotation = rotation_from_string(j.at("rotation").get<std::string>()).value();
      p.angle_deg = j.at("angle_deg").get<double>();
      p.zoom_center = j.at("zoom_center").get<Vec3>();
      p.zoom_scale = j.at("zoom_scale").get<double>();
      p.zoom_level = j.at("zoom_level").get<int>();
      return p;
    }
  }
  return std::monostate{};
}

}  // namespace

nlohmann::json to_json(const OverlayDirective& d) {
  return {{"kind", to_string(d.kind)},
          {"anchor", to_string(d.anchor)},
          {"payload", payload_json(d.payload)},
          {"span", {d.span.t0_s, d.span.t1_s}}};
}

nlohmann::json to_json(const OverlayTimeline& t) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& d : t.keyframes) keys.push_back(to_json(d));
  return {{"fps", t.fps}, {"keyframes", keys}, {"warnings", t.warnings}};
}

OverlayTimeline timeline_from_json(const nlohmann::json& j) {
  OverlayTimeline t;
  t.fps = j.at("fps").get<int>();
  for (const auto& k : j.at("keyframes")) {
    OverlayDirective d;
    d.kind = kind_from_string(k.at("kind").get<std::string>());
    d.anchor = anchor_from_string(k.at("anchor").get<std::string>());
    d.payload = payload_from_json(d.kind, k.at("payload"));
    d.span = {k.at("span").at(0).get<double>(), k.at("span").at(1).get<double>()};
    t.keyframes.push_back(std::move(d));
  }
  if (j.contains("warnings")) t.warnings = j["warnings"].get<std::vector<std::string>>();
  return t;
}

}  // namespace surgvoice
