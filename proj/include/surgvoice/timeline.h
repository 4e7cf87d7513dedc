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

#ifndef SURGVOICE_TIMELINE_H_
#define SURGVOICE_TIMELINE_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "surgvoice/agent_states.h"
#include "surgvoice/core_model.h"

namespace surgvoice {

enum class DirectiveKind {
  kTextOverlay,
  kClearOverlay,
  kCtSmallViews,
  kCtZoomView,
  kScene3d
};

enum class Anchor { kNone, kTopRight, kRightSide, kCenter };

std::string_view to_string(DirectiveKind k);
std::string_view to_string(Anchor a);

struct TextPayload {
  std::string text;
  bool operator==(const TextPayload&) const = default;
};

struct SlicePayload {
  SlicePositions positions{0, 0, 0};
  std::optional<Plane> main_view;
  bool operator==(const SlicePayload&) const = default;
};

struct ScenePayload {
  std::vector<Structure> visible;
  Viewpoint view = Viewpoint::kSurgical;
  Rotation rotation = Rotation::kStatic;
  double angle_deg = 0.0;
  Vec3 zoom_center{0, 0, 0};
  double zoom_scale = 1.0;
  int zoom_level = 0;
  bool operator==(const ScenePayload&) const = default;
};

using Payload = std::variant<std::monostate, TextPayload, SlicePayload, ScenePayload>;

struct Span {
  double t0_s = 0.0;
  double t1_s = ClipRef::kDurationS;
  bool operator==(const Span&) const = default;
};

// One overlay sample. Its span starts at the sample time and lasts until the
// next sample (or the end of the clip).
struct OverlayDirective {
  DirectiveKind kind = DirectiveKind::kClearOverlay;
  Anchor anchor = Anchor::kNone;
  Payload payload;
  Span span;
  bool operator==(const OverlayDirective&) const = default;
};

struct OverlayTimeline {
  static constexpr int kDefaultFps = 30;

  int fps = kDefaultFps;
  std::vector<OverlayDirective> keyframes;
  std::vector<std::string> warnings;

  bool operator==(const OverlayTimeline&) const = default;
};

// round(duration_s * fps), at least 1.
int sample_count(double duration_s, int fps);

// Linear ramp with exact endpoints: sample i is from + (to - from) * i / (n - 1)
// for n = sample_count(duration_s, fps). A single-sample ramp is just `to`.
// With round_to_integer, every component is rounded half away from zero.
std::vector<std::vector<double>> interpolate_linear(std::span<const double> from,
                                                    std::span<const double> to,
                                                    double duration_s, int fps,
                                                    bool round_to_integer = false);

// Seconds taken by a rotation mode: 7 for left/right/up/down (3 s out, 1 s
// hold, 3 s back), 6 for a full horizontal/vertical turn.
double rotation_duration_s(Rotation mode);

// Angle in degrees at time t for a rotation mode.
double rotation_angle_at(Rotation mode, double t_s);

// Angle samples at t = k / fps for k = 1..n. Throws std::invalid_argument for
// Rotation::kStatic.
std::vector<double> rotation_profile(Rotation mode, int fps);

// Appends samples to a timeline, offsetting their times, then fixes spans.
class TimelineBuilder {
 public:
  explicit TimelineBuilder(int fps = OverlayTimeline::kDefaultFps);

  // Adds a directive starting at t_s (seconds from clip start).
  void add(double t_s, DirectiveKind kind, Anchor anchor, Payload payload);
  void warn(std::string message);
  int fps() const { return timeline_.fps; }

  // Drops samples at or past the clip end (with a warning) and sets every
  // span end to the next sample time or the clip end.
  OverlayTimeline finish(double clip_s = ClipRef::kDurationS) &&;

 private:
  OverlayTimeline timeline_;
};

nlohmann::json to_json(const OverlayDirective& d);
nlohmann::json to_json(const OverlayTimeline& t);
OverlayTimeline timeline_from_json(const nlohmann::json& j);

}  // namespace surgvoice

#endif  // SURGVOICE_TIMELINE_H_
