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

#include <doctest.h>

#include <array>
#include <cmath>

#include "surgvoice/core_model.h"
#include "surgvoice/timeline.h"

namespace surgvoice {
namespace {

TEST_CASE("function, agent, and status names round-trip") {
  for (FunctionId f : kAllFunctions) {
    auto back = function_from_string(to_string(f));
    REQUIRE(back);
    CHECK(*back == f);
  }
  for (AgentId a : kAllAgents) {
    CHECK(agent_from_string(to_string(a)) == a);
    CHECK(agent_from_string(short_name(a)) == a);
    CHECK(agent_from_string(display_name(a)) == a);
    CHECK(agent_of(agent_function(a)) == a);
  }
  for (Status s : kAllStatuses) CHECK(status_from_text(status_text(s)) == s);
  CHECK_FALSE(function_from_string("stapler"));
  CHECK_FALSE(agent_of(FunctionId::kStt));
  CHECK(agent_from_string("IR") == AgentId::kIr);
}

TEST_CASE("structure, viewpoint, rotation, and plane names round-trip") {
  for (Structure s : kAllStructures) CHECK(structure_from_string(to_string(s)) == s);
  for (Plane p : kAllPlanes) CHECK(plane_from_string(to_string(p)) == p);
  for (auto v : {Viewpoint::kAnterior, Viewpoint::kPosterior, Viewpoint::kLeft, Viewpoint::kRight,
                 Viewpoint::kSuperior, Viewpoint::kInferior, Viewpoint::kSurgical}) {
    CHECK(viewpoint_from_string(to_string(v)) == v);
  }
  for (auto r : {Rotation::kStatic, Rotation::kLeft, Rotation::kRight, Rotation::kUp,
                 Rotation::kDown, Rotation::kHorizontal, Rotation::kVertical}) {
    CHECK(rotation_from_string(to_string(r)) == r);
  }
}

TEST_CASE("memory window keeps the three most recent entries, oldest first") {
  GlobalMemory m;
  CHECK(memory_window(m).empty());
  CHECK_FALSE(m.last_agent());
  m = append_memory(m, "Show patient information", AgentId::kIr);
  m = append_memory(m, "Coronal plus 100", AgentId::kIv);
  m = append_memory(m, "Zoom in", AgentId::kAr);
  m = append_memory(m, "Zoom out", AgentId::kAr);
  const auto w = memory_window(m);
  REQUIRE(w.size() == 3);
  CHECK(w[0].revised == "Coronal plus 100");
  CHECK(w[2].revised == "Zoom out");
  CHECK(m.size() == 4);
  CHECK(m.last_agent() == AgentId::kAr);
  CHECK(memory_window(m, 1).front().revised == "Zoom out");
}

TEST_CASE("advance_clip resets the clip-local state") {
  SessionState s;
  s.status = Status::kAgentCompleted;
  s.invalid_cycles = 2;
  s.local.raw_command = "Zoom in";
  s.global.append("Zoom in", AgentId::kAr);
  advance_clip(s);
  CHECK(s.clip.index == 1);
  CHECK(s.local.clip.index == 1);
  CHECK(s.status == Status::kIdle);
  CHECK(s.invalid_cycles == 0);
  CHECK_FALSE(s.local.raw_command);
  CHECK(s.global.size() == 1);
  CHECK(s.clip.start_s() == doctest::Approx(10.0));
}

TEST_CASE("linear interpolation emits round(d*fps) samples with exact endpoints") {
  const std::array<double, 3> from{256, 256, 256};
  const std::array<double, 3> to{256, 356, 230};
  const auto s = interpolate_linear(from, to, 5.0, 30, true);
  REQUIRE(s.size() == 150);
  CHECK(s.front() == std::vector<double>{256, 256, 256});
  CHECK(s.back() == std::vector<double>{256, 356, 230});
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i][1] >= s[i - 1][1]);
  for (const auto& v : s) CHECK(v[1] == std::round(v[1]));

  CHECK(sample_count(0.01, 30) == 1);
  const auto one = interpolate_linear(from, to, 0.01, 30);
  REQUIRE(one.size() == 1);
  CHECK(one[0][2] == 230);
  CHECK_THROWS_AS(interpolate_linear(from, std::array<double, 2>{1, 2}, 1.0, 30),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_count(1.0, 0), std::invalid_argument);
}

TEST_CASE("rotation profiles follow the out-hold-back timing") {
  const auto left = rotation_profile(Rotation::kLeft, 30);
  REQUIRE(left.size() == 210);
  CHECK(left[89] == doctest::Approx(30.0));
  CHECK(left[119] == doctest::Approx(30.0));
  CHECK(left.back() == doctest::Approx(0.0));
  double peak = 0;
  for (double a : left) peak = std::max(peak, a);
  CHECK(peak == doctest::Approx(30.0));

  const auto turn = rotation_profile(Rotation::kHorizontal, 30);
  REQUIRE(turn.size() == 180);
  CHECK(turn.back() == doctest::Approx(360.0));
  CHECK(rotation_duration_s(Rotation::kVertical) == 6.0);
  CHECK(rotation_duration_s(Rotation::kDown) == 7.0);
  CHECK_THROWS_AS(rotation_profile(Rotation::kStatic, 30), std::invalid_argument);
}

TEST_CASE("timeline builder truncates samples past the clip and chains spans") {
  TimelineBuilder tb(30);
  tb.add(0.0, DirectiveKind::kTextOverlay, Anchor::kTopRight, TextPayload{"a"});
  tb.add(4.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
  tb.add(10.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
  tb.add(12.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
  const OverlayTimeline t = std::move(tb).finish();
  REQUIRE(t.keyframes.size() == 2);
  CHECK(t.keyframes[0].span == Span{0.0, 4.0});
  CHECK(t.keyframes[1].span == Span{4.0, 10.0});
  REQUIRE(t.warnings.size() == 1);

  TimelineBuilder bad(30);
  bad.add(1.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
  CHECK_THROWS_AS(bad.add(1.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{}),
                  std::logic_error);
}

TEST_CASE("timeline JSON round-trips every payload kind") {
  TimelineBuilder tb(30);
  tb.add(0.0, DirectiveKind::kTextOverlay, Anchor::kTopRight, TextPayload{"Sex/Age: M/63"});
  tb.add(1.0, DirectiveKind::kCtZoomView, Anchor::kCenter,
         SlicePayload{{256, 300, 256}, Plane::kCoronal});
  ScenePayload scene;
  scene.visible = {Structure::kRLL, Structure::kNodules};
  scene.rotation = Rotation::kLeft;
  scene.angle_deg = 12.5;
  scene.zoom_scale = 2.0;
  scene.zoom_level = 1;
  tb.add(2.0, DirectiveKind::kScene3d, Anchor::kRightSide, scene);
  tb.add(3.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
  const OverlayTimeline t = std::move(tb).finish();
  CHECK(timeline_from_json(to_json(t)) == t);
}

}  // namespace
}  // namespace surgvoice
