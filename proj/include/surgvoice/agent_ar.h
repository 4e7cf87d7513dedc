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

#ifndef SURGVOICE_AGENT_AR_H_
#define SURGVOICE_AGENT_AR_H_

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surgvoice/agent_states.h"
#include "surgvoice/llm_gateway.h"
#include "surgvoice/timeline.h"

namespace surgvoice::ar {

struct StructureInfo {
  Structure label = Structure::kNodules;
  Vec3 centroid{0, 0, 0};  // mm
  Vec3 bbox_min{0, 0, 0};
  Vec3 bbox_max{0, 0, 0};
  bool is_lobe = false;
  bool contains_nodules = false;
  std::optional<std::string> mesh;  // accepted, unused
};

struct StructureManifest {
  std::vector<StructureInfo> structures;

  // Synthetic lung model with the nodule in the right lower lobe.
  static StructureManifest defaults();
  static StructureManifest load(const std::filesystem::path& path);
  // Throws SchemaError unless exactly the seven labels are present, unique,
  // and every centroid lies inside its bbox.
  static StructureManifest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const StructureInfo* find(Structure label) const;
  // Center of the union of all bounding boxes.
  Vec3 model_center() const;
};

// Camera orientation for a fixed viewpoint, in degrees.
struct CameraAngles {
  double azimuth = 0.0;
  double elevation = 0.0;
};
CameraAngles camera_for(Viewpoint v);

// "RUL", "right upper lobe", "airway", "right lung", "nodule", ... -> labels.
std::vector<Structure> resolve_structures(std::string_view phrase);
// "front" -> anterior, "surgeon's view" -> surgical, ...
std::optional<Viewpoint> resolve_view(std::string_view phrase);

enum class Action { kStaticView, kRotate, kZoomIn, kZoomOut, kRemove };
std::string_view to_string(Action a);
std::optional<Action> action_from_string(std::string_view s);

struct Decision {
  Action action = Action::kStaticView;
  std::set<Structure> add;
  std::set<Structure> remove;
  std::optional<Viewpoint> view;
  std::optional<Rotation> rotation;
  std::optional<Structure> target;
  bool reset = false;
};

// Reply format:
//   {"action": "ZOOM_IN" (or "action_probs"), "add": [...], "remove": [...],
//    "view": "anterior", "rotation": "left", "target": "RLL", "reset": false}
// Structure and view names go through the alias tables. Throws ParseError.
Decision parse_decision(std::string_view reply);

std::string build_prompt(std::string_view command, const ArState& state);

Decision determine_action(std::string_view command, const ArState& state,
                          LlmBackend& backend);

// Nodule-bearing lobes plus all non-lobe structures, surgical view, static,
// unit zoom on the model center.
ArState default_state(const StructureManifest& manifest);

// (visible ∪ add) \ remove
std::set<Structure> update_structures(const std::set<Structure>& visible,
                                      const std::set<Structure>& add,
                                      const std::set<Structure>& remove);

// Pushes the current zoom, centers on the target, doubles the scale.
// Throws UnknownStructure when the target is not in the manifest.
ArState zoom_in(const ArState& state, Structure target,
                const StructureManifest& manifest);
ArState zoom_in(const ArState& state, std::string_view target,
                const StructureManifest& manifest);

// Pops the zoom stack; a no-op at unit scale.
ArState zoom_out(const ArState& state);

inline constexpr double kZoomSeconds = 3.0;

struct Applied {
  ArState state;
  OverlayTimeline timeline;
};

// Order within one command: reset, structure edits, view, zoom transition
// (3 s), rotation (7 s or 6 s). Timeline samples past the clip are dropped.
Applied apply(const ArState& state, const Decision& decision,
              const StructureManifest& manifest,
              int fps = OverlayTimeline::kDefaultFps);

ScenePayload scene_of(const ArState& state, double angle_deg = 0.0);

nlohmann::json canonical_params(const Decision& d);

}  // namespace surgvoice::ar

#endif  // SURGVOICE_AGENT_AR_H_
