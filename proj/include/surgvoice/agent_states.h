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

#ifndef SURGVOICE_AGENT_STATES_H_
#define SURGVOICE_AGENT_STATES_H_

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace surgvoice {

// ---------------------------------------------------------------------------
// Information retrieval overlay.

struct IrState {
  std::vector<bool> fields;  // one flag per manifest column
  std::string text;          // newline-joined overlay string

  bool operator==(const IrState&) const = default;
};

// ---------------------------------------------------------------------------
// CT image viewer.

enum class Plane { kAxial = 0, kCoronal = 1, kSagittal = 2 };
inline constexpr std::array<Plane, 3> kAllPlanes = {
    Plane::kAxial, Plane::kCoronal, Plane::kSagittal};

enum class DisplayMode { kNone, kSmallViews, kZoomView };

using SlicePositions = std::array<int, 3>;  // indexed by Plane

inline int& at(SlicePositions& p, Plane plane) {
  return p[static_cast<int>(plane)];
}
inline int at(const SlicePositions& p, Plane plane) {
  return p[static_cast<int>(plane)];
}

struct IvState {
  SlicePositions positions{0, 0, 0};
  DisplayMode mode = DisplayMode::kNone;
  Plane main_view = Plane::kAxial;

  bool operator==(const IvState&) const = default;
};

std::string_view to_string(Plane plane);
std::optional<Plane> plane_from_string(std::string_view name);
std::string_view to_string(DisplayMode mode);
std::optional<DisplayMode> display_mode_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// 3D anatomy rendering.

enum class Structure { kLLL, kLUL, kRLL, kRML, kRUL, kNodules, kTracheaBronchia };
inline constexpr std::array<Structure, 7> kAllStructures = {
    Structure::kLLL, Structure::kLUL,     Structure::kRLL,
    Structure::kRML, Structure::kRUL,     Structure::kNodules,
    Structure::kTracheaBronchia};

enum class Viewpoint {
  kAnterior,
  kPosterior,
  kLeft,
  kRight,
  kSuperior,
  kInferior,
  kSurgical
};

enum class Rotation { kStatic, kLeft, kRight, kUp, kDown, kHorizontal, kVertical };

using Vec3 = std::array<double, 3>;

struct ZoomFrame {
  Vec3 center{0, 0, 0};
  double scale = 1.0;
  int level = 0;

  bool operator==(const ZoomFrame&) const = default;
};

struct ArState {
  std::set<Structure> visible;
  Viewpoint view = Viewpoint::kSurgical;
  Rotation rotation = Rotation::kStatic;
  std::optional<Structure> target;
  ZoomFrame zoom;
  std::vector<ZoomFrame> zoom_stack;

  bool operator==(const ArState&) const = default;
};

std::string_view to_string(Structure s);
std::optional<Structure> structure_from_string(std::string_view label);
std::string_view to_string(Viewpoint v);
std::optional<Viewpoint> viewpoint_from_string(std::string_view name);
std::string_view to_string(Rotation r);
std::optional<Rotation> rotation_from_string(std::string_view name);

using AgentState = std::variant<IrState, IvState, ArState>;

}  // namespace surgvoice

#endif  // SURGVOICE_AGENT_STATES_H_
