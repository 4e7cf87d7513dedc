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

#ifndef SURGVOICE_AGENT_IV_H_
#define SURGVOICE_AGENT_IV_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "surgvoice/agent_states.h"
#include "surgvoice/llm_gateway.h"
#include "surgvoice/timeline.h"

namespace surgvoice::iv {

// Anatomical axes. Grid axes are mapped onto these by Volume::axis_map.
//   kLeftRight: normal of the sagittal plane, increasing toward patient left
//   kAntPost:   normal of the coronal plane, increasing toward posterior
//   kInfSup:    normal of the axial plane, increasing toward superior
enum class Axis { kLeftRight = 0, kAntPost = 1, kInfSup = 2 };

// Grid axis (0=x, 1=y, 2=z) holding each anatomical axis.
struct AxisMap {
  std::array<int, 3> grid_axis{0, 1, 2};  // indexed by Axis
  bool operator==(const AxisMap&) const = default;
};

struct Volume {
  std::array<int, 3> dims{1, 1, 1};         // grid (nx, ny, nz)
  std::array<double, 3> spacing{1, 1, 1};   // mm
  std::vector<std::int16_t> voxels;         // x fastest
  AxisMap axis_map;

  std::int16_t at(int x, int y, int z) const {
    return voxels[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x];
  }
  // Number of slices along a plane's normal.
  int extent(Plane plane) const;
  SlicePositions bounds() const;

  // f(x, y, z) = z, or another grid axis.
  static Volume gradient(std::array<int, 3> dims, int axis = 2);

  // First line: JSON header {"dims", "spacing", "dtype", "axis_map"}; then
  // the little-endian voxel blob. dtype is "int16" or "uint8".
  static Volume load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Image2D {
  int rows = 0;
  int cols = 0;
  std::vector<std::int16_t> pixels;  // row-major

  std::int16_t at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * cols + c];
  }
};

// Orthogonal slice. Orientation: axial seen from inferior (anterior up,
// patient right on image left), coronal from anterior (superior up, patient
// right on image left), sagittal from the left (superior up, anterior on
// image left). Throws OutOfBounds.
Image2D slice_volume(const Volume& volume, Plane plane, int index);

enum class Action { kShowMove, kZoomInMove, kZoomOut, kRemove };
std::string_view to_string(Action a);
std::optional<Action> action_from_string(std::string_view s);

struct Delta {
  int value = 0;
  bool operator==(const Delta&) const = default;
};
struct Absolute {
  int value = 0;
  bool operator==(const Absolute&) const = default;
};
enum class Named { kMin, kMiddle, kMax };
using PlaneTarget = std::variant<Delta, Absolute, Named>;

struct Decision {
  Action action = Action::kShowMove;
  std::array<std::optional<PlaneTarget>, 3> targets;  // indexed by Plane
  std::optional<Plane> main_view;
  bool reset = false;
};

inline constexpr int kDefaultStep = 10;

// Direction word -> (plane, sign): right/left on sagittal, up/down on axial,
// forward/front/backward/back/posterior on coronal.
std::optional<std::pair<Plane, int>> direction(std::string_view word);

// Reply format:
//   {"action": "SHOW_MOVE" | ... , or "action_probs": {...},
//    "moves": {"coronal": {"delta": 30} | {"to": 200} | {"to": "middle"}},
//    "directions": ["front", "front", "front"],
//    "main_view": "axial", "reset": false}
// Direction words each add kDefaultStep on their plane. Throws ParseError.
Decision parse_decision(std::string_view reply);

std::string build_prompt(std::string_view command, const IvState& state,
                         const SlicePositions& bounds);

Decision determine_action(std::string_view command, const IvState& state,
                          const SlicePositions& bounds, LlmBackend& backend);

// Middle slices, nothing displayed.
IvState default_state(const SlicePositions& bounds);

// Applies relative/absolute/named targets and clamps to [0, bound - 1].
SlicePositions update_positions(const SlicePositions& p, const Decision& decision,
                                const SlicePositions& bounds);

inline constexpr double kMoveSeconds = 5.0;

struct Applied {
  IvState state;
  OverlayTimeline timeline;
};

Applied apply(const IvState& state, const Decision& decision,
              const SlicePositions& bounds, int fps = OverlayTimeline::kDefaultFps);

// {"moves": {plane: {"delta"|"to": ...}}, "main_view": ..., "reset": ...}
nlohmann::json canonical_params(const Decision& d);

}  // namespace surgvoice::iv

#endif  // SURGVOICE_AGENT_IV_H_
