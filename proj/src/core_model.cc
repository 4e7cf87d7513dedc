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

#include "surgvoice/core_model.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace surgvoice {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::array<Enum, N>& all) {
  for (Enum e : all) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(FunctionId f) {
  switch (f) {
    case FunctionId::kRealTimeAudio: return "real_time_audio";
    case FunctionId::kStt: return "stt";
    case FunctionId::kCorrectValidate: return "correct_validate";
    case FunctionId::kCommandReasoning: return "command_reasoning";
    case FunctionId::kIrAgent: return "ir_agent";
    case FunctionId::kIvAgent: return "iv_agent";
    case FunctionId::kArAgent: return "ar_agent";
    case FunctionId::kEnd: return "end";
  }
  return "end";
}

std::optional<FunctionId> function_from_string(std::string_view name) {
  return lookup(name, kAllFunctions);
}

std::string_view to_string(AgentId a) {
  switch (a) {
    case AgentId::kIr: return "ir_agent";
    case AgentId::kIv: return "iv_agent";
    case AgentId::kAr: return "ar_agent";
  }
  return "ir_agent";
}

std::string_view display_name(AgentId a) {
  switch (a) {
    case AgentId::kIr: return "information retrieval agent";
    case AgentId::kIv: return "image viewer agent";
    case AgentId::kAr: return "anatomy rendering agent";
  }
  return "information retrieval agent";
}

std::string_view short_name(AgentId a) {
  switch (a) {
    case AgentId::kIr: return "ir";
    case AgentId::kIv: return "iv";
    case AgentId::kAr: return "ar";
  }
  return "ir";
}

std::optional<AgentId> agent_from_string(std::string_view name) {
  const std::string n = lower(name);
  for (AgentId a : kAllAgents) {
    if (n == to_string(a) || n == short_name(a) || n == display_name(a)) return a;
  }
  return std::nullopt;
}

FunctionId agent_function(AgentId a) {
  switch (a) {
    case AgentId::kIr: return FunctionId::kIrAgent;
    case AgentId::kIv: return FunctionId::kIvAgent;
    case AgentId::kAr: return FunctionId::kArAgent;
  }
  return FunctionId::kIrAgent;
}

std::optional<AgentId> agent_of(FunctionId f) {
  switch (f) {
    case FunctionId::kIrAgent: return AgentId::kIr;
    case FunctionId::kIvAgent: return AgentId::kIv;
    case FunctionId::kArAgent: return AgentId::kAr;
    default: return std::nullopt;
  }
}

std::string_view status_text(Status s) {
  switch (s) {
    case Status::kIdle: return "Idle";
    case Status::kNoAudio: return "No audio recorded";
    case Status::kAudioRecorded: return "Audio recorded";
    case Status::kCommandTranscribed: return "Command transcribed";
    case Status::kLastCommandInvalid: return "Last command invalid, need new input";
    case Status::kCommandValid: return "Command valid";
    case Status::kAgentSelected: return "Agent selected";
    case Status::kAgentCompleted: return "Agent completed, workflow finished";
  }
  return "Idle";
}

std::optional<Status> status_from_text(std::string_view text) {
  for (Status s : kAllStatuses) {
    if (status_text(s) == text) return s;
  }
  return std::nullopt;
}

void GlobalMemory::append(std::string revised, AgentId agent) {
  if (revised.empty()) throw std::invalid_argument("revised command must be nonempty");
  history_.push_back({std::move(revised), agent});
}

std::vector<MemoryEntry> GlobalMemory::window(std::size_t k) const {
  if (k == 0) throw std::invalid_argument("memory window size must be >= 1");
  const std::size_t n = std::min(k, history_.size());
  return {history_.end() - static_cast<std::ptrdiff_t>(n), history_.end()};
}

std::optional<AgentId> GlobalMemory::last_agent() const {
  if (history_.empty()) return std::nullopt;
  return history_.back().agent;
}

std::vector<MemoryEntry> memory_window(const GlobalMemory& global, std::size_t k) {
  return global.window(k);
}

GlobalMemory append_memory(GlobalMemory global, std::string revised, AgentId agent) {
  global.append(std::move(revised), agent);
  return global;
}

void advance_clip(SessionState& state) {
  state.clip.index += 1;
  state.local = LocalMemory{};
  state.local.clip = state.clip;
  state.invalid_cycles = 0;
  state.status = Status::kIdle;
  state.current_function = FunctionId::kRealTimeAudio;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Plane plane) {
  switch (plane) {
    case Plane::kAxial: return "axial";
    case Plane::kCoronal: return "coronal";
    case Plane::kSagittal: return "sagittal";
  }
  return "axial";
}

std::optional<Plane> plane_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "axi") return Plane::kAxial;
  if (n == "cor") return Plane::kCoronal;
  if (n == "sag") return Plane::kSagittal;
  return lookup(n, kAllPlanes);
}

std::string_view to_string(DisplayMode mode) {
  switch (mode) {
    case DisplayMode::kNone: return "none";
    case DisplayMode::kSmallViews: return "small_views";
    case DisplayMode::kZoomView: return "zoom_view";
  }
  return "none";
}

std::optional<DisplayMode> display_mode_from_string(std::string_view name) {
  static constexpr std::array<DisplayMode, 3> kAll = {
      DisplayMode::kNone, DisplayMode::kSmallViews, DisplayMode::kZoomView};
  return lookup(name, kAll);
}

std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::kLLL: return "LLL";
    case Structure::kLUL: return "LUL";
    case Structure::kRLL: return "RLL";
    case Structure::kRML: return "RML";
    case Structure::kRUL: return "RUL";
    case Structure::kNodules: return "nodules";
    case Structure::kTracheaBronchia: return "trachea_bronchia";
  }
  return "nodules";
}

std::optional<Structure> structure_from_string(std::string_view label) {
  return lookup(label, kAllStructures);
}

std::string_view to_string(Viewpoint v) {
  switch (v) {
    case Viewpoint::kAnterior: return "anterior";
    case Viewpoint::kPosterior: return "posterior";
    case Viewpoint::kLeft: return "left";
    case Viewpoint::kRight: return "right";
    case Viewpoint::kSuperior: return "superior";
    case Viewpoint::kInferior: return "inferior";
    case Viewpoint::kSurgical: return "surgical";
  }
  return "surgical";
}

std::optional<Viewpoint> viewpoint_from_string(std::string_view name) {
  static constexpr std::array<Viewpoint, 7> kAll = {
      Viewpoint::kAnterior, Viewpoint::kPosterior, Viewpoint::kLeft,
      Viewpoint::kRight,    Viewpoint::kSuperior,  Viewpoint::kInferior,
      Viewpoint::kSurgical};
  return lookup(lower(name), kAll);
}

std::string_view to_string(Rotation r) {
  switch (r) {
    case Rotation::kStatic: return "static";
    case Rotation::kLeft: return "left";
    case Rotation::kRight: return "right";
    case Rotation::kUp: return "up";
    case Rotation::kDown: return "down";
    case Rotation::kHorizontal: return "horizontal";
    case Rotation::kVertical: return "vertical";
  }
  return "static";
}

std::optional<Rotation> rotation_from_string(std::string_view name) {
  static constexpr std::array<Rotation, 7> kAll = {
      Rotation::kStatic, Rotation::kLeft,       Rotation::kRight,   Rotation::kUp,
      Rotation::kDown,   Rotation::kHorizontal, Rotation::kVertical};
  return lookup(lower(name), kAll);
}

}  // namespace surgvoice
