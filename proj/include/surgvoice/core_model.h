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

#ifndef SURGVOICE_CORE_MODEL_H_
#define SURGVOICE_CORE_MODEL_H_

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surgvoice/agent_states.h"

namespace surgvoice {

// Workflow and agent functions in canonical order. The order is used for
// argmax tie-breaking and must not change.
enum class FunctionId {
  kRealTimeAudio = 0,
  kStt,
  kCorrectValidate,
  kCommandReasoning,
  kIrAgent,
  kIvAgent,
  kArAgent,
  kEnd
};

inline constexpr std::array<FunctionId, 8> kAllFunctions = {
    FunctionId::kRealTimeAudio,   FunctionId::kStt,
    FunctionId::kCorrectValidate, FunctionId::kCommandReasoning,
    FunctionId::kIrAgent,         FunctionId::kIvAgent,
    FunctionId::kArAgent,         FunctionId::kEnd};

std::string_view to_string(FunctionId f);
std::optional<FunctionId> function_from_string(std::string_view name);

enum class AgentId { kIr, kIv, kAr };
inline constexpr std::array<AgentId, 3> kAllAgents = {AgentId::kIr, AgentId::kIv,
                                                      AgentId::kAr};

std::string_view to_string(AgentId a);  // "ir_agent", ...
std::string_view display_name(AgentId a);  // "information retrieval agent", ...
std::string_view short_name(AgentId a);  // "ir", "iv", "ar"
// Accepts "ir_agent", "ir", "IR", or the display name.
std::optional<AgentId> agent_from_string(std::string_view name);
FunctionId agent_function(AgentId a);
std::optional<AgentId> agent_of(FunctionId f);

enum class Status {
  kIdle,
  kNoAudio,
  kAudioRecorded,
  kCommandTranscribed,
  kLastCommandInvalid,
  kCommandValid,
  kAgentSelected,
  kAgentCompleted
};

inline constexpr std::array<Status, 8> kAllStatuses = {
    Status::kIdle,          Status::kNoAudio,
    Status::kAudioRecorded, Status::kCommandTranscribed,
    Status::kLastCommandInvalid, Status::kCommandValid,
    Status::kAgentSelected, Status::kAgentCompleted};

// Exact status strings shown to the orchestrator LLM.
std::string_view status_text(Status s);
std::optional<Status> status_from_text(std::string_view text);

// One 10-second video segment; each clip handles exactly one command.
struct ClipRef {
  static constexpr double kDurationS = 10.0;

  int index = 0;

  double start_s() const { return index * kDurationS; }
  double duration_s() const { return kDurationS; }
  bool operator==(const ClipRef&) const = default;
};

struct MemoryEntry {
  std::string revised;
  AgentId agent = AgentId::kIr;
  bool operator==(const MemoryEntry&) const = default;
};

// Append-only history of (revised command, agent) pairs. Reads go through
// window(), which exposes the most recent entries only.
class GlobalMemory {
 public:
  static constexpr std::size_t kDefaultWindow = 3;

  void append(std::string revised, AgentId agent);
  std::vector<MemoryEntry> window(std::size_t k = kDefaultWindow) const;
  std::optional<AgentId> last_agent() const;

  const std::vector<MemoryEntry>& history() const { return history_; }
  std::size_t size() const { return history_.size(); }
  bool operator==(const GlobalMemory&) const = default;

 private:
  std::vector<MemoryEntry> history_;
};

std::vector<MemoryEntry> memory_window(const GlobalMemory& global,
                                       std::size_t k = GlobalMemory::kDefaultWindow);
GlobalMemory append_memory(GlobalMemory global, std::string revised, AgentId agent);

struct LocalMemory {
  ClipRef clip;
  std::optional<std::string> raw_command;
  std::optional<std::string> revised_command;
  std::optional<bool> valid;
  std::optional<AgentId> agent;
  std::optional<AgentState> agent_state_snapshot;
  // Set once real_time_audio ran in this clip; distinguishes a silent clip
  // (captured, no text) from one where audio was never requested.
  bool audio_captured = false;

  bool operator==(const LocalMemory&) const = default;
};

struct SessionState {
  ClipRef clip;
  LocalMemory local;
  GlobalMemory global;
  Status status = Status::kIdle;
  int invalid_cycles = 0;
  int ic_max = 3;
  FunctionId current_function = FunctionId::kRealTimeAudio;
  std::map<AgentId, AgentState> agent_states;

  bool operator==(const SessionState&) const = default;
};

// Moves the session to the next clip: fresh local memory, IC reset, Idle.
void advance_clip(SessionState& state);

}  // namespace surgvoice

#endif  // SURGVOICE_CORE_MODEL_H_
