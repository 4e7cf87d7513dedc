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

#ifndef SURGVOICE_ORCHESTRATOR_H_
#define SURGVOICE_ORCHESTRATOR_H_

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgvoice/core_model.h"
#include "surgvoice/llm_gateway.h"
#include "surgvoice/timeline.h"
#include "surgvoice/workflow_stages.h"

namespace surgvoice {

enum class ProposalSource { kLlm, kFallback };

struct FunctionProposal {
  std::map<FunctionId, double> probs;
  ProposalSource source = ProposalSource::kLlm;

  bool operator==(const FunctionProposal&) const = default;
};

// What the executed task agent did in this clip.
struct AgentOutcome {
  AgentId agent = AgentId::kIr;
  std::string action;        // e.g. "SHOW", "ZOOM_IN_MOVE"
  nlohmann::json params;     // canonical parameter form
  OverlayTimeline timeline;
};

// Per-clip scratch space shared by the stages.
struct ClipContext {
  TranscriptSource* source = nullptr;
  std::optional<Transcript> pending;          // captured, not yet transcribed
  std::optional<Transcript> transcript;       // last transcribed attempt
  std::optional<ValidationResult> validation;
  std::optional<AgentOutcome> outcome;
  std::vector<std::string> notes;
};

// A stage runs one function and returns the status to report next.
// Throwing StageFailure sends the clip into the invalid loop.
using Stage = std::function<Status(SessionState&, ClipContext&)>;
using StageRegistry = std::map<FunctionId, Stage>;

struct TraceStep {
  int step = 0;
  Status status_before = Status::kIdle;
  FunctionProposal proposal;
  FunctionId selected = FunctionId::kEnd;  // after the selection rule
  FunctionId chosen = FunctionId::kEnd;    // after the decision rules
  bool overridden = false;

  bool operator==(const TraceStep&) const = default;
};

struct WorkflowTrace {
  int clip = 0;
  std::vector<TraceStep> steps;
  // Orchestrator step index at which each invalid cycle was entered.
  std::vector<int> ic_events;
  bool failed = false;

  // Functions in execution order, ending with kEnd.
  std::vector<FunctionId> executed() const;
  bool operator==(const WorkflowTrace&) const = default;
};

struct OrchestratorConfig {
  int max_steps = 32;
};

std::string build_orchestrator_prompt(const SessionState& state);

// Absent functions get probability 0; present values are kept.
FunctionProposal complete_missing_functions(const std::map<FunctionId, double>& partial,
                                            ProposalSource source = ProposalSource::kLlm);

// Status -> function table mirroring the decision rules. Used when the
// proposal carries no positive probability.
FunctionId fallback_function(const SessionState& state);

// argmax over the complete proposal; ties go to the earliest function in
// canonical order. An all-zero proposal defers to fallback_function.
FunctionId select_next_function(const FunctionProposal& proposal, const SessionState& state);

struct RuleOutcome {
  FunctionId function = FunctionId::kEnd;
  bool overridden = false;
  bool failure = false;
};

// Hard workflow rules:
//   last command invalid -> real_time_audio and one more invalid cycle, or
//                           end with failure once the cycle count passes ic_max
//   agent completed      -> end
// Mutates state.invalid_cycles.
RuleOutcome apply_decision_rules(SessionState& state, FunctionId chosen);

// audio -> stt -> correct_validate, repeated, then command_reasoning ->
// one agent -> end.
bool flow_matches_reference(std::span<const FunctionId> executed);

struct ClipResult {
  SessionState state;
  WorkflowTrace trace;
};

// Drives one clip until `end`. Transport and mock-script errors propagate;
// unparseable orchestrator replies fall back to the rule table.
ClipResult run_clip(SessionState state, LlmBackend& backend, const StageRegistry& registry,
                    ClipContext& context, const OrchestratorConfig& config = {});

nlohmann::json to_json(const FunctionProposal& p);
// One object per step: clip, step, status_before, proposal, chosen, overridden.
std::string trace_to_jsonl(const WorkflowTrace& trace);
nlohmann::json to_json(const WorkflowTrace& trace);

}  // namespace surgvoice

#endif  // SURGVOICE_ORCHESTRATOR_H_
