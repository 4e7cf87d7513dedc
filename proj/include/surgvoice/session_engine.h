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

#ifndef SURGVOICE_SESSION_ENGINE_H_
#define SURGVOICE_SESSION_ENGINE_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgvoice/agent_ar.h"
#include "surgvoice/agent_ir.h"
#include "surgvoice/agent_iv.h"
#include "surgvoice/core_model.h"
#include "surgvoice/llm_gateway.h"
#include "surgvoice/moem_eval.h"
#include "surgvoice/orchestrator.h"
#include "surgvoice/workflow_stages.h"

namespace surgvoice {

// Read-only data shared by every stage of a session.
struct Resources {
  ir::ColumnManifest columns = ir::ColumnManifest::defaults();
  ir::PatientRecord record = ir::sample_record();
  std::shared_ptr<const iv::Volume> volume;  // optional; bounds used when absent
  SlicePositions ct_bounds{512, 512, 512};
  ar::StructureManifest structures = ar::StructureManifest::defaults();
  CorrectionRules rules = CorrectionRules::defaults();
  CommandVocabulary vocabulary = CommandVocabulary::defaults(ir::ColumnManifest::defaults());
  int fps = OverlayTimeline::kDefaultFps;
  double ir_threshold = ir::kDefaultThreshold;
  int ic_max = 3;
  OrchestratorConfig orchestrator;

  static Resources defaults();
  // Keeps ct_bounds in step with the volume.
  void set_volume(iv::Volume volume);
};

// Stages for every FunctionId, backed by the given model backend.
StageRegistry make_registry(const Resources& resources, LlmBackend& backend);

// Agent states before any command: IR hidden, IV at middle slices with no
// views, AR with nothing displayed.
std::map<AgentId, AgentState> initial_agent_states(const Resources& resources);
SessionState initial_session_state(const Resources& resources);

struct CommandResult {
  WorkflowTrace trace;
  std::optional<Transcript> transcript;
  std::optional<ValidationResult> validation;
  std::optional<AgentOutcome> outcome;
  std::vector<std::string> notes;
  eval::CommandRun run;
};

// One session: consecutive clips sharing memory and agent states.
class Session {
 public:
  explicit Session(const Resources& resources);

  // Runs the next clip, pulling transcripts from source.
  CommandResult process(TranscriptSource& source, LlmBackend& backend);

  const SessionState& state() const { return state_; }
  const std::vector<WorkflowTrace>& traces() const { return traces_; }
  void reset();

 private:
  const Resources* resources_;
  SessionState state_;
  std::vector<WorkflowTrace> traces_;
  bool fresh_ = true;
};

// Transcripts for one dataset record: failed attempts, then the final one.
std::vector<Transcript> record_transcripts(const eval::CommandRecord& record);

struct EvalRun {
  std::vector<eval::StageOutcomeRow> rows;
  std::vector<WorkflowTrace> traces;
};

// Runs every record through one session in dataset order and scores it.
EvalRun run_dataset(const eval::Dataset& dataset, LlmBackend& backend,
                    const Resources& resources);

// Mock script answering every request of run_dataset with the gold
// annotations: orchestrator replies follow the status table, correction
// returns gold_revised (failed attempts are judged invalid), reasoning
// returns agent_gold, action determination returns gold action/params.
MockScript gold_mock_script(const eval::Dataset& dataset);

nlohmann::json to_json(const SessionState& state);
nlohmann::json to_json(const AgentState& state);
nlohmann::json to_json(const CommandResult& result);

}  // namespace surgvoice

#endif  // SURGVOICE_SESSION_ENGINE_H_
