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

#include "surgvoice/orchestrator.h"

#include <set>

#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice {
namespace {

std::string_view definition(FunctionId f) {
  switch (f) {
    case FunctionId::kRealTimeAudio: return "record the surgeon's speech for the current clip";
    case FunctionId::kStt: return "transcribe the recorded speech into text";
    case FunctionId::kCorrectValidate:
      return "correct the transcribed command and decide whether it is valid";
    case FunctionId::kCommandReasoning: return "choose the agent that should run the command";
    case FunctionId::kIrAgent: return "show or hide patient information";
    case FunctionId::kIvAgent: return "display and navigate CT slices";
    case FunctionId::kArAgent: return "display and manipulate the 3D anatomy model";
    case FunctionId::kEnd: return "finish the workflow for this clip";
  }
  return "";
}

}  // namespace

std::vector<FunctionId> WorkflowTrace::executed() const {
  std::vector<FunctionId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.chosen);
  return out;
}

std::string build_orchestrator_prompt(const SessionState& state) {
  std::string p;
  p += "You are the workflow orchestrator of a voice assistant for robotic lung surgery. "
       "Given the current status, assign a probability to each function for being the next "
       "one to run.\n\n";
  p += "Functions:\n";
  for (FunctionId f : kAllFunctions) {
    p += "- " + std::string(to_string(f)) + ": " + std::string(definition(f)) + "\n";
  }
  p += "\nWorkflow decision rules:\n"
       "- Idle: run real_time_audio.\n"
       "- Audio recorded or No audio recorded: run stt.\n"
       "- Command transcribed: run correct_validate.\n"
       "- Command valid: run command_reasoning.\n"
       "- Agent selected: run the selected agent.\n"
       "- Last command invalid, need new input: return to real_time_audio; after " +
       std::to_string(state.ic_max) + " invalid loops the workflow ends.\n"
       "- Agent completed, workflow finished: run end.\n\n";
  p += "Current status: \"" + std::string(status_text(state.status)) + "\"\n";
  if (state.status == Status::kAgentSelected && state.local.agent) {
    p += "Selected agent: " + std::string(to_string(*state.local.agent)) + "\n";
  }
  p += "\nOutput JSON only, one probability per function, e.g. {\"stt\": 0.9, "
       "\"correct_validate\": 0.1}\n";
  return p;
}

FunctionProposal complete_missing_functions(const std::map<FunctionId, double>& partial,
                                            ProposalSource source) {
  FunctionProposal p;
  p.source = source;
  for (FunctionId f : kAllFunctions) {
    auto it = partial.find(f);
    p.probs[f] = it == partial.end() ? 0.0 : it->second;
  }
  return p;
}

FunctionId fallback_function(const SessionState& state) {
  switch (state.status) {
    case Status::kIdle: return FunctionId::kRealTimeAudio;
    case Status::kAudioRecorded:
    case Status::kNoAudio: return FunctionId::kStt;
    case Status::kCommandTranscribed: return FunctionId::kCorrectValidate;
    case Status::kCommandValid: return FunctionId::kCommandReasoning;
    case Status::kAgentSelected:
      return state.local.agent ? agent_function(*state.local.agent) : FunctionId::kCommandReasoning;
    case Status::kLastCommandInvalid: return FunctionId::kRealTimeAudio;
    case Status::kAgentCompleted: return FunctionId::kEnd;
  }
  return FunctionId::kEnd;
}

FunctionId select_next_function(const FunctionProposal& proposal, const SessionState& state) {
  FunctionId best = FunctionId::kEnd;
  double best_p = 0.0;
  for (FunctionId f : kAllFunctions) {
    auto it = proposal.probs.find(f);
    const double p = it == proposal.probs.end() ? 0.0 : it->second;
    if (p > best_p) {
      best_p = p;
      best = f;
    }
  }
  if (best_p <= 0.0) return fallback_function(state);
  return best;
}

RuleOutcome apply_decision_rules(SessionState& state, FunctionId chosen) {
  RuleOutcome out{chosen, false, false};
  if (state.status == Status::kLastCommandInvalid) {
    state.invalid_cycles += 1;
    if (state.invalid_cycles > state.ic_max) {
      out.function = FunctionId::kEnd;
      out.failure = true;
    } else {
      out.function = FunctionId::kRealTimeAudio;
    }
  } else if (state.status == Status::kAgentCompleted) {
    out.function = FunctionId::kEnd;
  }
  out.overridden = out.function != chosen;
  return out;
}

bool flow_matches_reference(std::span<const FunctionId> executed) {
  // (audio stt correct)+ reasoning agent end
  std::size_t i = 0;
  int rounds = 0;
  while (i + 2 < executed.size() && executed[i] == FunctionId::kRealTimeAudio &&
         executed[i + 1] == FunctionId::kStt && executed[i + 2] == FunctionId::kCorrectValidate) {
    i += 3;
    ++rounds;
  }
  if (rounds == 0 || executed.size() != i + 3) return false;
  return executed[i] == FunctionId::kCommandReasoning && agent_of(executed[i + 1]).has_value() &&
         executed[i + 2] == FunctionId::kEnd;
}

ClipResult run_clip(SessionState state, LlmBackend& backend, const StageRegistry& registry,
                    ClipContext& context, const OrchestratorConfig& config) {
  WorkflowTrace trace;
  trace.clip = state.clip.index;
  const std::set<FunctionId> expected(kAllFunctions.begin(), kAllFunctions.end());

  for (int step = 0;; ++step) {
    TraceStep ts;
    ts.step = step;
    ts.status_before = state.status;

    if (step >= config.max_steps) {
      ts.proposal = complete_missing_functions({}, ProposalSource::kFallback);
      ts.selected = FunctionId::kEnd;
      ts.chosen = FunctionId::kEnd;
      ts.overridden = true;
      trace.steps.push_back(ts);
      trace.failed = true;
      context.notes.push_back("step budget of " + std::to_string(config.max_steps) +
                              " exhausted");
      break;
    }

    ChatRequest req;
    req.label = "orchestrator";
    req.user_prompt = build_orchestrator_prompt(state);
    try {
      const ChatResponse res = backend.chat(req);
      ts.proposal = complete_missing_functions(parse_probability_json(res.text, expected));
    } catch (const ParseError& e) {
      spdlog::warn("orchestrator reply unusable ({}); using the rule table", e.what());
      ts.proposal = complete_missing_functions({}, ProposalSource::kFallback);
    }
    ts.selected = select_next_function(ts.proposal, state);

    const int ic_before = state.invalid_cycles;
    const RuleOutcome rule = apply_decision_rules(state, ts.selected);
    if (state.invalid_cycles > ic_before) trace.ic_events.push_back(step);
    ts.chosen = rule.function;
    ts.overridden = rule.overridden;
    trace.steps.push_back(ts);

    if (rule.function == FunctionId::kEnd) {
      trace.failed = rule.failure;
      break;
    }

    state.current_function = rule.function;
    auto it = registry.find(rule.function);
    if (it == registry.end()) {
      context.notes.push_back("no stage bound to " + std::string(to_string(rule.function)));
      state.status = Status::kLastCommandInvalid;
      continue;
    }
    try {
      state.status = it->second(state, context);
    } catch (const StageFailure& e) {
      context.notes.push_back(e.what());
      state.status = Status::kLastCommandInvalid;
    } catch (const SourceExhausted& e) {
      context.notes.push_back(e.what());
      ts.step = step + 1;
      ts.status_before = state.status;
      ts.proposal = complete_missing_functions({}, ProposalSource::kFallback);
      ts.selected = FunctionId::kEnd;
      ts.chosen = FunctionId::kEnd;
      ts.overridden = true;
      trace.steps.push_back(ts);
      trace.failed = true;
      break;
    }
  }
  return ClipResult{std::move(state), std::move(trace)};
}

nlohmann::json to_json(const FunctionProposal& p) {
  nlohmann::json probs = nlohmann::json::object();
  for (const auto& [f, v] : p.probs) probs[std::string(to_string(f))] = v;
  return {{"probs", probs}, {"source", p.source == ProposalSource::kLlm ? "llm" : "fallback"}};
}

nlohmann::json to_json(const WorkflowTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"clip", trace.clip},
                     {"step", s.step},
                     {"status_before", status_text(s.status_before)},
                     {"proposal", to_json(s.proposal)},
                     {"selected", to_string(s.selected)},
                     {"chosen", to_string(s.chosen)},
                     {"overridden", s.overridden}});
  }
  return {{"clip", trace.clip},
          {"steps", steps},
          {"ic_events", trace.ic_events},
          {"failed", trace.failed}};
}

std::string trace_to_jsonl(const WorkflowTrace& trace) {
  std::string out;
  const nlohmann::json j = to_json(trace);
  for (const auto& step : j["steps"]) {
    out += step.dump();
    out += '\n';
  }
  return out;
}

}  // namespace surgvoice
