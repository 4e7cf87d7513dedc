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

#include "surgvoice/session_engine.h"

#include <map>
#include <utility>

#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice {
namespace {

bool is_select(const ClipContext& ctx) {
  return ctx.validation && parse_select_agent_command(ctx.validation->revised).has_value();
}

// Redraws an agent's current state without changing it.
OverlayTimeline redraw(const AgentState& state, int fps) {
  TimelineBuilder tb(fps);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IrState>) {
          if (s.text.empty()) {
            tb.add(0.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
          } else {
            tb.add(0.0, DirectiveKind::kTextOverlay, Anchor::kTopRight, TextPayload{s.text});
          }
        } else if constexpr (std::is_same_v<T, IvState>) {
          switch (s.mode) {
            case DisplayMode::kNone:
              tb.add(0.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
              break;
            case DisplayMode::kSmallViews:
              tb.add(0.0, DirectiveKind::kCtSmallViews, Anchor::kRightSide,
                     SlicePayload{s.positions, std::nullopt});
              break;
            case DisplayMode::kZoomView:
              tb.add(0.0, DirectiveKind::kCtZoomView, Anchor::kCenter,
                     SlicePayload{s.positions, s.main_view});
              break;
          }
        } else {
          if (s.visible.empty()) {
            tb.add(0.0, DirectiveKind::kClearOverlay, Anchor::kNone, std::monostate{});
          } else {
            tb.add(0.0, DirectiveKind::kScene3d, Anchor::kTopRight, ar::scene_of(s));
          }
        }
      },
      state);
  return std::move(tb).finish();
}

Stage agent_stage(AgentId agent, const Resources& res, LlmBackend& backend) {
  return [agent, &res, &backend](SessionState& state, ClipContext& ctx) -> Status {
    if (!ctx.validation || !ctx.validation->valid) {
      throw StageFailure("agent called without a valid command");
    }
    if (state.local.agent != agent) {
      throw StageFailure(std::string(to_string(agent)) + " was not the selected agent");
    }
    const std::string& command = ctx.validation->revised;
    AgentState& slot = state.agent_states[agent];
    AgentOutcome outcome;
    outcome.agent = agent;

    if (is_select(ctx)) {
      outcome.action = "SELECT";
      outcome.params = nlohmann::json::object();
      outcome.timeline = redraw(slot, res.fps);
    } else {
      switch (agent) {
        case AgentId::kIr: {
          const auto d = ir::determine_action(command, res.columns, backend);
          auto applied =
              ir::apply(std::get<IrState>(slot), d, res.columns, res.record, res.ir_threshold);
          TimelineBuilder tb(res.fps);
          tb.add(0.0, applied.directive.kind, applied.directive.anchor, applied.directive.payload);
          outcome.action = std::string(ir::to_string(d.action));
          outcome.params = ir::canonical_params(d, res.columns, res.ir_threshold);
          outcome.timeline = std::move(tb).finish();
          slot = std::move(applied.state);
          break;
        }
        case AgentId::kIv: {
          const auto& cur = std::get<IvState>(slot);
          const auto d = iv::determine_action(command, cur, res.ct_bounds, backend);
          auto applied = iv::apply(cur, d, res.ct_bounds, res.fps);
          outcome.action = std::string(iv::to_string(d.action));
          outcome.params = iv::canonical_params(d);
          outcome.timeline = std::move(applied.timeline);
          slot = std::move(applied.state);
          break;
        }
        case AgentId::kAr: {
          const auto& cur = std::get<ArState>(slot);
          const auto d = ar::determine_action(command, cur, backend);
          ar::Applied applied;
          try {
            applied = ar::apply(cur, d, res.structures, res.fps);
          } catch (const UnknownStructure& e) {
            throw StageFailure(e.what());
          }
          outcome.action = std::string(ar::to_string(d.action));
          outcome.params = ar::canonical_params(d);
          outcome.timeline = std::move(applied.timeline);
          slot = std::move(applied.state);
          break;
        }
      }
    }
    state.local.agent_state_snapshot = slot;
    state.global.append(command, agent);
    ctx.outcome = std::move(outcome);
    return Status::kAgentCompleted;
  };
}

void add_entry(std::map<std::pair<std::string, std::string>, std::size_t>& index,
               MockScript& script, const std::string& label, const std::string& match,
               const std::string& response) {
  const auto key = std::make_pair(label, match);
  auto it = index.find(key);
  if (it == index.end()) {
    index.emplace(key, script.entries.size());
    script.entries.push_back(MockEntry{label, {match}, {response}});
  } else {
    script.entries[it->second].responses.push_back(response);
  }
}

std::string agent_reply(const eval::CommandRecord& r) {
  nlohmann::json j = r.gold_params;
  j["action"] = r.gold_action;
  return j.dump();
}

nlohmann::json vec(const Vec3& v) { return nlohmann::json(v); }

}  // namespace

Resources Resources::defaults() { return Resources{}; }

void Resources::set_volume(iv::Volume v) {
  ct_bounds = v.bounds();
  volume = std::make_shared<const iv::Volume>(std::move(v));
}

StageRegistry make_registry(const Resources& res, LlmBackend& backend) {
  StageRegistry reg;
  reg[FunctionId::kRealTimeAudio] = [](SessionState& state, ClipContext& ctx) {
    if (!ctx.source) throw StageFailure("no transcript source configured");
    Transcript t = intake_transcript(*ctx.source);
    state.local.audio_captured = true;
    state.local.raw_command = t.text;
    const bool silent = t.silent();
    ctx.pending = std::move(t);
    return silent ? Status::kNoAudio : Status::kAudioRecorded;
  };
  reg[FunctionId::kStt] = [](SessionState&, ClipContext& ctx) {
    if (!ctx.pending) throw StageFailure("nothing recorded to transcribe");
    ctx.transcript = std::move(ctx.pending);
    ctx.pending.reset();
    return Status::kCommandTranscribed;
  };
  reg[FunctionId::kCorrectValidate] = [&res, &backend](SessionState& state, ClipContext& ctx) {
    if (!ctx.transcript) throw StageFailure("no transcript to correct");
    const StageResources sr{&res.rules, &res.vocabulary};
    ValidationResult v = correct_and_validate(*ctx.transcript, state.global, backend, sr);
    state.local.revised_command = v.revised;
    state.local.valid = v.valid;
    if (v.backstop_rejected) ctx.notes.push_back("vocabulary check rejected '" + v.revised + "'");
    ctx.validation = std::move(v);
    return ctx.validation->valid ? Status::kCommandValid : Status::kLastCommandInvalid;
  };
  reg[FunctionId::kCommandReasoning] = [&backend](SessionState& state, ClipContext& ctx) {
    if (!ctx.validation || !ctx.validation->valid) {
      throw StageFailure("command reasoning needs a valid command");
    }
    const AgentChoice choice = reason_agent(*ctx.validation, state.global, backend);
    state.local.agent = choice.agent;
    return Status::kAgentSelected;
  };
  for (AgentId a : kAllAgents) reg[agent_function(a)] = agent_stage(a, res, backend);
  return reg;
}

std::map<AgentId, AgentState> initial_agent_states(const Resources& res) {
  ArState ar_state = ar::default_state(res.structures);
  ar_state.visible.clear();
  return {{AgentId::kIr, ir::empty_state(res.columns)},
          {AgentId::kIv, iv::default_state(res.ct_bounds)},
          {AgentId::kAr, std::move(ar_state)}};
}

SessionState initial_session_state(const Resources& res) {
  SessionState s;
  s.ic_max = res.ic_max;
  s.agent_states = initial_agent_states(res);
  return s;
}

Session::Session(const Resources& resources)
    : resources_(&resources), state_(initial_session_state(resources)) {}

void Session::reset() {
  state_ = initial_session_state(*resources_);
  traces_.clear();
  fresh_ = true;
}

CommandResult Session::process(TranscriptSource& source, LlmBackend& backend) {
  if (!fresh_) advance_clip(state_);
  fresh_ = false;
  state_.ic_max = resources_->ic_max;

  const StageRegistry registry = make_registry(*resources_, backend);
  ClipContext ctx;
  ctx.source = &source;
  ClipResult clip = run_clip(state_, backend, registry, ctx, resources_->orchestrator);
  state_ = std::move(clip.state);
  traces_.push_back(clip.trace);

  CommandResult out;
  out.trace = std::move(clip.trace);
  out.transcript = ctx.transcript;
  out.validation = ctx.validation;
  out.outcome = ctx.outcome;
  out.notes = std::move(ctx.notes);

  eval::CommandRun& run = out.run;
  if (ctx.transcript) run.transcript = ctx.transcript->text;
  if (ctx.validation) run.revised = ctx.validation->revised;
  run.agent = state_.local.agent;
  if (ctx.outcome) {
    run.action = ctx.outcome->action;
    run.params = ctx.outcome->params;
  }
  const auto executed = out.trace.executed();
  run.flow_ok = !out.trace.failed && flow_matches_reference(executed);
  run.ic = state_.invalid_cycles;
  return out;
}

std::vector<Transcript> record_transcripts(const eval::CommandRecord& record) {
  std::vector<Transcript> out;
  for (const auto& a : record.failed_attempts) out.push_back(Transcript{a, record.speaker});
  out.push_back(Transcript{record.raw_text, record.speaker});
  return out;
}

EvalRun run_dataset(const eval::Dataset& dataset, LlmBackend& backend,
                    const Resources& resources) {
  EvalRun out;
  Session session(resources);
  for (const auto& record : dataset.records) {
    FixtureSource source(record_transcripts(record));
    CommandResult result = session.process(source, backend);
    out.rows.push_back(eval::score_command(result.run, record));
    out.traces.push_back(std::move(result.trace));
  }
  return out;
}

MockScript gold_mock_script(const eval::Dataset& dataset) {
  MockScript script;
  script.strict = true;

  auto status_entry = [&](Status s, std::vector<std::string> extra, nlohmann::json probs) {
    std::vector<std::string> match = {"Current status: \"" + std::string(status_text(s)) + "\""};
    match.insert(match.end(), extra.begin(), extra.end());
    script.entries.push_back(MockEntry{"orchestrator", std::move(match), {probs.dump()}});
  };
  status_entry(Status::kIdle, {}, {{"real_time_audio", 0.95}, {"stt", 0.05}});
  status_entry(Status::kAudioRecorded, {}, {{"stt", 0.93}, {"correct_validate", 0.07}});
  status_entry(Status::kNoAudio, {}, {{"stt", 0.9}, {"real_time_audio", 0.1}});
  status_entry(Status::kCommandTranscribed, {}, {{"correct_validate", 0.96}, {"stt", 0.04}});
  status_entry(Status::kCommandValid, {}, {{"command_reasoning", 0.94}, {"end", 0.06}});
  status_entry(Status::kLastCommandInvalid, {}, {{"real_time_audio", 0.9}, {"end", 0.1}});
  status_entry(Status::kAgentCompleted, {}, {{"end", 0.97}, {"real_time_audio", 0.03}});
  for (AgentId a : kAllAgents) {
    status_entry(Status::kAgentSelected, {"Selected agent: " + std::string(to_string(a))},
                 {{std::string(to_string(a)), 0.9}, {"command_reasoning", 0.1}});
  }

  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : dataset.records) {
    for (const auto& attempt : r.failed_attempts) {
      add_entry(index, script, "correct_validate", "Transcribed command: \"" + attempt + "\"",
                nlohmann::json{{"revised", attempt}, {"valid", false}}.dump());
    }
    if (r.raw_text) {
      add_entry(index, script, "correct_validate", "Transcribed command: \"" + *r.raw_text + "\"",
                nlohmann::json{{"revised", r.gold_revised}, {"valid", true}}.dump());
    }
    const std::string revised = "Revised command: \"" + r.gold_revised + "\"";
    add_entry(index, script, "command_reasoning", revised,
              nlohmann::json{{"agent", to_string(r.agent_gold)},
                             {"rationale", "The command concerns the " +
                                               std::string(display_name(r.agent_gold)) + "."}}
                  .dump());
    add_entry(index, script, std::string(to_string(r.agent_gold)), revised, agent_reply(r));
  }
  return script;
}

nlohmann::json to_json(const AgentState& state) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IrState>) {
          return {{"fields", s.fields}, {"text", s.text}};
        } else if constexpr (std::is_same_v<T, IvState>) {
          return {{"positions",
                   {{"axial", s.positions[0]},
                    {"coronal", s.positions[1]},
                    {"sagittal", s.positions[2]}}},
                  {"mode", to_string(s.mode)},
                  {"main_view", to_string(s.main_view)}};
        } else {
          nlohmann::json visible = nlohmann::json::array();
          for (Structure v : s.visible) visible.push_back(to_string(v));
          nlohmann::json stack = nlohmann::json::array();
          for (const auto& z : s.zoom_stack) {
            stack.push_back({{"center", vec(z.center)}, {"scale", z.scale}, {"level", z.level}});
          }
          nlohmann::json j = {
              {"visible", visible},
              {"view", to_string(s.view)},
              {"rotation", to_string(s.rotation)},
              {"zoom",
               {{"center", vec(s.zoom.center)}, {"scale", s.zoom.scale}, {"level", s.zoom.level}}},
              {"zoom_stack", stack}};
          j["target"] = s.target ? nlohmann::json(std::string(to_string(*s.target))) : nullptr;
          return j;
        }
      },
      state);
}

nlohmann::json to_json(const SessionState& state) {
  auto opt = [](const auto& o) -> nlohmann::json {
    if (!o) return nullptr;
    return nlohmann::json(*o);
  };
  nlohmann::json local = {
      {"clip", state.local.clip.index},
      {"raw_command", opt(state.local.raw_command)},
      {"revised_command", opt(state.local.revised_command)},
      {"valid", opt(state.local.valid)},
      {"audio_captured", state.local.audio_captured}};
  local["agent"] =
      state.local.agent ? nlohmann::json(std::string(to_string(*state.local.agent))) : nullptr;
  nlohmann::json memory = nlohmann::json::array();
  for (const auto& e : state.global.history()) {
    memory.push_back({{"revised", e.revised}, {"agent", to_string(e.agent)}});
  }
  nlohmann::json agents = nlohmann::json::object();
  for (const auto& [id, s] : state.agent_states) agents[std::string(to_string(id))] = to_json(s);
  return {{"clip", state.clip.index},
          {"status", status_text(state.status)},
          {"invalid_cycles", state.invalid_cycles},
          {"ic_max", state.ic_max},
          {"current_function", to_string(state.current_function)},
          {"local", local},
          {"global_memory", memory},
          {"agent_states", agents}};
}

nlohmann::json to_json(const CommandResult& r) {
  nlohmann::json j;
  j["trace"] = to_json(r.trace);
  if (r.transcript && r.transcript->text) {
    j["transcript"] = *r.transcript->text;
  } else {
    j["transcript"] = nullptr;
  }
  if (r.validation) {
    j["validation"] = {{"revised", r.validation->revised},
                       {"valid", r.validation->valid},
                       {"backstop_rejected", r.validation->backstop_rejected}};
  } else {
    j["validation"] = nullptr;
  }
  if (r.outcome) {
    j["outcome"] = {{"agent", to_string(r.outcome->agent)},
                    {"action", r.outcome->action},
                    {"params", r.outcome->params}};
    j["timeline"] = to_json(r.outcome->timeline);
  } else {
    j["outcome"] = nullptr;
    j["timeline"] = nullptr;
  }
  j["flow_ok"] = r.run.flow_ok;
  j["ic"] = r.run.ic;
  j["notes"] = r.notes;
  return j;
}

}  // namespace surgvoice
