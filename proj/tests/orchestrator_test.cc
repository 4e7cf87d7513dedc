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

#include <random>

#include "surgvoice/errors.h"
#include "surgvoice/orchestrator.h"
#include "surgvoice/session_engine.h"

namespace surgvoice {
namespace {

using F = FunctionId;

std::map<F, double> random_partial(std::mt19937& rng) {
  std::bernoulli_distribution present(0.4);
  std::uniform_int_distribution<int> tenth(0, 10);
  std::map<F, double> m;
  for (F f : kAllFunctions) {
    // Coarse values make ties common.
    if (present(rng)) m[f] = tenth(rng) / 10.0;
  }
  return m;
}

TEST_CASE("completion adds only zeros and keeps given values") {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto partial = random_partial(rng);
    const auto p = complete_missing_functions(partial);
    CHECK(p.probs.size() == kAllFunctions.size());
    for (const auto& [f, v] : p.probs) {
      auto it = partial.find(f);
      CHECK(v == (it == partial.end() ? 0.0 : it->second));
    }
  }
}

TEST_CASE("selection is total, deterministic, and breaks ties in canonical order") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    SessionState s;
    s.status = kAllStatuses[static_cast<std::size_t>(trial) % kAllStatuses.size()];
    s.local.agent = AgentId::kAr;
    const auto p = complete_missing_functions(random_partial(rng));
    const F chosen = select_next_function(p, s);
    CHECK(select_next_function(p, s) == chosen);

    double best = 0.0;
    for (const auto& [f, v] : p.probs) best = std::max(best, v);
    if (best > 0.0) {
      CHECK(p.probs.at(chosen) == best);
      for (F f : kAllFunctions) {
        if (f == chosen) break;
        CHECK(p.probs.at(f) < best);
      }
    } else {
      CHECK(chosen == fallback_function(s));
    }
  }
  SessionState s;
  CHECK(select_next_function(complete_missing_functions({{F::kEnd, 0.5}, {F::kStt, 0.5}}), s) ==
        F::kStt);
}

TEST_CASE("fallback table follows the status") {
  SessionState s;
  CHECK(fallback_function(s) == F::kRealTimeAudio);
  s.status = Status::kNoAudio;
  CHECK(fallback_function(s) == F::kStt);
  s.status = Status::kCommandTranscribed;
  CHECK(fallback_function(s) == F::kCorrectValidate);
  s.status = Status::kCommandValid;
  CHECK(fallback_function(s) == F::kCommandReasoning);
  s.status = Status::kAgentSelected;
  s.local.agent = AgentId::kIv;
  CHECK(fallback_function(s) == F::kIvAgent);
  s.status = Status::kLastCommandInvalid;
  CHECK(fallback_function(s) == F::kRealTimeAudio);
  s.status = Status::kAgentCompleted;
  CHECK(fallback_function(s) == F::kEnd);
}

TEST_CASE("decision rules override the model") {
  SessionState s;
  s.status = Status::kLastCommandInvalid;
  auto r = apply_decision_rules(s, F::kEnd);
  CHECK(r.function == F::kRealTimeAudio);
  CHECK(r.overridden);
  CHECK(s.invalid_cycles == 1);
  s.invalid_cycles = 3;
  r = apply_decision_rules(s, F::kRealTimeAudio);
  CHECK(r.function == F::kEnd);
  CHECK(r.failure);
  CHECK(s.invalid_cycles == 4);

  SessionState done;
  done.status = Status::kAgentCompleted;
  r = apply_decision_rules(done, F::kIrAgent);
  CHECK(r.function == F::kEnd);
  CHECK_FALSE(r.failure);
}

TEST_CASE("reference flow grammar") {
  const std::vector<F> ok = {F::kRealTimeAudio, F::kStt, F::kCorrectValidate, F::kCommandReasoning,
                             F::kIvAgent, F::kEnd};
  CHECK(flow_matches_reference(ok));
  std::vector<F> retry = {F::kRealTimeAudio, F::kStt, F::kCorrectValidate};
  retry.insert(retry.end(), ok.begin(), ok.end());
  CHECK(flow_matches_reference(retry));
  CHECK_FALSE(flow_matches_reference(std::vector<F>{F::kRealTimeAudio, F::kStt,
                                                    F::kCommandReasoning, F::kIvAgent, F::kEnd}));
  CHECK_FALSE(flow_matches_reference(std::vector<F>{F::kRealTimeAudio, F::kStt,
                                                    F::kCorrectValidate, F::kCommandReasoning,
                                                    F::kIvAgent, F::kArAgent, F::kEnd}));
  CHECK_FALSE(flow_matches_reference(std::vector<F>{}));
}

eval::Dataset one_record(std::vector<std::string> failed, std::string raw = "Show patient information") {
  eval::CommandRecord r;
  r.id = "ir-001";
  r.agent_gold = AgentId::kIr;
  r.raw_text = raw;
  r.failed_attempts = std::move(failed);
  r.gold_revised = raw;
  r.structure = "single";
  r.ctype = "explicit";
  r.expression = "baseline";
  r.gold_action = "SHOW";
  r.gold_params = {{"fields", {"height", "weight"}}};
  return eval::make_dataset({r});
}

TEST_CASE("an invalid attempt followed by a valid one gives IC 1 and a reference flow") {
  const auto ds = one_record({"Prepare the stapler"});
  MockBackend mock(gold_mock_script(ds));
  const Resources res = Resources::defaults();
  Session session(res);
  FixtureSource source(record_transcripts(ds.records[0]));
  const CommandResult r = session.process(source, mock);
  CHECK(r.run.ic == 1);
  CHECK(r.run.flow_ok);
  CHECK_FALSE(r.trace.failed);
  CHECK(r.trace.ic_events.size() == 1);
  CHECK(flow_matches_reference(r.trace.executed()));
  CHECK(r.trace.executed().size() == 9);
  const auto row = eval::score_command(r.run, ds.records[0]);
  CHECK(row.of == 1);
  CHECK(row.ad == 1);
  CHECK(eval::meets(row, eval::Condition::kMultiPass));
  CHECK_FALSE(eval::meets(row, eval::Condition::kSinglePass));
}

TEST_CASE("four invalid attempts end the clip with failure at IC 4") {
  const auto ds = one_record({"Apply suction", "Prepare the stapler", "Replace the gauze",
                              "Insert the retrieval bag"});
  MockBackend mock(gold_mock_script(ds));
  const Resources res = Resources::defaults();
  Session session(res);
  FixtureSource source(record_transcripts(ds.records[0]));
  const CommandResult r = session.process(source, mock);
  CHECK(r.trace.failed);
  CHECK(r.run.ic == 4);
  CHECK_FALSE(r.run.flow_ok);
  CHECK(r.trace.ic_events.size() == 4);
  CHECK(r.trace.executed().back() == F::kEnd);
  CHECK_FALSE(r.outcome);
  CHECK(source.remaining() == 1);
}

TEST_CASE("an exhausted transcript source ends the clip with failure") {
  const auto ds = one_record({});
  MockBackend mock(gold_mock_script(ds));
  const Resources res = Resources::defaults();
  Session session(res);
  FixtureSource empty({});
  const CommandResult r = session.process(empty, mock);
  CHECK(r.trace.failed);
  CHECK_FALSE(r.run.flow_ok);
}

// Stages scripted to report fixed statuses, with a model that never answers
// usefully so every step goes through the rule table.
TEST_CASE("run_clip drives scripted stages through the rule table") {
  int validations = 0;
  StageRegistry reg;
  reg[F::kRealTimeAudio] = [](SessionState&, ClipContext&) { return Status::kAudioRecorded; };
  reg[F::kStt] = [](SessionState&, ClipContext&) { return Status::kCommandTranscribed; };
  reg[F::kCorrectValidate] = [&](SessionState&, ClipContext&) {
    return ++validations == 1 ? Status::kLastCommandInvalid : Status::kCommandValid;
  };
  reg[F::kCommandReasoning] = [](SessionState& s, ClipContext&) {
    s.local.agent = AgentId::kAr;
    return Status::kAgentSelected;
  };
  reg[F::kArAgent] = [](SessionState&, ClipContext&) { return Status::kAgentCompleted; };
  reg[F::kIrAgent] = [](SessionState&, ClipContext&) -> Status {
    throw StageFailure("not this one");
  };

  MockScript lenient;
  lenient.strict = false;
  MockBackend mock(lenient);
  ClipContext ctx;
  const ClipResult a = run_clip(SessionState{}, mock, reg, ctx);
  CHECK(a.state.invalid_cycles == 1);
  CHECK_FALSE(a.trace.failed);
  CHECK(flow_matches_reference(a.trace.executed()));
  for (const auto& s : a.trace.steps) CHECK(s.proposal.probs.size() == kAllFunctions.size());

  validations = 0;
  ClipContext ctx2;
  const ClipResult b = run_clip(SessionState{}, mock, reg, ctx2);
  CHECK(b.trace == a.trace);
  CHECK(b.state == a.state);
}

TEST_CASE("a model that never ends the clip hits the step budget") {
  StageRegistry reg;
  reg[F::kStt] = [](SessionState&, ClipContext&) { return Status::kCommandTranscribed; };
  MockScript loop;
  loop.entries.push_back({"orchestrator", {}, {R"({"stt": 1.0})"}});
  MockBackend mock(loop);
  ClipContext ctx;
  const ClipResult r = run_clip(SessionState{}, mock, reg, ctx, OrchestratorConfig{8});
  CHECK(r.trace.failed);
  CHECK(r.trace.steps.size() == 9);
}

TEST_CASE("the same session history replays to the same traces") {
  const auto ds = one_record({"Prepare the stapler"});
  const Resources res = Resources::defaults();
  auto run_once = [&] {
    MockBackend mock(gold_mock_script(ds));
    return run_dataset(ds, mock, res);
  };
  const EvalRun a = run_once();
  const EvalRun b = run_once();
  CHECK(a.rows == b.rows);
  CHECK(a.traces == b.traces);
  CHECK(trace_to_jsonl(a.traces[0]) == trace_to_jsonl(b.traces[0]));
}

TEST_CASE("orchestrator prompt names the status and the selected agent") {
  SessionState s;
  s.status = Status::kAgentSelected;
  s.local.agent = AgentId::kIv;
  const auto p = build_orchestrator_prompt(s);
  CHECK(p.find("Current status: \"Agent selected\"") != std::string::npos);
  CHECK(p.find("Selected agent: iv_agent") != std::string::npos);
}

}  // namespace
}  // namespace surgvoice
