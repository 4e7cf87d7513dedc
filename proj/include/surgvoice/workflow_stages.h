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

#ifndef SURGVOICE_WORKFLOW_STAGES_H_
#define SURGVOICE_WORKFLOW_STAGES_H_

#include <cstddef>
#include <deque>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surgvoice/agent_ir.h"
#include "surgvoice/core_model.h"
#include "surgvoice/llm_gateway.h"

namespace surgvoice {

enum class TranscriptOrigin { kFixture, kStdin, kHttp, kExternalStt };

struct Transcript {
  std::optional<std::string> text;  // nullopt = silent clip; "" is not silent
  std::optional<std::string> speaker;
  TranscriptOrigin origin = TranscriptOrigin::kFixture;

  bool silent() const { return !text.has_value(); }
};

class TranscriptSource {
 public:
  virtual ~TranscriptSource() = default;
  // Throws SourceExhausted when nothing is left.
  virtual Transcript next() = 0;
};

// Replays a fixed list of transcripts (dataset raw commands with their
// injected STT errors).
class FixtureSource : public TranscriptSource {
 public:
  explicit FixtureSource(std::vector<Transcript> items);
  Transcript next() override;
  std::size_t remaining() const { return items_.size(); }

 private:
  std::deque<Transcript> items_;
};

// One line per transcript; an empty line is a silent clip.
class StreamSource : public TranscriptSource {
 public:
  explicit StreamSource(std::istream& in);
  Transcript next() override;

 private:
  std::istream& in_;
};

// Gets {"text": ...} from a subprocess's stdout or from an HTTP GET. A null
// or missing "text" is a silent clip; a failing command or endpoint is
// SourceExhausted.
class ExternalSttSource : public TranscriptSource {
 public:
  static ExternalSttSource command(std::string shell_command);
  static ExternalSttSource http(std::string url);
  Transcript next() override;

 private:
  ExternalSttSource(std::string target, bool is_http);
  std::string target_;
  bool is_http_;
};

Transcript intake_transcript(TranscriptSource& source);

// Word-level literal -> replacement pairs, matched case-insensitively on
// whole words and applied in order.
struct CorrectionRules {
  std::vector<std::pair<std::string, std::string>> rules;

  static CorrectionRules defaults();
  static CorrectionRules load(const std::filesystem::path& path);  // JSON map
  std::string apply(std::string_view text) const;
};

// Terms that tie a command to some agent: data fields, planes, structures,
// views, and agent-specific actions. A command naming none of them cannot be
// served by any agent.
class CommandVocabulary {
 public:
  static CommandVocabulary defaults(const ir::ColumnManifest& manifest);
  bool mentions_known_term(std::string_view command) const;
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;  // lowercase, single words or phrases
};

struct ValidationResult {
  std::string revised;
  bool valid = false;
  // True when the rule backstop overturned a "valid" model verdict.
  bool backstop_rejected = false;
};

struct AgentChoice {
  AgentId agent = AgentId::kIr;
  std::optional<std::string> rationale;
};

// A heading, then "- {revised} -> {agent display name}" lines, oldest first,
// or "- (none)" when the window is empty.
std::string format_memory_window(const std::vector<MemoryEntry>& window);

std::string build_correction_prompt(std::string_view transcript,
                                    const GlobalMemory& memory,
                                    const CorrectionRules& rules);
std::string build_reasoning_prompt(std::string_view revised, const GlobalMemory& memory);

// "Select image viewer agent", ...
std::string select_agent_command(AgentId agent);
std::optional<AgentId> parse_select_agent_command(std::string_view revised);

struct StageResources {
  const CorrectionRules* rules = nullptr;
  const CommandVocabulary* vocabulary = nullptr;
};

// A silent transcript becomes "Select {agent}" for the most recent agent
// (invalid if memory is empty) without consulting the model. A reply that
// cannot be parsed yields valid=false with the raw text kept.
ValidationResult correct_and_validate(const Transcript& transcript,
                                      const GlobalMemory& memory,
                                      LlmBackend& backend,
                                      const StageResources& resources);

// Throws StageFailure on an unparseable reply or an unknown agent.
AgentChoice reason_agent(const ValidationResult& validation, const GlobalMemory& memory,
                         LlmBackend& backend);

}  // namespace surgvoice

#endif  // SURGVOICE_WORKFLOW_STAGES_H_
