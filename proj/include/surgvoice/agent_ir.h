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

#ifndef SURGVOICE_AGENT_IR_H_
#define SURGVOICE_AGENT_IR_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "surgvoice/agent_states.h"
#include "surgvoice/llm_gateway.h"
#include "surgvoice/timeline.h"

namespace surgvoice::ir {

enum class ColumnKind { kText, kNumber, kComposite };

// A displayable patient-data field.
//   kText:      "{label}: {value}"
//   kNumber:    "{label}: {value} {unit}" (unit omitted when empty)
//   kComposite: "{label}: " + format, where {key} placeholders are filled
//               from the record, e.g. "{fev1_l} L ({fev1_pct}%)".
struct Column {
  std::string id;
  std::string label;
  ColumnKind kind = ColumnKind::kText;
  std::string unit;
  std::string format;

  // Record keys this column reads.
  std::vector<std::string> sources() const;
};

struct ColumnManifest {
  std::vector<Column> columns;
  // Phrase -> column ids, e.g. "physical information" -> {height, weight}.
  std::map<std::string, std::vector<std::string>> aliases;

  static ColumnManifest defaults();
  static ColumnManifest load(const std::filesystem::path& path);
  static ColumnManifest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t size() const { return columns.size(); }
};

// Values keyed by record key (column id or composite source key).
using PatientRecord = nlohmann::json;

PatientRecord load_record(const std::filesystem::path& path);
// Synthetic record used by tests and the demo service.
PatientRecord sample_record();

enum class Action { kShow, kHide };
std::string_view to_string(Action a);

struct Decision {
  Action action = Action::kShow;
  std::vector<double> field_probs;  // manifest order, each in [0,1]
  bool reset = false;
};

inline constexpr double kDefaultThreshold = 0.5;

// Turns a model reply into a decision. Accepts either the probability form
//   {"action_probs": {"SHOW": p, "HIDE": q}, "field_probs": {id|alias: p}}
// or the shorthand {"action": "SHOW", "fields": [id|alias, ...]}.
// Throws ParseError.
Decision parse_decision(std::string_view reply, const ColumnManifest& manifest);

std::string build_prompt(std::string_view command, const ColumnManifest& manifest);

// Throws StageFailure when the reply cannot be parsed.
Decision determine_action(std::string_view command, const ColumnManifest& manifest,
                          LlmBackend& backend);

// y*_j = [p_j >= threshold]; HIDE forces the zero vector.
std::vector<bool> threshold_fields(const Decision& d, double threshold = kDefaultThreshold);

std::vector<Column> select_columns(const std::vector<bool>& y,
                                   const ColumnManifest& manifest);

// Missing record values render as "{label}: —".
std::string format_field(const Column& column, const PatientRecord& record);

// Newline-joined formatted fields in the given order, no trailing newline.
std::string compose_info_string(const std::vector<Column>& columns,
                                const PatientRecord& record);

IrState empty_state(const ColumnManifest& manifest);

struct Applied {
  IrState state;
  OverlayDirective directive;
};

Applied apply(const IrState& state, const Decision& decision,
              const ColumnManifest& manifest, const PatientRecord& record,
              double threshold = kDefaultThreshold);

// Canonical parameter form used for scoring: {"fields": [ids...]}.
nlohmann::json canonical_params(const Decision& d, const ColumnManifest& manifest,
                                double threshold = kDefaultThreshold);

}  // namespace surgvoice::ir

#endif  // SURGVOICE_AGENT_IR_H_
