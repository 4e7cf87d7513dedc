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

#ifndef SURGVOICE_MOEM_EVAL_H_
#define SURGVOICE_MOEM_EVAL_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "surgvoice/core_model.h"

namespace surgvoice::eval {

inline constexpr std::array<std::string_view, 2> kStructures = {"single", "composite"};
inline constexpr std::array<std::string_view, 3> kTypes = {"explicit", "implicit", "nlq"};
inline constexpr std::array<std::string_view, 3> kExpressions = {"baseline", "abbreviation",
                                                                 "paraphrase"};

struct CommandRecord {
  std::string id;
  AgentId agent_gold = AgentId::kIr;
  std::optional<std::string> raw_text;        // final attempt; nullopt = silent
  std::vector<std::string> failed_attempts;   // restated after being judged invalid
  std::string gold_revised;
  std::string structure;
  std::string ctype;
  std::string expression;
  std::optional<std::string> speaker;
  std::string gold_action;
  nlohmann::json gold_params = nlohmann::json::object();

  std::string category(std::string_view dimension) const;  // throws std::invalid_argument
};

CommandRecord record_from_json(const nlohmann::json& j, std::size_t row = 0);
nlohmann::json to_json(const CommandRecord& r);

struct DistributionSummary {
  std::map<std::string, std::map<std::string, int>> counts;  // dimension -> category -> n
  nlohmann::json to_json() const;
};

struct Dataset {
  std::vector<CommandRecord> records;
  DistributionSummary summary;

  const CommandRecord* find(std::string_view id) const;
};

// JSON lines, one CommandRecord per line. Throws SchemaError with the
// 1-based row number.
Dataset load_dataset(const std::filesystem::path& path);
Dataset make_dataset(std::vector<CommandRecord> records);
DistributionSummary summarize(const std::vector<CommandRecord>& records);

// Category counts of the bundled 240-command dataset.
const std::map<std::string, std::map<std::string, int>>& reference_counts();

// Unannotated records whose per-dimension counts equal reference_counts():
// empty text, action, and params, ids "{agent}-NNN".
std::vector<CommandRecord> dataset_skeleton();

enum class Stage { kStt, kCc, kCr, kAf, kAp, kAd, kOf };
inline constexpr std::array<Stage, 7> kAllStages = {Stage::kStt, Stage::kCc, Stage::kCr,
                                                    Stage::kAf,  Stage::kAp, Stage::kAd,
                                                    Stage::kOf};
std::string_view to_string(Stage s);

struct StageOutcomeRow {
  std::string id;
  AgentId agent = AgentId::kIr;
  int stt = 0, cc = 0, cr = 0, af = 0, ap = 0, ad = 0, of = 0;
  int ic = 0;

  int outcome(Stage s) const;
  bool operator==(const StageOutcomeRow&) const = default;
};

StageOutcomeRow row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StageOutcomeRow& r);

// What one command run produced, as seen by the scorer.
struct CommandRun {
  std::optional<std::string> transcript;  // final transcribed attempt
  std::optional<std::string> revised;
  std::optional<AgentId> agent;
  std::optional<std::string> action;
  nlohmann::json params;
  bool flow_ok = false;  // executed order matched the reference grammar
  int ic = 0;
};

// Casefold, drop punctuation, collapse whitespace.
std::string normalize_text(std::string_view text);

StageOutcomeRow score_command(const CommandRun& run, const CommandRecord& record);

struct Rate {
  int successes = 0;
  int n = 0;
  double value() const { return n ? static_cast<double>(successes) / n : 0.0; }
  bool operator==(const Rate&) const = default;
};

enum class Condition { kStrict, kSinglePass, kMultiPass };
std::string_view to_string(Condition c);

bool meets(const StageOutcomeRow& row, Condition c, int ic_max = 3);

// Throw std::invalid_argument on empty input.
double stage_accuracy(const std::vector<StageOutcomeRow>& rows, Stage stage);
double success_rate(const std::vector<StageOutcomeRow>& rows, Condition c, int ic_max = 3);

// Multi-pass rate per category value of one dimension ("structure", "type",
// "expression", "agent"). Categories with no rows are absent. Throws
// std::invalid_argument for an unknown dimension or a row without a record.
std::map<std::string, Rate> category_sr(const std::vector<StageOutcomeRow>& rows,
                                        const Dataset& dataset, std::string_view dimension,
                                        int ic_max = 3);
std::map<std::pair<std::string, std::string>, Rate> cross_category_sr(
    const std::vector<StageOutcomeRow>& rows, const Dataset& dataset,
    std::pair<std::string_view, std::string_view> dims, int ic_max = 3);

// Wilson score interval clamped to [0,1].
std::pair<double, double> wilson_ci(int successes, int n, double level = 0.95);

struct RateWithCi {
  Rate rate;
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const RateWithCi&) const = default;
};

struct MetricReport {
  int n = 0;
  double level = 0.95;
  std::map<std::string, RateWithCi> stage_accuracy;         // stage -> rate
  std::map<std::string, RateWithCi> success;                // condition -> rate
  std::map<std::string, std::map<std::string, RateWithCi>> by_agent;  // agent -> metric -> rate
  std::map<std::string, std::map<std::string, RateWithCi>> by_category;  // dim -> cat -> rate
  std::map<std::string, std::map<std::string, RateWithCi>> cross_category;  // "a x b" -> "c1|c2"
  // "stt>cc" -> "1>0" -> count: outcome transitions between consecutive stages.
  std::map<std::string, std::map<std::string, int>> path_flows;
  int total_ic = 0;

  bool operator==(const MetricReport&) const = default;
};

MetricReport build_report(const std::vector<StageOutcomeRow>& rows, const Dataset& dataset,
                          double level = 0.95, int ic_max = 3);

nlohmann::json to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

// Structural problems in a serialized report: missing sections, stage or
// condition keys, rates inconsistent with their counts, intervals that do
// not contain the rate. Empty when the report is well formed.
std::vector<std::string> report_schema_errors(const nlohmann::json& j);

// Columns: section,key,successes,n,rate,ci_lo,ci_hi
inline constexpr std::string_view kCsvHeader = "section,key,successes,n,rate,ci_lo,ci_hi";
std::string to_csv(const MetricReport& r);

// Per-command outcome table (one row per command, stage outcomes and IC).
std::string rows_to_csv(const std::vector<StageOutcomeRow>& rows, const Dataset& dataset);

}  // namespace surgvoice::eval

#endif  // SURGVOICE_MOEM_EVAL_H_
