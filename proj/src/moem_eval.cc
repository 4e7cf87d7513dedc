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

#include "surgvoice/moem_eval.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <set>
#include <stdexcept>
#include <tuple>

#include <boost/math/distributions/normal.hpp>

#include "surgvoice/errors.h"

namespace surgvoice::eval {
namespace {

template <std::size_t N>
bool one_of(const std::string& v, const std::array<std::string_view, N>& set) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

std::string required_string(const nlohmann::json& j, const char* key, std::size_t row) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw SchemaError(std::string("missing or non-string field '") + key + "'", row);
  }
  return j[key].get<std::string>();
}

RateWithCi with_ci(Rate r, double level) {
  RateWithCi out;
  out.rate = r;
  if (r.n > 0) std::tie(out.lo, out.hi) = wilson_ci(r.successes, r.n, level);
  return out;
}

nlohmann::json rate_json(const RateWithCi& r) {
  return {{"successes", r.rate.successes},
          {"n", r.rate.n},
          {"rate", r.rate.value()},
          {"ci", {r.lo, r.hi}}};
}

RateWithCi rate_from(const nlohmann::json& j) {
  RateWithCi r;
  r.rate.successes = j.at("successes").get<int>();
  r.rate.n = j.at("n").get<int>();
  r.lo = j.at("ci").at(0).get<double>();
  r.hi = j.at("ci").at(1).get<double>();
  return r;
}

using RateTable = std::map<std::string, RateWithCi>;

nlohmann::json table_json(const RateTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : t) j[k] = rate_json(v);
  return j;
}

RateTable table_from(const nlohmann::json& j) {
  RateTable t;
  for (const auto& [k, v] : j.items()) t[k] = rate_from(v);
  return t;
}

const CommandRecord& join(const StageOutcomeRow& row, const Dataset& dataset) {
  const CommandRecord* rec = dataset.find(row.id);
  if (!rec) throw std::invalid_argument("row '" + row.id + "' has no dataset record");
  return *rec;
}

Rate count(const std::vector<StageOutcomeRow>& rows, Stage stage) {
  Rate r{0, static_cast<int>(rows.size())};
  for (const auto& row : rows) r.successes += row.outcome(stage);
  return r;
}

Rate count(const std::vector<StageOutcomeRow>& rows, Condition c, int ic_max) {
  Rate r{0, static_cast<int>(rows.size())};
  for (const auto& row : rows) r.successes += meets(row, c, ic_max) ? 1 : 0;
  return r;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr std::array<Condition, 3> kConditions = {Condition::kStrict, Condition::kSinglePass,
                                                  Condition::kMultiPass};

}  // namespace

std::string CommandRecord::category(std::string_view dimension) const {
  if (dimension == "structure") return structure;
  if (dimension == "type") return ctype;
  if (dimension == "expression") return expression;
  if (dimension == "agent") return std::string(short_name(agent_gold));
  throw std::invalid_argument("unknown category dimension '" + std::string(dimension) + "'");
}

CommandRecord record_from_json(const nlohmann::json& j, std::size_t row) {
  if (!j.is_object()) throw SchemaError("record is not a JSON object", row);
  CommandRecord r;
  r.id = required_string(j, "id", row);
  const auto agent = agent_from_string(required_string(j, "agent", row));
  if (!agent) throw SchemaError("unknown agent '" + j["agent"].get<std::string>() + "'", row);
  r.agent_gold = *agent;
  if (!j.contains("raw_text")) throw SchemaError("missing field 'raw_text'", row);
  if (j["raw_text"].is_string()) {
    r.raw_text = j["raw_text"].get<std::string>();
  } else if (!j["raw_text"].is_null()) {
    throw SchemaError("raw_text must be a string or null", row);
  }
  if (j.contains("failed_attempts")) {
    if (!j["failed_attempts"].is_array()) throw SchemaError("failed_attempts must be a list", row);
    for (const auto& a : j["failed_attempts"]) {
      if (!a.is_string()) throw SchemaError("failed_attempts entries must be strings", row);
      r.failed_attempts.push_back(a.get<std::string>());
    }
  }
  r.gold_revised = required_string(j, "gold_revised", row);
  r.structure = required_string(j, "structure", row);
  r.ctype = required_string(j, "type", row);
  r.expression = required_string(j, "expression", row);
  if (!one_of(r.structure, kStructures)) {
    throw SchemaError("bad structure category '" + r.structure + "'", row);
  }
  if (!one_of(r.ctype, kTypes)) throw SchemaError("bad type category '" + r.ctype + "'", row);
  if (!one_of(r.expression, kExpressions)) {
    throw SchemaError("bad expression category '" + r.expression + "'", row);
  }
  if (j.contains("speaker") && j["speaker"].is_string()) r.speaker = j["speaker"].get<std::string>();
  r.gold_action = required_string(j, "gold_action", row);
  if (!j.contains("gold_params") || !j["gold_params"].is_object()) {
    throw SchemaError("gold_params must be an object", row);
  }
  r.gold_params = j["gold_params"];
  return r;
}

nlohmann::json to_json(const CommandRecord& r) {
  nlohmann::json j = {{"id", r.id}, {"agent", short_name(r.agent_gold)}};
  j["raw_text"] = r.raw_text ? nlohmann::json(*r.raw_text) : nullptr;
  if (!r.failed_attempts.empty()) j["failed_attempts"] = r.failed_attempts;
  j["gold_revised"] = r.gold_revised;
  j["structure"] = r.structure;
  j["type"] = r.ctype;
  j["expression"] = r.expression;
  if (r.speaker) j["speaker"] = *r.speaker;
  j["gold_action"] = r.gold_action;
  j["gold_params"] = r.gold_params;
  return j;
}

nlohmann::json DistributionSummary::to_json() const { return counts; }

const CommandRecord* Dataset::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

DistributionSummary summarize(const std::vector<CommandRecord>& records) {
  DistributionSummary s;
  for (const auto& r : records) {
    for (std::string_view dim : {"agent", "structure", "type", "expression"}) {
      s.counts[std::string(dim)][r.category(dim)] += 1;
    }
  }
  return s;
}

const std::map<std::string, std::map<std::string, int>>& reference_counts() {
  static const std::map<std::string, std::map<std::string, int>> counts = {
      {"agent", {{"ir", 44}, {"iv", 81}, {"ar", 115}}},
      {"structure", {{"single", 225}, {"composite", 15}}},
      {"type", {{"explicit", 80}, {"implicit", 80}, {"nlq", 80}}},
      {"expression", {{"baseline", 145}, {"abbreviation", 15}, {"paraphrase", 80}}},
  };
  return counts;
}

std::vector<CommandRecord> dataset_skeleton() {
  const auto& ref = reference_counts();
  auto expand = [](const std::map<std::string, int>& counts, auto order) {
    std::vector<std::string> out;
    for (std::string_view key : order) {
      out.insert(out.end(), static_cast<std::size_t>(counts.at(std::string(key))), std::string(key));
    }
    return out;
  };
  const auto structures = expand(ref.at("structure"), kStructures);
  const auto types = expand(ref.at("type"), kTypes);
  const auto expressions = expand(ref.at("expression"), kExpressions);
  const std::size_t n = structures.size();

  std::vector<CommandRecord> records;
  records.reserve(n);
  std::map<AgentId, int> seq;
  std::size_t i = 0;
  for (AgentId a : kAllAgents) {
    const int count = ref.at("agent").at(std::string(short_name(a)));
    for (int k = 0; k < count; ++k, ++i) {
      CommandRecord r;
      r.agent_gold = a;
      char id[32];
      std::snprintf(id, sizeof id, "%s-%03d", std::string(short_name(a)).c_str(), ++seq[a]);
      r.id = id;
      r.raw_text = "";
      // Strides coprime with n spread the categories across agents without
      // changing their totals.
      r.structure = structures[(i * 7) % n];
      r.ctype = types[(i * 11) % n];
      r.expression = expressions[(i * 13) % n];
      records.push_back(std::move(r));
    }
  }
  return records;
}

Dataset make_dataset(std::vector<CommandRecord> records) {
  Dataset d;
  d.records = std::move(records);
  d.summary = summarize(d.records);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset " + path.string());
  std::vector<CommandRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaError("line is not valid JSON", row);
    CommandRecord r = record_from_json(j, row);
    if (!ids.insert(r.id).second) throw SchemaError("duplicate id '" + r.id + "'", row);
    records.push_back(std::move(r));
  }
  return make_dataset(std::move(records));
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kStt: return "stt";
    case Stage::kCc: return "cc";
    case Stage::kCr: return "cr";
    case Stage::kAf: return "af";
    case Stage::kAp: return "ap";
    case Stage::kAd: return "ad";
    case Stage::kOf: return "of";
  }
  return "stt";
}

int StageOutcomeRow::outcome(Stage s) const {
  switch (s) {
    case Stage::kStt: return stt;
    case Stage::kCc: return cc;
    case Stage::kCr: return cr;
    case Stage::kAf: return af;
    case Stage::kAp: return ap;
    case Stage::kAd: return ad;
    case Stage::kOf: return of;
  }
  return 0;
}

StageOutcomeRow row_from_json(const nlohmann::json& j) {
  StageOutcomeRow r;
  r.id = j.value("id", "");
  const auto agent = agent_from_string(j.at("agent").get<std::string>());
  if (!agent) throw SchemaError("unknown agent in outcome row");
  r.agent = *agent;
  r.stt = j.at("stt").get<int>();
  r.cc = j.at("cc").get<int>();
  r.cr = j.at("cr").get<int>();
  r.af = j.at("af").get<int>();
  r.ap = j.at("ap").get<int>();
  r.ad = j.at("ad").get<int>();
  r.of = j.at("of").get<int>();
  r.ic = j.at("ic").get<int>();
  for (Stage s : kAllStages) {
    const int v = r.outcome(s);
    if (v != 0 && v != 1) throw SchemaError("stage outcome must be 0 or 1");
  }
  if (r.ic < 0) throw SchemaError("ic must be non-negative");
  if (r.ad != (r.af & r.ap)) throw SchemaError("ad must equal af and ap in row '" + r.id + "'");
  return r;
}

nlohmann::json to_json(const StageOutcomeRow& r) {
  return {{"id", r.id}, {"agent", short_name(r.agent)}, {"stt", r.stt}, {"cc", r.cc},
          {"cr", r.cr}, {"af", r.af}, {"ap", r.ap}, {"ad", r.ad}, {"of", r.of}, {"ic", r.ic}};
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      if (space) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(c));
    }
  }
  return out;
}

StageOutcomeRow score_command(const CommandRun& run, const CommandRecord& record) {
  StageOutcomeRow row;
  row.id = record.id;
  row.agent = record.agent_gold;
  const std::string gold = normalize_text(record.gold_revised);
  row.stt = run.transcript && normalize_text(*run.transcript) == gold;
  row.cc = run.revised && normalize_text(*run.revised) == gold;
  row.cr = run.agent && *run.agent == record.agent_gold;
  row.af = run.agent && *run.agent == record.agent_gold && run.action &&
           normalize_text(*run.action) == normalize_text(record.gold_action);
  row.ap = row.af && run.params == record.gold_params;
  row.ad = row.af && row.ap;
  row.of = run.flow_ok;
  row.ic = run.ic;
  return row;
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::kStrict: return "strict";
    case Condition::kSinglePass: return "single_pass";
    case Condition::kMultiPass: return "multi_pass";
  }
  return "strict";
}

bool meets(const StageOutcomeRow& row, Condition c, int ic_max) {
  switch (c) {
    case Condition::kStrict:
      for (Stage s : kAllStages) {
        if (!row.outcome(s)) return false;
      }
      return row.ic == 0;
    case Condition::kSinglePass: return row.ad && row.of && row.ic == 0;
    case Condition::kMultiPass: return row.ad && row.of && row.ic <= ic_max;
  }
  return false;
}

double stage_accuracy(const std::vector<StageOutcomeRow>& rows, Stage stage) {
  if (rows.empty()) throw std::invalid_argument("stage_accuracy needs at least one row");
  return count(rows, stage).value();
}

double success_rate(const std::vector<StageOutcomeRow>& rows, Condition c, int ic_max) {
  if (rows.empty()) throw std::invalid_argument("success_rate needs at least one row");
  return count(rows, c, ic_max).value();
}

std::map<std::string, Rate> category_sr(const std::vector<StageOutcomeRow>& rows,
                                        const Dataset& dataset, std::string_view dimension,
                                        int ic_max) {
  std::map<std::string, Rate> out;
  for (const auto& row : rows) {
    Rate& r = out[join(row, dataset).category(dimension)];
    r.n += 1;
    r.successes += meets(row, Condition::kMultiPass, ic_max) ? 1 : 0;
  }
  return out;
}

std::map<std::pair<std::string, std::string>, Rate> cross_category_sr(
    const std::vector<StageOutcomeRow>& rows, const Dataset& dataset,
    std::pair<std::string_view, std::string_view> dims, int ic_max) {
  std::map<std::pair<std::string, std::string>, Rate> out;
  for (const auto& row : rows) {
    const auto& rec = join(row, dataset);
    Rate& r = out[{rec.category(dims.first), rec.category(dims.second)}];
    r.n += 1;
    r.successes += meets(row, Condition::kMultiPass, ic_max) ? 1 : 0;
  }
  return out;
}

std::pair<double, double> wilson_ci(int successes, int n, double level) {
  if (n < 1 || successes < 0 || successes > n) {
    throw std::invalid_argument("wilson_ci needs 0 <= successes <= n and n >= 1");
  }
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 1.0 - (1.0 - level) / 2.0);
  const double nn = n;
  const double p = successes / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  double lo = std::clamp(center - half, 0.0, 1.0);
  double hi = std::clamp(center + half, 0.0, 1.0);
  if (successes == 0) lo = 0.0;
  if (successes == n) hi = 1.0;
  return {lo, hi};
}

MetricReport build_report(const std::vector<StageOutcomeRow>& rows, const Dataset& dataset,
                          double level, int ic_max) {
  MetricReport r;
  r.n = static_cast<int>(rows.size());
  r.level = level;
  if (rows.empty()) return r;

  for (Stage s : kAllStages) {
    r.stage_accuracy[std::string(to_string(s))] = with_ci(count(rows, s), level);
  }
  for (Condition c : kConditions) {
    r.success[std::string(to_string(c))] = with_ci(count(rows, c, ic_max), level);
  }

  for (AgentId a : kAllAgents) {
    std::vector<StageOutcomeRow> subset;
    for (const auto& row : rows) {
      if (row.agent == a) subset.push_back(row);
    }
    if (subset.empty()) continue;
    auto& table = r.by_agent[std::string(short_name(a))];
    for (Stage s : kAllStages) table[std::string(to_string(s))] = with_ci(count(subset, s), level);
    for (Condition c : kConditions) {
      table[std::string(to_string(c))] = with_ci(count(subset, c, ic_max), level);
    }
  }

  for (std::string_view dim : {"structure", "type", "expression"}) {
    for (const auto& [cat, rate] : category_sr(rows, dataset, dim, ic_max)) {
      r.by_category[std::string(dim)][cat] = with_ci(rate, level);
    }
  }
  for (auto dims : {std::pair<std::string_view, std::string_view>{"structure", "type"},
                    std::pair<std::string_view, std::string_view>{"type", "expression"}}) {
    const std::string key = std::string(dims.first) + " x " + std::string(dims.second);
    for (const auto& [cats, rate] : cross_category_sr(rows, dataset, dims, ic_max)) {
      r.cross_category[key][cats.first + "|" + cats.second] = with_ci(rate, level);
    }
  }

  for (std::size_t k = 0; k + 1 < kAllStages.size(); ++k) {
    const std::string key =
        std::string(to_string(kAllStages[k])) + ">" + std::string(to_string(kAllStages[k + 1]));
    auto& flows = r.path_flows[key];
    for (const auto& row : rows) {
      flows[std::to_string(row.outcome(kAllStages[k])) + ">" +
            std::to_string(row.outcome(kAllStages[k + 1]))] += 1;
    }
  }
  for (const auto& row : rows) r.total_ic += row.ic;
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["level"] = r.level;
  j["stage_accuracy"] = table_json(r.stage_accuracy);
  j["success"] = table_json(r.success);
  auto nested = [](const std::map<std::string, RateTable>& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, t] : m) out[k] = table_json(t);
    return out;
  };
  j["by_agent"] = nested(r.by_agent);
  j["by_category"] = nested(r.by_category);
  j["cross_category"] = nested(r.cross_category);
  j["path_flows"] = r.path_flows;
  j["total_ic"] = r.total_ic;
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.n = j.at("n").get<int>();
  r.level = j.at("level").get<double>();
  r.stage_accuracy = table_from(j.at("stage_accuracy"));
  r.success = table_from(j.at("success"));
  for (const char* key : {"by_agent", "by_category", "cross_category"}) {
    auto& target = std::string_view(key) == "by_agent"      ? r.by_agent
                   : std::string_view(key) == "by_category" ? r.by_category
                                                            : r.cross_category;
    for (const auto& [k, t] : j.at(key).items()) target[k] = table_from(t);
  }
  r.path_flows = j.at("path_flows").get<std::map<std::string, std::map<std::string, int>>>();
  r.total_ic = j.at("total_ic").get<int>();
  return r;
}

std::vector<std::string> report_schema_errors(const nlohmann::json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"report is not an object"};
  for (const char* key : {"n", "level", "stage_accuracy", "success", "by_agent", "by_category",
                          "cross_category", "path_flows", "total_ic"}) {
    if (!j.contains(key)) errors.push_back(std::string("missing '") + key + "'");
  }
  if (!errors.empty()) return errors;
  if (!j["n"].is_number_integer() || j["n"].get<int>() <= 0) errors.push_back("n must be positive");
  const int n = j["n"].is_number_integer() ? j["n"].get<int>() : 0;

  auto check_rate = [&](const std::string& where, const nlohmann::json& r, bool full) {
    if (!r.is_object() || !r.contains("successes") || !r.contains("n") || !r.contains("rate") ||
        !r.contains("ci") || !r["ci"].is_array() || r["ci"].size() != 2) {
      errors.push_back(where + ": malformed rate");
      return;
    }
    const int k = r["successes"].get<int>();
    const int m = r["n"].get<int>();
    const double rate = r["rate"].get<double>();
    const double lo = r["ci"][0].get<double>();
    const double hi = r["ci"][1].get<double>();
    if (k < 0 || m <= 0 || k > m) errors.push_back(where + ": bad counts");
    if (full && m != n) errors.push_back(where + ": n differs from the report n");
    if (m > 0 && std::abs(rate - static_cast<double>(k) / m) > 1e-9) {
      errors.push_back(where + ": rate does not match counts");
    }
    if (!(0.0 <= lo && lo <= rate + 1e-12 && rate <= hi + 1e-12 && hi <= 1.0)) {
      errors.push_back(where + ": interval does not bracket the rate");
    }
  };
  for (Stage s : kAllStages) {
    const std::string key(to_string(s));
    if (!j["stage_accuracy"].contains(key)) {
      errors.push_back("stage_accuracy lacks '" + key + "'");
    } else {
      check_rate("stage_accuracy." + key, j["stage_accuracy"][key], true);
    }
  }
  for (Condition c : {Condition::kStrict, Condition::kSinglePass, Condition::kMultiPass}) {
    const std::string key(to_string(c));
    if (!j["success"].contains(key)) {
      errors.push_back("success lacks '" + key + "'");
    } else {
      check_rate("success." + key, j["success"][key], true);
    }
  }
  for (const char* section : {"by_agent", "by_category", "cross_category"}) {
    if (!j[section].is_object()) {
      errors.push_back(std::string(section) + " is not an object");
      continue;
    }
    for (const auto& [k, table] : j[section].items()) {
      for (const auto& [c, r] : table.items()) {
        check_rate(std::string(section) + "." + k + "." + c, r, false);
      }
    }
  }
  for (const char* dim : {"structure", "type", "expression"}) {
    if (!j["by_category"].contains(dim)) {
      errors.push_back(std::string("by_category lacks '") + dim + "'");
    }
  }
  return errors;
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << kCsvHeader << '\n';
  auto emit = [&](const std::string& section, const std::string& key, const RateWithCi& v) {
    out << csv_field(section) << ',' << csv_field(key) << ',' << v.rate.successes << ','
        << v.rate.n << ',' << std::fixed << v.rate.value() << ',' << v.lo << ',' << v.hi << '\n';
    out.unsetf(std::ios::floatfield);
  };
  emit("total", "n", RateWithCi{Rate{r.n, r.n}, 1.0, 1.0});
  for (const auto& [k, v] : r.stage_accuracy) emit("stage", k, v);
  for (const auto& [k, v] : r.success) emit("success", k, v);
  for (const auto& [a, t] : r.by_agent) {
    for (const auto& [k, v] : t) emit("agent:" + a, k, v);
  }
  for (const auto& [d, t] : r.by_category) {
    for (const auto& [k, v] : t) emit("category:" + d, k, v);
  }
  for (const auto& [d, t] : r.cross_category) {
    for (const auto& [k, v] : t) emit("cross:" + d, k, v);
  }
  return out.str();
}

std::string rows_to_csv(const std::vector<StageOutcomeRow>& rows, const Dataset& dataset) {
  std::ostringstream out;
  out << "id,agent,structure,type,expression,stt,cc,cr,af,ap,ad,of,ic\n";
  for (const auto& row : rows) {
    const CommandRecord* rec = dataset.find(row.id);
    out << csv_field(row.id) << ',' << short_name(row.agent) << ','
        << (rec ? rec->structure : "") << ',' << (rec ? rec->ctype : "") << ','
        << (rec ? rec->expression : "");
    for (Stage s : kAllStages) out << ',' << row.outcome(s);
    out << ',' << row.ic << '\n';
  }
  return out.str();
}

}  // namespace surgvoice::eval
