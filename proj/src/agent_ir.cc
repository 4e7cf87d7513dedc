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

#include "surgvoice/agent_ir.h"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice::ir {
namespace {

constexpr std::string_view kMissing = "\xE2\x80\x94";  // em dash

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string value_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ", ";
      out += value_text(item);
    }
    return out;
  }
  return v.dump();
}

bool has_value(const PatientRecord& record, const std::string& key) {
  return record.is_object() && record.contains(key) && !record[key].is_null();
}

ColumnKind kind_from_string(std::string_view s, std::size_t row) {
  if (s == "text") return ColumnKind::kText;
  if (s == "number" || s == "number-with-unit") return ColumnKind::kNumber;
  if (s == "composite") return ColumnKind::kComposite;
  throw SchemaError("unknown column kind '" + std::string(s) + "'", row);
}

std::string_view kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::kText: return "text";
    case ColumnKind::kNumber: return "number";
    case ColumnKind::kComposite: return "composite";
  }
  return "text";
}

// Column ids for a field name or alias phrase.
std::vector<std::size_t> resolve_field(std::string_view name, const ColumnManifest& manifest) {
  if (auto idx = manifest.index_of(name)) return {*idx};
  const std::string key = lower(name);
  for (std::size_t i = 0; i < manifest.columns.size(); ++i) {
    if (lower(manifest.columns[i].label) == key) return {i};
  }
  std::vector<std::size_t> out;
  if (auto it = manifest.aliases.find(key); it != manifest.aliases.end()) {
    for (const auto& id : it->second) {
      if (auto idx = manifest.index_of(id)) out.push_back(*idx);
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> Column::sources() const {
  if (kind != ColumnKind::kComposite) return {id};
  std::vector<std::string> keys;
  std::size_t pos = 0;
  while ((pos = format.find('{', pos)) != std::string::npos) {
    const auto close = format.find('}', pos);
    if (close == std::string::npos) break;
    keys.push_back(format.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return keys;
}

ColumnManifest ColumnManifest::defaults() {
  ColumnManifest m;
  m.columns = {
      {"sex_age", "Sex/Age", ColumnKind::kComposite, "", "{sex}/{age}"},
      {"sex", "Sex", ColumnKind::kText, "", ""},
      {"age", "Age", ColumnKind::kNumber, "", ""},
      {"height", "Height", ColumnKind::kNumber, "cm", ""},
      {"weight", "Weight", ColumnKind::kNumber, "kg", ""},
      {"diagnosis", "Diagnosis", ColumnKind::kText, "", ""},
      {"comorbidities", "Comorbidities", ColumnKind::kText, "", ""},
      {"fev1", "FEV1", ColumnKind::kComposite, "", "{fev1_l} L ({fev1_pct}%)"},
      {"fvc", "FVC", ColumnKind::kComposite, "", "{fvc_l} L ({fvc_pct}%)"},
      {"surgery", "Surgery", ColumnKind::kText, "", ""},
      {"tumor", "Tumor", ColumnKind::kText, "", ""},
  };
  m.aliases = {
      {"patient information",
       {"sex_age", "height", "weight", "diagnosis", "comorbidities", "fev1", "fvc", "surgery",
        "tumor"}},
      {"physical information", {"height", "weight"}},
      {"body size", {"height", "weight"}},
      {"pulmonary function test", {"fev1", "fvc"}},
      {"pft", {"fev1", "fvc"}},
      {"lung function", {"fev1", "fvc"}},
      {"gender", {"sex"}},
      {"how old", {"age"}},
      {"pre-existing condition", {"comorbidities"}},
      {"surgery information", {"surgery"}},
      {"operation", {"surgery"}},
      {"tumor information", {"tumor"}},
      {"lesion", {"tumor"}},
  };
  return m;
}

ColumnManifest ColumnManifest::from_json(const nlohmann::json& j) {
  ColumnManifest m;
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    throw SchemaError("manifest needs a 'columns' array");
  }
  std::size_t row = 0;
  for (const auto& c : j["columns"]) {
    ++row;
    Column col;
    col.id = c.at("id").get<std::string>();
    col.label = c.value("label", col.id);
    col.kind = kind_from_string(c.value("kind", "text"), row);
    col.unit = c.value("unit", "");
    col.format = c.value("format", "");
    if (col.kind == ColumnKind::kComposite && col.format.empty()) {
      throw SchemaError("composite column '" + col.id + "' needs a format", row);
    }
    if (m.index_of(col.id)) throw SchemaError("duplicate column id '" + col.id + "'", row);
    m.columns.push_back(std::move(col));
  }
  if (j.contains("aliases")) {
    for (const auto& [phrase, ids] : j["aliases"].items()) {
      std::vector<std::string> list = ids.get<std::vector<std::string>>();
      for (const auto& id : list) {
        if (!m.index_of(id)) {
          throw SchemaError("alias '" + phrase + "' refers to unknown column '" + id + "'");
        }
      }
      m.aliases[lower(phrase)] = std::move(list);
    }
  }
  return m;
}

ColumnManifest ColumnManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError("manifest is not valid JSON: " + path.string());
  return from_json(j);
}

nlohmann::json ColumnManifest::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json cj = {{"id", c.id}, {"label", c.label}, {"kind", kind_name(c.kind)}};
    if (!c.unit.empty()) cj["unit"] = c.unit;
    if (!c.format.empty()) cj["format"] = c.format;
    cols.push_back(std::move(cj));
  }
  return {{"columns", cols}, {"aliases", aliases}};
}

std::optional<std::size_t> ColumnManifest::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].id == id) return i;
  }
  return std::nullopt;
}

PatientRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open patient record " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (!j.is_object()) throw SchemaError("patient record must be a JSON object");
  return j;
}

PatientRecord sample_record() {
  return {
      {"sex", "M"},
      {"age", 63},
      {"height", 172},
      {"weight", 68.5},
      {"diagnosis", "RLL adenocarcinoma"},
      {"comorbidities", {"hypertension", "type 2 diabetes"}},
      {"fev1_l", 2.1},
      {"fev1_pct", 78},
      {"fvc_l", 3.2},
      {"fvc_pct", 85},
      {"surgery", "RATS RLL lobectomy"},
      {"tumor", "2.3 cm, RLL superior segment"},
  };
}

std::string_view to_string(Action a) { return a == Action::kShow ? "SHOW" : "HIDE"; }

Decision parse_decision(std::string_view reply, const ColumnManifest& manifest) {
  const nlohmann::json obj = extract_json_object(reply);
  Decision d;
  d.field_probs.assign(manifest.size(), 0.0);

  if (obj.contains("action_probs") && obj["action_probs"].is_object()) {
    double show = 0.0, hide = 0.0;
    for (const auto& [k, v] : obj["action_probs"].items()) {
      if (!v.is_number()) continue;
      if (lower(k) == "show") show = v.get<double>();
      if (lower(k) == "hide") hide = v.get<double>();
    }
    d.action = hide > show ? Action::kHide : Action::kShow;
  } else if (obj.contains("action") && obj["action"].is_string()) {
    const std::string a = lower(obj["action"].get<std::string>());
    if (a == "show") {
      d.action = Action::kShow;
    } else if (a == "hide") {
      d.action = Action::kHide;
    } else {
      throw ParseError("unknown IR action '" + a + "'");
    }
  } else {
    throw ParseError("IR reply has no action");
  }
  d.reset = obj.value("reset", false);
  if (d.reset) d.action = Action::kHide;

  auto set_prob = [&](const std::string& name, double p) {
    const auto idx = resolve_field(name, manifest);
    if (idx.empty()) spdlog::warn("IR reply names unknown field '{}'", name);
    for (std::size_t i : idx) d.field_probs[i] = std::max(d.field_probs[i], std::clamp(p, 0.0, 1.0));
  };
  if (obj.contains("field_probs") && obj["field_probs"].is_object()) {
    for (const auto& [k, v] : obj["field_probs"].items()) {
      if (v.is_number()) set_prob(k, v.get<double>());
    }
  } else if (obj.contains("fields") && obj["fields"].is_array()) {
    for (const auto& f : obj["fields"]) {
      if (f.is_string()) set_prob(f.get<std::string>(), 1.0);
    }
  }
  return d;
}

std::string build_prompt(std::string_view command, const ColumnManifest& manifest) {
  std::string p;
  p += "You are the information retrieval agent. Decide whether the surgeon wants to SHOW "
       "or HIDE patient information, and which data fields to display.\n\n";
  p += "Data fields:\n";
  for (const auto& c : manifest.columns) p += "- " + c.id + ": " + c.label + "\n";
  p += "\nPhrase guide:\n";
  for (const auto& [phrase, ids] : manifest.aliases) {
    p += "- \"" + phrase + "\" means";
    for (const auto& id : ids) p += " " + id;
    p += "\n";
  }
  p += "\nRules:\n"
       "- \"Reset\" or \"Initialize\" hides the overlay and restores the defaults.\n"
       "- Give every field an inclusion probability between 0 and 1.\n\n";
  p += "Output JSON only: {\"action_probs\": {\"SHOW\": p, \"HIDE\": p}, "
       "\"field_probs\": {\"<field id>\": p}, \"reset\": false}\n\n";
  p += "Revised command: \"" + std::string(command) + "\"\n";
  return p;
}

Decision determine_action(std::string_view command, const ColumnManifest& manifest,
                          LlmBackend& backend) {
  ChatRequest req;
  req.label = "ir_agent";
  req.user_prompt = build_prompt(command, manifest);
  const ChatResponse res = backend.chat(req);
  try {
    return parse_decision(res.text, manifest);
  } catch (const ParseError& e) {
    throw StageFailure(std::string("IR action determination: ") + e.what());
  }
}

std::vector<bool> threshold_fields(const Decision& d, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1)");
  }
  std::vector<bool> y(d.field_probs.size(), false);
  if (d.action == Action::kHide) return y;
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = d.field_probs[j] >= threshold;
  return y;
}

std::vector<Column> select_columns(const std::vector<bool>& y, const ColumnManifest& manifest) {
  if (y.size() != manifest.size()) throw std::invalid_argument("indicator size mismatch");
  std::vector<Column> out;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j]) out.push_back(manifest.columns[j]);
  }
  return out;
}

std::string format_field(const Column& column, const PatientRecord& record) {
  const std::string head = column.label + ": ";
  for (const auto& key : column.sources()) {
    if (!has_value(record, key)) return head + std::string(kMissing);
  }
  switch (column.kind) {
    case ColumnKind::kText:
      return head + value_text(record[column.id]);
    case ColumnKind::kNumber: {
      std::string s = head + value_text(record[column.id]);
      if (!column.unit.empty()) s += " " + column.unit;
      return s;
    }
    case ColumnKind::kComposite: {
      std::string body;
      std::size_t pos = 0;
      while (pos < column.format.size()) {
        const auto open = column.format.find('{', pos);
        if (open == std::string::npos) {
          body += column.format.substr(pos);
          break;
        }
        body += column.format.substr(pos, open - pos);
        const auto close = column.format.find('}', open);
        body += value_text(record[column.format.substr(open + 1, close - open - 1)]);
        pos = close + 1;
      }
      return head + body;
    }
  }
  return head;
}

std::string compose_info_string(const std::vector<Column>& columns, const PatientRecord& record) {
  std::string s;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) s += '\n';
    s += format_field(columns[i], record);
  }
  return s;
}

IrState empty_state(const ColumnManifest& manifest) {
  return IrState{std::vector<bool>(manifest.size(), false), ""};
}

Applied apply(const IrState& /*state*/, const Decision& decision, const ColumnManifest& manifest,
              const PatientRecord& record, double threshold) {
  Applied out;
  OverlayDirective& dir = out.directive;
  dir.span = {0.0, ClipRef::kDurationS};
  if (decision.action == Action::kHide) {
    out.state = empty_state(manifest);
    dir.kind = DirectiveKind::kClearOverlay;
    return out;
  }
  out.state.fields = threshold_fields(decision, threshold);
  out.state.text = compose_info_string(select_columns(out.state.fields, manifest), record);
  if (out.state.text.empty()) {
    dir.kind = DirectiveKind::kClearOverlay;
    return out;
  }
  dir.kind = DirectiveKind::kTextOverlay;
  dir.anchor = Anchor::kTopRight;
  dir.payload = TextPayload{out.state.text};
  return out;
}

nlohmann::json canonical_params(const Decision& d, const ColumnManifest& manifest,
                                double threshold) {
  nlohmann::json fields = nlohmann::json::array();
  const auto y = threshold_fields(d, threshold);
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j]) fields.push_back(manifest.columns[j].id);
  }
  return {{"fields", fields}};
}

}  // namespace surgvoice::ir
