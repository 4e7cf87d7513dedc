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

#include "surgvoice/workflow_stages.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool token_matches(const std::string& word, const std::string& term) {
  if (word == term) return true;
  return word.size() == term.size() + 1 && word.back() == 's' && word.compare(0, term.size(), term) == 0;
}

Transcript transcript_from_payload(const std::string& body, TranscriptOrigin origin) {
  Transcript t;
  t.origin = origin;
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_object()) {
    if (j.contains("text") && j["text"].is_string()) {
      const std::string text = j["text"].get<std::string>();
      if (!text.empty()) t.text = text;
    }
    if (j.contains("speaker") && j["speaker"].is_string()) {
      t.speaker = j["speaker"].get<std::string>();
    }
    return t;
  }
  std::string text = body;
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  if (!text.empty()) t.text = text;
  return t;
}

constexpr std::string_view kAgentGuide =
    "Agents:\n"
    "- information retrieval agent (ir_agent): shows or hides patient information such as "
    "sex, age, height, weight, diagnosis, comorbidities, pulmonary function (FEV1, FVC), "
    "surgery and tumor details.\n"
    "- image viewer agent (iv_agent): shows CT slices in axial, coronal and sagittal planes, "
    "moves slice positions, zooms into one plane, zooms out, removes the CT views.\n"
    "- anatomy rendering agent (ar_agent): shows the 3D lung model (lobes LLL, LUL, RLL, RML, "
    "RUL, nodules, trachea/bronchia), changes views, rotates, zooms in and out, removes the "
    "model.\n";

}  // namespace

FixtureSource::FixtureSource(std::vector<Transcript> items)
    : items_(items.begin(), items.end()) {}

Transcript FixtureSource::next() {
  if (items_.empty()) throw SourceExhausted("fixture source has no transcripts left");
  Transcript t = std::move(items_.front());
  items_.pop_front();
  return t;
}

StreamSource::StreamSource(std::istream& in) : in_(in) {}

Transcript StreamSource::next() {
  std::string line;
  if (!std::getline(in_, line)) throw SourceExhausted("input stream ended");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Transcript t;
  t.origin = TranscriptOrigin::kStdin;
  if (!line.empty()) t.text = line;
  return t;
}

ExternalSttSource::ExternalSttSource(std::string target, bool is_http)
    : target_(std::move(target)), is_http_(is_http) {}

ExternalSttSource ExternalSttSource::command(std::string shell_command) {
  return ExternalSttSource(std::move(shell_command), false);
}

ExternalSttSource ExternalSttSource::http(std::string url) {
  return ExternalSttSource(std::move(url), true);
}

Transcript ExternalSttSource::next() {
  if (is_http_) {
    const auto scheme_end = target_.find("://");
    const auto path_start =
        target_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string host =
        path_start == std::string::npos ? target_ : target_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : target_.substr(path_start);
    httplib::Client client(host);
    auto res = client.Get(path);
    if (!res) throw TransportError("STT endpoint unreachable: " + target_);
    if (res->status == 204 || res->status == 410) throw SourceExhausted("STT endpoint is done");
    if (res->status / 100 != 2) {
      throw TransportError("STT endpoint returned HTTP " + std::to_string(res->status));
    }
    return transcript_from_payload(res->body, TranscriptOrigin::kExternalStt);
  }
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(target_.c_str(), "r"), pclose);
  if (!pipe) throw TransportError("cannot run STT command: " + target_);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
  const int rc = pclose(pipe.release());
  if (rc != 0) throw SourceExhausted("STT command exited with status " + std::to_string(rc));
  return transcript_from_payload(out, TranscriptOrigin::kExternalStt);
}

Transcript intake_transcript(TranscriptSource& source) { return source.next(); }

CorrectionRules CorrectionRules::defaults() {
  return CorrectionRules{{
      {"city", "CT"},
      {"corona", "coronal"},
      {"covid", "coronal"},
      {"coronary", "coronal"},
      {"long", "lung"},
      {"2", "to"},
      {"write", "right"},
      {"june", "zoom"},
      {"at", "add"},
  }};
}

CorrectionRules CorrectionRules::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open correction rules " + path.string());
  auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (!j.is_object()) throw SchemaError("correction rules must be a JSON object");
  CorrectionRules r;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw SchemaError("correction for '" + k + "' must be a string");
    r.rules.emplace_back(k, v.get<std::string>());
  }
  return r;
}

// Whole-word, case-insensitive literal replacement.
std::string CorrectionRules::apply(std::string_view text) const {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    const std::string word(text.substr(i, j - i));
    const std::string key = lower(word);
    std::string replaced = word;
    for (const auto& [from, to] : rules) {
      if (lower(from) == key) {
        replaced = to;
        break;
      }
    }
    out += replaced;
    i = j;
  }
  return out;
}

CommandVocabulary CommandVocabulary::defaults(const ir::ColumnManifest& manifest) {
  std::set<std::string> terms;
  for (const auto& c : manifest.columns) {
    terms.insert(lower(c.id));
    for (const auto& w : tokenize(c.label)) terms.insert(w);
  }
  for (const auto& [phrase, ids] : manifest.aliases) terms.insert(lower(phrase));
  static const std::vector<std::string_view> kDomain = {
      // imaging
      "ct", "scan", "slice", "image", "axial", "coronal", "sagittal", "plane", "view",
      // anatomy
      "lll", "lul", "rll", "rml", "rul", "lobe", "lung", "nodule", "trachea", "bronchi",
      "bronchia", "bronchus", "airway", "windpipe", "model", "3d", "anatomy", "anatomical",
      "recon", "reconstruction",
      // viewpoints and directions
      "anterior", "posterior", "superior", "inferior", "surgical", "front", "back", "top",
      "bottom", "left", "right", "up", "down", "forward", "backward", "horizontal", "vertical",
      "horizontally", "vertically", "behind", "above", "below", "underneath", "higher", "lower",
      "closer", "wider", "bigger", "smaller", "enlarge", "shrink", "spin", "tilt", "turn",
      "sideways",
      // agent-specific verbs
      "zoom", "rotate", "rotation", "reset", "initialize", "erase", "remove", "move", "plus",
      "minus", "middle", "select",
      // patient data
      "bmi", "pulmonary", "spirometry", "age", "sex"};
  for (auto t : kDomain) terms.insert(std::string(t));
  for (AgentId a : kAllAgents) terms.insert(std::string(display_name(a)));
  CommandVocabulary v;
  v.terms_.assign(terms.begin(), terms.end());
  return v;
}

bool CommandVocabulary::mentions_known_term(std::string_view command) const {
  const auto words = tokenize(command);
  for (const auto& term : terms_) {
    const auto tt = tokenize(term);
    if (tt.empty() || tt.size() > words.size()) continue;
    for (std::size_t i = 0; i + tt.size() <= words.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < tt.size() && ok; ++k) ok = token_matches(words[i + k], tt[k]);
      if (ok) return true;
    }
  }
  return false;
}

std::string format_memory_window(const std::vector<MemoryEntry>& window) {
  std::string out = "Recent commands (oldest first):\n";
  if (window.empty()) return out + "- (none)\n";
  for (const auto& e : window) {
    out += "- " + e.revised + " -> " + std::string(display_name(e.agent)) + "\n";
  }
  return out;
}

std::string build_correction_prompt(std::string_view transcript, const GlobalMemory& memory,
                                    const CorrectionRules& rules) {
  std::string p;
  p += "You correct speech-to-text transcripts of surgeon voice commands during robotic "
       "lung surgery and decide whether each command is valid.\n\n";
  p += kAgentGuide;
  p += "\nCorrection rules (common misrecognitions):\n";
  for (const auto& [from, to] : rules.rules) p += "- \"" + from + "\" -> \"" + to + "\"\n";
  p += "\nValidation rules:\n"
       "- A command is valid only if one of the three agents can carry it out.\n"
       "- Requests for data the agents do not hold (vital signs, instrument handling, "
       "staff instructions) are invalid.\n"
       "- Keep the surgeon's wording when it is already correct.\n\n";
  p += format_memory_window(memory_window(memory));
  p += "\nOutput JSON only: {\"revised\": \"<corrected command>\", \"valid\": true}\n\n";
  p += "Transcribed command: \"" + std::string(transcript) + "\"\n";
  return p;
}

std::string build_reasoning_prompt(std::string_view revised, const GlobalMemory& memory) {
  std::string p;
  p += "Select the single agent that should carry out the surgeon's command.\n\n";
  p += kAgentGuide;
  p += "\nAmbiguous commands such as \"Zoom in\" or \"Zoom out\" go to the agent used most "
       "recently for a related command.\n\n";
  p += format_memory_window(memory_window(memory));
  p += "\nOutput JSON only: {\"agent\": \"ir_agent\" | \"iv_agent\" | \"ar_agent\", "
       "\"rationale\": \"<one sentence>\"}\n\n";
  p += "Revised command: \"" + std::string(revised) + "\"\n";
  return p;
}

std::string select_agent_command(AgentId agent) {
  return "Select " + std::string(display_name(agent));
}

std::optional<AgentId> parse_select_agent_command(std::string_view revised) {
  std::string s = lower(revised);
  while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) {
    s.pop_back();
  }
  if (s.rfind("select ", 0) != 0) return std::nullopt;
  const std::string name = s.substr(7);
  for (AgentId a : kAllAgents) {
    if (name == display_name(a) || name == to_string(a) || name == short_name(a)) return a;
  }
  return std::nullopt;
}

ValidationResult correct_and_validate(const Transcript& transcript, const GlobalMemory& memory,
                                      LlmBackend& backend, const StageResources& resources) {
  ValidationResult out;
  if (transcript.silent()) {
    if (auto last = memory.last_agent()) {
      out.revised = select_agent_command(*last);
      out.valid = true;
    }
    return out;
  }

  const CorrectionRules fallback_rules =
      resources.rules ? CorrectionRules{} : CorrectionRules::defaults();
  const CorrectionRules& rules = resources.rules ? *resources.rules : fallback_rules;

  ChatRequest req;
  req.label = "correct_validate";
  req.user_prompt = build_correction_prompt(*transcript.text, memory, rules);
  const ChatResponse res = backend.chat(req);
  try {
    const auto j = parse_labeled_json(
        res.text, {{"revised", FieldType::kString, true}, {"valid", FieldType::kBoolean, true}});
    out.revised = j["revised"].get<std::string>();
    out.valid = j["valid"].get<bool>();
  } catch (const ParseError& e) {
    spdlog::warn("correction reply unusable ({}); treating command as invalid", e.what());
    return ValidationResult{*transcript.text, false, false};
  }
  if (out.valid && out.revised.empty()) out.valid = false;
  if (out.valid && resources.vocabulary && !parse_select_agent_command(out.revised) &&
      !resources.vocabulary->mentions_known_term(out.revised)) {
    out.valid = false;
    out.backstop_rejected = true;
  }
  return out;
}

AgentChoice reason_agent(const ValidationResult& validation, const GlobalMemory& memory,
                         LlmBackend& backend) {
  if (!validation.valid) throw StageFailure("command reasoning called on an invalid command");
  if (auto agent = parse_select_agent_command(validation.revised)) {
    return AgentChoice{*agent, std::string("explicit agent selection")};
  }
  ChatRequest req;
  req.label = "command_reasoning";
  req.user_prompt = build_reasoning_prompt(validation.revised, memory);
  const ChatResponse res = backend.chat(req);
  try {
    const auto j = parse_labeled_json(
        res.text, {{"agent", FieldType::kString, true}, {"rationale", FieldType::kString, false}});
    const auto agent = agent_from_string(j["agent"].get<std::string>());
    if (!agent) throw ParseError("unknown agent '" + j["agent"].get<std::string>() + "'");
    AgentChoice choice{*agent, std::nullopt};
    if (j.contains("rationale") && j["rationale"].is_string()) {
      choice.rationale = j["rationale"].get<std::string>();
    }
    return choice;
  } catch (const ParseError& e) {
    throw StageFailure(std::string("command reasoning: ") + e.what());
  }
}

}  // namespace surgvoice
