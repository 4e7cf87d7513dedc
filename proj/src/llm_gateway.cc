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

#include "surgvoice/llm_gateway.h"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice {
namespace {

std::string strip_code_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    const auto first = line.find_first_not_of(" \t");
    const bool fence = first != std::string_view::npos && line.substr(first, 3) == "```";
    if (!fence) {
      out.append(line);
      out.push_back('\n');
    }
    pos = eol + 1;
  }
  return out;
}

// End of the balanced object starting at `open`, or npos.
std::size_t balanced_end(const std::string& s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string::npos;
}

std::string snippet(std::string_view s, std::size_t n = 120) {
  std::string out(s.substr(0, n));
  std::replace(out.begin(), out.end(), '\n', ' ');
  if (s.size() > n) out += "...";
  return out;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

nlohmann::json extract_json_object(std::string_view text) {
  const std::string cleaned = strip_code_fences(text);
  std::size_t open = cleaned.find('{');
  while (open != std::string::npos) {
    const std::size_t close = balanced_end(cleaned, open);
    if (close == std::string::npos) break;
    auto parsed = nlohmann::json::parse(cleaned.begin() + static_cast<std::ptrdiff_t>(open),
                                        cleaned.begin() + static_cast<std::ptrdiff_t>(close) + 1,
                                        nullptr, /*allow_exceptions=*/false);
    if (parsed.is_object()) return parsed;
    open = cleaned.find('{', open + 1);
  }
  throw ParseError("no JSON object in model output: " + snippet(text));
}

std::map<FunctionId, double> parse_probability_json(std::string_view text,
                                                    const std::set<FunctionId>& expected) {
  nlohmann::json obj = extract_json_object(text);
  // Some models wrap the map: {"probabilities": {...}}.
  if (obj.size() == 1 && obj.begin().value().is_object() &&
      !function_from_string(obj.begin().key())) {
    obj = obj.begin().value();
  }
  std::map<FunctionId, double> probs;
  for (const auto& [key, value] : obj.items()) {
    const auto f = function_from_string(key);
    if (!f || !expected.contains(*f)) {
      spdlog::warn("dropping unknown function key '{}' from proposal", key);
      continue;
    }
    if (!value.is_number()) {
      spdlog::warn("dropping non-numeric probability for '{}'", key);
      continue;
    }
    const double raw = value.get<double>();
    const double clamped = std::clamp(raw, 0.0, 1.0);
    if (clamped != raw) spdlog::debug("clamped probability for '{}' from {}", key, raw);
    probs[*f] = clamped;
  }
  return probs;
}

nlohmann::json parse_labeled_json(std::string_view text, const std::vector<FieldSpec>& schema) {
  const nlohmann::json obj = extract_json_object(text);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& field : schema) {
    if (!obj.contains(field.name) || obj[field.name].is_null()) {
      if (field.required) throw ParseError("missing field '" + field.name + "'");
      continue;
    }
    nlohmann::json value = obj[field.name];
    bool ok = true;
    switch (field.type) {
      case FieldType::kString: ok = value.is_string(); break;
      case FieldType::kNumber: ok = value.is_number(); break;
      case FieldType::kObject: ok = value.is_object(); break;
      case FieldType::kArray: ok = value.is_array(); break;
      case FieldType::kBoolean:
        if (value.is_string()) {
          std::string s = value.get<std::string>();
          std::transform(s.begin(), s.end(), s.begin(), ::tolower);
          if (s == "true" || s == "yes") value = true;
          else if (s == "false" || s == "no") value = false;
        }
        ok = value.is_boolean();
        break;
      case FieldType::kAny: break;
    }
    if (!ok) throw ParseError("field '" + field.name + "' has the wrong type");
    out[field.name] = std::move(value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mock backend.

MockScript MockScript::parse_jsonl(std::string_view text) {
  MockScript script;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object()) throw SchemaError("mock script line is not a JSON object", row);
    MockEntry e;
    if (j.contains("label") && !j["label"].is_null()) e.label = j["label"].get<std::string>();
    const auto& m = j.contains("match") ? j["match"] : nlohmann::json();
    if (m.is_string()) {
      e.match.push_back(m.get<std::string>());
    } else if (m.is_array()) {
      for (const auto& s : m) e.match.push_back(s.get<std::string>());
    } else if (!m.is_null()) {
      throw SchemaError("mock 'match' must be a string or list", row);
    }
    if (j.contains("responses")) {
      for (const auto& r : j["responses"]) e.responses.push_back(r.get<std::string>());
    } else if (j.contains("response")) {
      const auto& r = j["response"];
      e.responses.push_back(r.is_string() ? r.get<std::string>() : r.dump());
    }
    if (e.responses.empty()) throw SchemaError("mock entry has no response", row);
    script.entries.push_back(std::move(e));
  }
  return script;
}

MockScript MockScript::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open mock script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_jsonl(ss.str());
}

std::string MockScript::to_jsonl() const {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::json j;
    if (e.label) j["label"] = *e.label;
    j["match"] = e.match.size() == 1 ? nlohmann::json(e.match[0]) : nlohmann::json(e.match);
    if (e.responses.size() == 1) {
      j["response"] = e.responses[0];
    } else {
      j["responses"] = e.responses;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

MockBackend::MockBackend(MockScript script)
    : script_(std::move(script)), cursors_(script_.entries.size(), 0) {}

ChatResponse MockBackend::chat(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  history_.push_back(request);
  const std::string haystack = request.system_prompt + "\n" + request.user_prompt;
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < script_.entries.size(); ++i) {
    const auto& e = script_.entries[i];
    if (e.label && *e.label != request.label) continue;
    const bool all = std::all_of(e.match.begin(), e.match.end(),
                                 [&](const std::string& m) { return contains(haystack, m); });
    if (all) hits.push_back(i);
  }
  if (hits.empty()) {
    if (script_.strict) {
      throw MockMiss("no mock entry for [" + request.label + "] " +
                     snippet(request.user_prompt, 200));
    }
    return {"{}", 0.0};
  }
  if (hits.size() > 1 && script_.strict) {
    throw MockMiss(std::to_string(hits.size()) + " mock entries match [" + request.label +
                   "] " + snippet(request.user_prompt, 200));
  }
  const std::size_t idx = hits.front();
  const auto& responses = script_.entries[idx].responses;
  const std::size_t k = std::min(cursors_[idx], responses.size() - 1);
  ++cursors_[idx];
  return {responses[k], 0.0};
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return history_.size();
}

std::vector<ChatRequest> MockBackend::history() const {
  std::lock_guard lock(mu_);
  return history_;
}

// ---------------------------------------------------------------------------
// Live backend.

HttpBackend::HttpBackend(std::string url, std::string model, double timeout_s)
    : url_(std::move(url)), model_(std::move(model)), timeout_s_(timeout_s) {}

HttpBackend HttpBackend::from_env() {
  const char* url = std::getenv("VISA_LLM_URL");
  const char* model = std::getenv("VISA_LLM_MODEL");
  return HttpBackend(url && *url ? url : "http://127.0.0.1:11434/api/chat",
                     model && *model ? model : "gemma3:27b-it-qat");
}

bool HttpBackend::openai_style() const {
  return url_.size() >= 20 && url_.ends_with("/v1/chat/completions");
}

nlohmann::json HttpBackend::request_body(const ChatRequest& request) const {
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  nlohmann::json body = {{"model", model_}, {"messages", messages}, {"stream", false}};
  if (openai_style()) {
    body["temperature"] = request.temperature;
    body["seed"] = request.seed;
    if (request.max_tokens != ChatRequest::kUnlimitedTokens) {
      body["max_tokens"] = request.max_tokens;
    }
  } else {
    body["options"] = {{"temperature", request.temperature},
                       {"seed", request.seed},
                       {"num_predict", request.max_tokens}};
  }
  return body;
}

ChatResponse HttpBackend::chat(const ChatRequest& request) {
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos) throw TransportError("bad model URL: " + url_);
  const auto path_start = url_.find('/', scheme_end + 3);
  const std::string origin = url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_s_);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, request_body(request).dump(), "application/json");
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    throw TransportError("model server unreachable at " + url_ + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("model server returned HTTP " + std::to_string(res->status));
  }
  const auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw TransportError("model server sent non-JSON body");
  std::string text;
  if (body.contains("choices") && !body["choices"].empty()) {
    text = body["choices"][0]["message"].value("content", "");
  } else if (body.contains("message")) {
    text = body["message"].value("content", "");
  } else {
    text = body.value("response", "");
  }
  return {std::move(text), latency};
}

}  // namespace surgvoice
