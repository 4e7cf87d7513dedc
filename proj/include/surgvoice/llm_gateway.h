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

#ifndef SURGVOICE_LLM_GATEWAY_H_
#define SURGVOICE_LLM_GATEWAY_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surgvoice/core_model.h"

namespace surgvoice {

struct ChatRequest {
  static constexpr int kUnlimitedTokens = -1;

  // Stage tag ("orchestrator", "correct_validate", ...). Not sent to the
  // model; used by the mock to filter entries and by trace export.
  std::string label;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int seed = 42;
  int max_tokens = kUnlimitedTokens;
};

struct ChatResponse {
  std::string text;
  double latency_ms = 0.0;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

inline ChatResponse chat(LlmBackend& backend, const ChatRequest& request) {
  return backend.chat(request);
}

// One scripted reply. An entry matches a request when its label (if any)
// equals the request label and every match string occurs in the system or
// user prompt. Responses are consumed in order; the last one repeats.
struct MockEntry {
  std::optional<std::string> label;
  std::vector<std::string> match;
  std::vector<std::string> responses;
};

struct MockScript {
  std::vector<MockEntry> entries;
  bool strict = true;

  // JSON lines: {"match": str|[str], "response": str} or "responses": [str],
  // optional "label". Blank lines and lines starting with '#' are skipped.
  static MockScript load_jsonl(const std::filesystem::path& path);
  static MockScript parse_jsonl(std::string_view text);
  std::string to_jsonl() const;
};

class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(MockScript script);

  // Strict: exactly one entry must match, otherwise MockMiss. Lenient: the
  // first matching entry wins, and an unmatched request gets "{}".
  ChatResponse chat(const ChatRequest& request) override;

  std::size_t calls() const;
  // Requests seen so far, in order. Kept for trace export and tests.
  std::vector<ChatRequest> history() const;

 private:
  MockScript script_;
  std::vector<std::size_t> cursors_;
  std::vector<ChatRequest> history_;
  mutable std::mutex mu_;
};

// POSTs a chat completion to a local model server. URLs ending in
// "/v1/chat/completions" use the OpenAI-style body; anything else is treated
// as an Ollama-style /api/chat endpoint.
class HttpBackend : public LlmBackend {
 public:
  HttpBackend(std::string url, std::string model, double timeout_s = 120.0);

  // VISA_LLM_URL (default http://127.0.0.1:11434/api/chat) and
  // VISA_LLM_MODEL (default gemma3:27b-it-qat).
  static HttpBackend from_env();

  ChatResponse chat(const ChatRequest& request) override;

  nlohmann::json request_body(const ChatRequest& request) const;
  const std::string& url() const { return url_; }
  const std::string& model() const { return model_; }

 private:
  bool openai_style() const;

  std::string url_;
  std::string model_;
  double timeout_s_;
};

// Strips ``` fences and returns the first balanced {...} object in text.
nlohmann::json extract_json_object(std::string_view text);

// Function probabilities from an orchestrator reply. Unknown keys are dropped
// (and logged), values are clamped to [0,1], non-numeric values dropped.
// Missing keys are left missing.
std::map<FunctionId, double> parse_probability_json(std::string_view text,
                                                    const std::set<FunctionId>& expected);

enum class FieldType { kString, kBoolean, kNumber, kObject, kArray, kAny };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::kAny;
  bool required = true;
};

// Returns an object holding only the schema fields present in the reply.
// Throws ParseError on a missing required field or a type mismatch.
nlohmann::json parse_labeled_json(std::string_view text,
                                  const std::vector<FieldSpec>& schema);

}  // namespace surgvoice

#endif  // SURGVOICE_LLM_GATEWAY_H_
