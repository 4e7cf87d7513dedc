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

#include "surgvoice/service.h"

#include <algorithm>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"

namespace surgvoice {
namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
  send_json(res, status, {{"error", message}});
}

std::string path_field(const nlohmann::json& body, const char* key) {
  if (!body.contains(key)) return "";
  if (!body[key].is_string()) throw SchemaError(std::string("'") + key + "' must be a path string");
  return body[key].get<std::string>();
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (!j.is_object()) throw SchemaError("request body must be a JSON object");
  return j;
}

std::vector<Transcript> transcripts_from(const nlohmann::json& body) {
  auto one = [](const nlohmann::json& v) {
    Transcript t;
    t.origin = TranscriptOrigin::kHttp;
    if (v.is_string()) {
      t.text = v.get<std::string>();
    } else if (!v.is_null()) {
      throw SchemaError("transcript text must be a string or null");
    }
    return t;
  };
  std::vector<Transcript> out;
  if (body.contains("attempts")) {
    if (!body["attempts"].is_array() || body["attempts"].empty()) {
      throw SchemaError("'attempts' must be a nonempty list");
    }
    for (const auto& a : body["attempts"]) out.push_back(one(a));
  } else if (body.value("absent", false)) {
    out.push_back(one(nullptr));
  } else if (body.contains("text")) {
    out.push_back(one(body["text"]));
  } else {
    throw SchemaError("command body needs 'text', 'absent' or 'attempts'");
  }
  if (body.contains("speaker") && body["speaker"].is_string()) {
    for (auto& t : out) t.speaker = body["speaker"].get<std::string>();
  }
  return out;
}

std::string to_pgm(const iv::Image2D& img) {
  const auto [mn, mx] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const int lo = img.pixels.empty() ? 0 : *mn;
  const int hi = img.pixels.empty() ? 0 : *mx;
  std::ostringstream out;
  out << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
  for (std::int16_t p : img.pixels) {
    const int v = hi > lo ? (p - lo) * 255 / (hi - lo) : 0;
    out.put(static_cast<char>(v));
  }
  return out.str();
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    send_error(res, 422, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 422, e.what());
  } catch (const TransportError& e) {
    send_error(res, 503, e.what());
  } catch (const MockMiss& e) {
    send_error(res, 500, e.what());
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    send_error(res, 500, e.what());
  }
}

}  // namespace

std::string SessionManager::create(const nlohmann::json& body) {
  auto entry = std::make_shared<Entry>();
  entry->resources = std::make_unique<Resources>();
  Resources& res = *entry->resources;

  if (auto p = path_field(body, "manifest"); !p.empty()) {
    res.columns = ir::ColumnManifest::load(p);
    res.vocabulary = CommandVocabulary::defaults(res.columns);
  }
  if (auto p = path_field(body, "record"); !p.empty()) res.record = ir::load_record(p);
  if (auto p = path_field(body, "structures"); !p.empty()) {
    res.structures = ar::StructureManifest::load(p);
  }
  if (auto p = path_field(body, "volume"); !p.empty()) res.set_volume(iv::Volume::load(p));
  if (auto p = path_field(body, "correction_rules"); !p.empty()) {
    res.rules = CorrectionRules::load(p);
  }
  if (body.contains("fps")) {
    res.fps = body["fps"].get<int>();
    if (res.fps < 1) throw SchemaError("fps must be positive");
  }
  if (body.contains("ic_max")) {
    res.ic_max = body["ic_max"].get<int>();
    if (res.ic_max < 0) throw SchemaError("ic_max must be non-negative");
  }

  const std::string backend = body.value("backend", "mock");
  if (backend == "live") {
    entry->backend = std::make_unique<HttpBackend>(HttpBackend::from_env());
  } else if (backend == "mock") {
    MockScript script;
    if (auto p = path_field(body, "mock_script"); !p.empty()) {
      script = MockScript::load_jsonl(p);
    } else if (body.contains("mock_script_jsonl")) {
      script = MockScript::parse_jsonl(body["mock_script_jsonl"].get<std::string>());
    } else if (auto p = path_field(body, "dataset"); !p.empty()) {
      script = gold_mock_script(eval::load_dataset(p));
    } else {
      throw SchemaError("mock backend needs mock_script, mock_script_jsonl or dataset");
    }
    if (body.contains("strict")) script.strict = body["strict"].get<bool>();
    entry->backend = std::make_unique<MockBackend>(std::move(script));
  } else {
    throw SchemaError("backend must be 'mock' or 'live'");
  }

  entry->session = std::make_unique<Session>(res);
  std::lock_guard lock(mu_);
  entry->id = "s" + std::to_string(next_id_++);
  sessions_[entry->id] = entry;
  return entry->id;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void register_routes(httplib::Server& server, SessionManager& manager) {
  server.Get("/healthz", [&manager](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"sessions", manager.size()}});
  });

  server.Post("/sessions", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = manager.create(parse_body(req));
      send_json(res, 201, {{"id", id}});
    });
  });

  server.Post(R"(/sessions/([^/]+)/command)",
              [&manager](const httplib::Request& req, httplib::Response& res) {
                auto entry = manager.find(req.matches[1]);
                if (!entry) return send_error(res, 404, "unknown session");
                guarded(res, [&] {
                  FixtureSource source(transcripts_from(parse_body(req)));
                  std::lock_guard lock(entry->mu);
                  CommandResult result = entry->session->process(source, *entry->backend);
                  nlohmann::json body = to_json(result);
                  body["id"] = entry->id;
                  body["agent_state"] =
                      result.outcome
                          ? to_json(entry->session->state().agent_states.at(result.outcome->agent))
                          : nlohmann::json(nullptr);
                  send_json(res, 200, body);
                });
              });

  server.Get(R"(/sessions/([^/]+)/state)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               auto entry = manager.find(req.matches[1]);
               if (!entry) return send_error(res, 404, "unknown session");
               std::lock_guard lock(entry->mu);
               nlohmann::json body = to_json(entry->session->state());
               body["id"] = entry->id;
               send_json(res, 200, body);
             });

  server.Post(R"(/sessions/([^/]+)/reset)",
              [&manager](const httplib::Request& req, httplib::Response& res) {
                auto entry = manager.find(req.matches[1]);
                if (!entry) return send_error(res, 404, "unknown session");
                std::lock_guard lock(entry->mu);
                entry->session->reset();
                nlohmann::json body = to_json(entry->session->state());
                body["id"] = entry->id;
                send_json(res, 200, body);
              });

  server.Get(R"(/sessions/([^/]+)/slices/(axial|coronal|sagittal)\.pgm)",
             [&manager](const httplib::Request& req, httplib::Response& res) {
               auto entry = manager.find(req.matches[1]);
               if (!entry) return send_error(res, 404, "unknown session");
               if (!entry->resources->volume) return send_error(res, 404, "no volume loaded");
               const Plane plane = plane_from_string(std::string(req.matches[2])).value();
               std::lock_guard lock(entry->mu);
               const auto& iv_state =
                   std::get<IvState>(entry->session->state().agent_states.at(AgentId::kIv));
               int index = at(iv_state.positions, plane);
               if (req.has_param("index")) {
                 try {
                   index = std::stoi(req.get_param_value("index"));
                 } catch (const std::exception&) {
                   return send_error(res, 422, "index must be an integer");
                 }
               }
               try {
                 res.set_content(to_pgm(iv::slice_volume(*entry->resources->volume, plane, index)),
                                 "image/x-portable-graymap");
               } catch (const OutOfBounds& e) {
                 send_error(res, 422, e.what());
               }
             });
}

}  // namespace surgvoice
