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

#ifndef SURGVOICE_SERVICE_H_
#define SURGVOICE_SERVICE_H_

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "surgvoice/llm_gateway.h"
#include "surgvoice/session_engine.h"

namespace httplib {
class Server;
}

namespace surgvoice {

// Session table behind the HTTP API. Requests to one session are
// serialized; distinct sessions run concurrently.
class SessionManager {
 public:
  struct Entry {
    std::string id;
    std::unique_ptr<Resources> resources;
    std::unique_ptr<LlmBackend> backend;
    std::unique_ptr<Session> session;
    std::mutex mu;
  };

  // Body fields (all optional): backend ("mock" | "live"), mock_script
  // (path), mock_script_jsonl (inline), manifest, record, structures,
  // volume, correction_rules (paths), fps, ic_max. Throws SchemaError.
  std::string create(const nlohmann::json& body);
  std::shared_ptr<Entry> find(const std::string& id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

// POST /sessions, POST /sessions/{id}/command, GET /sessions/{id}/state,
// POST /sessions/{id}/reset, GET /sessions/{id}/slices/{plane}.pgm,
// GET /healthz.
void register_routes(httplib::Server& server, SessionManager& manager);

}  // namespace surgvoice

#endif  // SURGVOICE_SERVICE_H_
