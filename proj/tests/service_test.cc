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

#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "surgvoice/service.h"
#include "test_support.h"

namespace surgvoice {
namespace {

class ServerFixture {
 public:
  ServerFixture() {
    register_routes(server_, manager_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ServerFixture() {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body, int expect) const {
    auto res = client().Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return nlohmann::json::parse(res->body, nullptr, false);
  }

  nlohmann::json get(const std::string& path, int expect) const {
    auto res = client().Get(path);
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return nlohmann::json::parse(res->body, nullptr, false);
  }

  std::string create_gold_session() const {
    const auto j = post("/sessions",
                        {{"backend", "mock"}, {"dataset", testing::data_path("dataset.jsonl")}}, 201);
    return j["id"].get<std::string>();
  }

 private:
  httplib::Server server_;
  SessionManager manager_;
  int port_ = 0;
  std::thread thread_;
};

TEST_CASE("health check") {
  ServerFixture s;
  CHECK(s.get("/healthz", 200)["status"] == "ok");
}

TEST_CASE("a patient information command returns a text overlay timeline") {
  ServerFixture s;
  const std::string id = s.create_gold_session();
  const auto r = s.post("/sessions/" + id + "/command", {{"text", "Show patient information"}}, 200);
  CHECK(r["outcome"]["agent"] == "ir_agent");
  CHECK(r["timeline"]["keyframes"][0]["kind"] == "text_overlay");
  CHECK(r["flow_ok"] == true);
  CHECK(r["trace"]["steps"].size() == 6);
  CHECK(r["agent_state"]["text"].get<std::string>().rfind("Sex/Age: M/63", 0) == 0);
}

TEST_CASE("an absent command selects the previous agent") {
  ServerFixture s;
  const std::string id = s.create_gold_session();
  s.post("/sessions/" + id + "/command", {{"text", "Corona plus 100"}}, 200);
  const auto r = s.post("/sessions/" + id + "/command", {{"absent", true}}, 200);
  CHECK(r["validation"]["revised"] == "Select image viewer agent");
  CHECK(r["outcome"]["agent"] == "iv_agent");
  CHECK(r["outcome"]["action"] == "SELECT");
  const auto state = s.get("/sessions/" + id + "/state", 200);
  CHECK(state["agent_states"]["iv_agent"]["positions"]["coronal"] == 356);
  CHECK(state["global_memory"].size() == 2);
}

TEST_CASE("state after reset equals a fresh session with the same id") {
  ServerFixture s;
  const std::string id = s.create_gold_session();
  auto fresh = s.get("/sessions/" + id + "/state", 200);
  s.post("/sessions/" + id + "/command", {{"text", "Corona plus 100"}}, 200);
  CHECK(s.get("/sessions/" + id + "/state", 200) != fresh);
  s.post("/sessions/" + id + "/reset", nlohmann::json::object(), 200);
  CHECK(s.get("/sessions/" + id + "/state", 200) == fresh);

  const std::string other = s.create_gold_session();
  CHECK(other != id);
  auto other_state = s.get("/sessions/" + other + "/state", 200);
  other_state["id"] = id;
  CHECK(other_state == fresh);
}

TEST_CASE("responses are a function of the session history under the mock") {
  ServerFixture a;
  ServerFixture b;
  const std::string ia = a.create_gold_session();
  const std::string ib = b.create_gold_session();
  for (const char* cmd : {"Show patient information", "Corona plus 100"}) {
    const auto ra = a.post("/sessions/" + ia + "/command", {{"text", cmd}}, 200);
    const auto rb = b.post("/sessions/" + ib + "/command", {{"text", cmd}}, 200);
    CHECK(ra == rb);
  }
}

TEST_CASE("an unsupported command loops back and counts an invalid cycle") {
  ServerFixture s;
  const std::string script =
      R"({"label": "correct_validate", "match": "Prepare the stapler", "response": "{\"revised\": \"Prepare the stapler\", \"valid\": true}"})"
      "\n"
      R"({"label": "correct_validate", "match": "Show BMI", "response": "{\"revised\": \"Show BMI\", \"valid\": true}"})"
      "\n"
      R"({"label": "command_reasoning", "match": "Show BMI", "response": "{\"agent\": \"ir_agent\"}"})"
      "\n"
      R"({"label": "ir_agent", "match": "Show BMI", "response": "{\"action\": \"SHOW\", \"fields\": [\"height\", \"weight\"]}"})"
      "\n";
  const auto created = s.post(
      "/sessions", {{"backend", "mock"}, {"mock_script_jsonl", script}, {"strict", false}}, 201);
  const std::string id = created["id"];
  const auto r = s.post("/sessions/" + id + "/command",
                        {{"attempts", {"Prepare the stapler", "Show BMI"}}}, 200);
  CHECK(r["ic"] == 1);
  CHECK(r["flow_ok"] == true);
  CHECK(r["trace"]["ic_events"].size() == 1);
  CHECK(r["outcome"]["params"]["fields"] == nlohmann::json{"height", "weight"});
}

TEST_CASE("error statuses") {
  ServerFixture s;
  CHECK(s.get("/sessions/nope/state", 404).contains("error"));
  s.post("/sessions/nope/command", {{"text", "Zoom in"}}, 404);
  s.post("/sessions/nope/reset", nlohmann::json::object(), 404);
  s.post("/sessions", {{"backend", "quantum"}}, 422);
  s.post("/sessions", {{"backend", "mock"}}, 422);
  s.post("/sessions", {{"backend", "mock"}, {"dataset", "/nonexistent.jsonl"}}, 422);

  const std::string id = s.create_gold_session();
  s.post("/sessions/" + id + "/command", {{"words", "Zoom in"}}, 422);
  s.get("/sessions/" + id + "/slices/axial.pgm", 404);

  setenv("VISA_LLM_URL", "http://127.0.0.1:1/api/chat", 1);
  const std::string live = s.post("/sessions", {{"backend", "live"}}, 201)["id"];
  s.post("/sessions/" + live + "/command", {{"text", "Zoom in"}}, 503);
  unsetenv("VISA_LLM_URL");
}

TEST_CASE("slice images are served for sessions with a volume") {
  ServerFixture s;
  const auto path = std::filesystem::temp_directory_path() / "surgvoice_service_volume.vol";
  iv::Volume::gradient({16, 12, 8}, 2).save(path);
  const std::string id =
      s.post("/sessions",
             {{"backend", "mock"}, {"dataset", testing::data_path("dataset.jsonl")},
              {"volume", path.string()}},
             201)["id"];
  auto res = s.client().Get("/sessions/" + id + "/slices/coronal.pgm?index=3");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.rfind("P5\n16 8\n255\n", 0) == 0);
  CHECK(res->body.size() == std::string("P5\n16 8\n255\n").size() + 16 * 8);
  auto oob = s.client().Get("/sessions/" + id + "/slices/axial.pgm?index=99");
  REQUIRE(oob);
  CHECK(oob->status == 422);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace surgvoice
