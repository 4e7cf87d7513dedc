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

#include <chrono>
#include <cstdlib>
#include <filesystem>

#include "surgvoice/agent_ar.h"
#include "surgvoice/agent_ir.h"
#include "surgvoice/session_engine.h"
#include "surgvoice/workflow_stages.h"
#include "test_support.h"

namespace surgvoice {
namespace {

namespace fs = std::filesystem;
using testing::data_path;
using testing::read_file;

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SURGVOICE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_CASE("bundled resource files match the built-in defaults") {
  CHECK(read_json(data_path("columns.json")) == ir::ColumnManifest::defaults().to_json());
  CHECK(read_json(data_path("patient_record.json")) == ir::sample_record());
  CHECK(read_json(data_path("structures.json")) == ar::StructureManifest::defaults().to_json());
  const auto rules = CorrectionRules::load(data_path("correction_rules.json"));
  CHECK(rules.rules == CorrectionRules::defaults().rules);
}

TEST_CASE("bundled mock script matches the dataset annotations") {
  const auto ds = eval::load_dataset(data_path("dataset.jsonl"));
  CHECK(read_file(data_path("dataset_mock.jsonl")) == gold_mock_script(ds).to_jsonl());
}

TEST_CASE("the gold mock reproduces every annotation") {
  const auto ds = eval::load_dataset(data_path("dataset.jsonl"));
  MockBackend mock(MockScript::load_jsonl(data_path("dataset_mock.jsonl")));
  const EvalRun run = run_dataset(ds, mock, Resources::defaults());
  REQUIRE(run.rows.size() == ds.records.size());
  for (const auto& row : run.rows) {
    CHECK_MESSAGE(row.cc == 1, row.id);
    CHECK_MESSAGE(row.cr == 1, row.id);
    CHECK_MESSAGE(row.ad == 1, row.id);
    CHECK_MESSAGE(row.of == 1, row.id);
    const auto* rec = ds.find(row.id);
    CHECK(row.ic == static_cast<int>(rec->failed_attempts.size()));
  }
}

TEST_CASE("cli eval writes reports for the bundled dataset") {
  const fs::path out = fs::temp_directory_path() / "surgvoice_cli_eval";
  fs::remove_all(out);
  CHECK(run_cli("eval --out " + out.string()) == 0);
  const auto report = read_json(out / "report.json");
  CHECK(eval::report_schema_errors(report).empty());
  CHECK(report["n"] == 240);
  CHECK(report["stage_accuracy"]["of"]["rate"] == 1.0);
  CHECK(read_file(out / "report.csv").rfind(std::string(eval::kCsvHeader), 0) == 0);
  CHECK(fs::file_size(out / "rows.csv") > 0);
  CHECK(fs::file_size(out / "traces.jsonl") > 0);
  fs::remove_all(out);
}

TEST_CASE("cli eval replays a mock script given on the command line") {
  const fs::path out = fs::temp_directory_path() / "surgvoice_cli_replay";
  fs::remove_all(out);
  CHECK(run_cli("eval --mock-script " + data_path("dataset_mock.jsonl").string() + " --out " +
                out.string()) == 0);
  CHECK(read_json(out / "report.json")["success"]["multi_pass"]["successes"] == 240);
  fs::remove_all(out);
}

TEST_CASE("cli eval fails on a missing dataset") {
  CHECK(run_cli("eval --dataset /nonexistent/dataset.jsonl --out /tmp/surgvoice_none") != 0);
}

TEST_CASE("cli gen writes loadable files") {
  const fs::path dir = fs::temp_directory_path() / "surgvoice_cli_gen";
  fs::create_directories(dir);
  CHECK(run_cli("gen volume --dims 32 24 16 --out " + (dir / "v.vol").string()) == 0);
  const auto v = iv::Volume::load(dir / "v.vol");
  CHECK(v.dims == std::array<int, 3>{32, 24, 16});
  CHECK(v.at(0, 0, 15) == 15);

  CHECK(run_cli("gen structures --out " + (dir / "s.json").string()) == 0);
  CHECK(ar::StructureManifest::load(dir / "s.json").structures.size() == 7);

  CHECK(run_cli("gen dataset-skeleton --out " + (dir / "d.jsonl").string()) == 0);
  const auto skeleton = eval::load_dataset(dir / "d.jsonl");
  CHECK(skeleton.summary.counts == eval::reference_counts());
  fs::remove_all(dir);
}

TEST_CASE("cli run processes one clip per stdin line") {
  const fs::path dir = fs::temp_directory_path() / "surgvoice_cli_run";
  fs::create_directories(dir);
  const std::string cmd = "printf 'Show patient information\\n' | " + std::string(SURGVOICE_CLI) +
                          " run --backend mock --mock-script " + data_path("dataset_mock.jsonl").string() +
                          " > " + (dir / "out.jsonl").string() + " 2>/dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const auto line = read_file(dir / "out.jsonl");
  const auto j = nlohmann::json::parse(line.substr(0, line.find('\n')));
  CHECK(j["outcome"]["agent"] == "ir_agent");
  fs::remove_all(dir);
}

}  // namespace
}  // namespace surgvoice
