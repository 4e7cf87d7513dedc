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

#include <algorithm>
#include <chrono>
#include <random>

#include "surgvoice/errors.h"
#include "surgvoice/moem_eval.h"
#include "test_support.h"

namespace surgvoice::eval {
namespace {

using testing::load_worked_example;

nlohmann::json tally() {
  return nlohmann::json::parse(testing::read_file(testing::fixture_path("worked_example_tally.json")));
}

int count_meeting(const std::vector<StageOutcomeRow>& rows, Condition c) {
  int k = 0;
  for (const auto& r : rows) k += meets(r, c) ? 1 : 0;
  return k;
}

TEST_CASE("the worked example scores to the hand tally") {
  const auto start = std::chrono::steady_clock::now();
  const auto t = load_worked_example();
  const auto oracle = tally();
  REQUIRE(t.rows.size() == oracle["n"].get<std::size_t>());
  CHECK(count_meeting(t.rows, Condition::kStrict) == oracle["strict"].get<int>());
  CHECK(count_meeting(t.rows, Condition::kSinglePass) == oracle["single_pass"].get<int>());
  CHECK(count_meeting(t.rows, Condition::kMultiPass) == oracle["multi_pass"].get<int>());
  CHECK(success_rate(t.rows, Condition::kStrict) == doctest::Approx(25.0 / 35));
  CHECK(success_rate(t.rows, Condition::kMultiPass) == doctest::Approx(32.0 / 35));
  for (Stage s : kAllStages) {
    const double ones = oracle["stage_ones"][std::string(to_string(s))].get<int>();
    CHECK(stage_accuracy(t.rows, s) == doctest::Approx(ones / 35));
  }

  std::vector<StageOutcomeRow> ir;
  for (const auto& r : t.rows) {
    if (r.agent == AgentId::kIr) ir.push_back(r);
  }
  CHECK(ir.size() == oracle["ir_stt"][1].get<std::size_t>());
  CHECK(stage_accuracy(ir, Stage::kStt) == doctest::Approx(6.0 / 7));

  const auto structure = category_sr(t.rows, t.dataset, "structure");
  for (const auto& [cat, kn] : oracle["structure_multi_pass"].items()) {
    CHECK(structure.at(cat) == Rate{kn[0].get<int>(), kn[1].get<int>()});
  }
  CHECK(structure.at("composite").value() == 1.0);
  const auto type = category_sr(t.rows, t.dataset, "type");
  for (const auto& [cat, kn] : oracle["type_multi_pass"].items()) {
    CHECK(type.at(cat) == Rate{kn[0].get<int>(), kn[1].get<int>()});
  }
  const auto expr = category_sr(t.rows, t.dataset, "expression");
  for (const auto& [cat, kn] : oracle["expression_multi_pass"].items()) {
    CHECK(expr.at(cat) == Rate{kn[0].get<int>(), kn[1].get<int>()});
  }
  const auto cross = cross_category_sr(t.rows, t.dataset, {"structure", "type"});
  CHECK(cross.at({"single", "explicit"}) ==
        Rate{oracle["single_explicit_multi_pass"][0].get<int>(),
             oracle["single_explicit_multi_pass"][1].get<int>()});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
}

TEST_CASE("success conditions are nested for random outcome tables") {
  std::mt19937 rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rows = testing::random_table(rng);
    const double strict = success_rate(rows, Condition::kStrict);
    const double single = success_rate(rows, Condition::kSinglePass);
    const double multi = success_rate(rows, Condition::kMultiPass);
    CHECK(strict <= single);
    CHECK(single <= multi);
  }
}

TEST_CASE("success conditions on single rows") {
  StageOutcomeRow r{"x", AgentId::kIv, 0, 1, 1, 1, 1, 1, 1, 0};
  CHECK_FALSE(meets(r, Condition::kStrict));
  CHECK(meets(r, Condition::kSinglePass));
  r.ic = 3;
  CHECK(meets(r, Condition::kMultiPass));
  CHECK_FALSE(meets(r, Condition::kMultiPass, 2));
  r.ic = 4;
  CHECK_FALSE(meets(r, Condition::kMultiPass));
  CHECK_THROWS_AS(success_rate({}, Condition::kStrict), std::invalid_argument);
  CHECK_THROWS_AS(stage_accuracy({}, Stage::kOf), std::invalid_argument);
}

TEST_CASE("Wilson intervals match the reference values") {
  // Reference values from scipy.stats.binomtest(k, n).proportion_ci(method="wilson").
  struct Case {
    int k, n;
    double lo, hi;
  };
  for (const Case& c : {Case{32, 35, 0.776210, 0.970420}, Case{0, 10, 0.0, 0.277530},
                        Case{10, 10, 0.722470, 1.0}, Case{25, 35, 0.549450, 0.836730},
                        Case{6, 7, 0.486870, 0.974320}}) {
    const auto [lo, hi] = wilson_ci(c.k, c.n, 0.95);
    CHECK(lo == doctest::Approx(c.lo).epsilon(1e-4));
    CHECK(hi == doctest::Approx(c.hi).epsilon(1e-4));
  }
  CHECK_THROWS(wilson_ci(1, 0));
  CHECK_THROWS(wilson_ci(5, 4));
}

TEST_CASE("scoring compares normalized text, agent, action, and params") {
  CommandRecord rec;
  rec.id = "iv-001";
  rec.agent_gold = AgentId::kIv;
  rec.gold_revised = "Coronal plus 100";
  rec.gold_action = "ZOOM_IN_MOVE";
  rec.gold_params = nlohmann::json::parse(R"({"moves": {"coronal": {"delta": 100}}})");
  CommandRun run;
  run.transcript = "coronal plus 100.";
  run.revised = "Coronal plus 100";
  run.agent = AgentId::kIv;
  run.action = "ZOOM_IN_MOVE";
  run.params = rec.gold_params;
  run.flow_ok = true;
  CHECK(score_command(run, rec) == StageOutcomeRow{"iv-001", AgentId::kIv, 1, 1, 1, 1, 1, 1, 1, 0});
  run.params["moves"]["coronal"]["delta"] = 90;
  const auto wrong = score_command(run, rec);
  CHECK(wrong.af == 1);
  CHECK(wrong.ap == 0);
  CHECK(wrong.ad == 0);
  run.agent = AgentId::kAr;
  CHECK(score_command(run, rec).af == 0);
  CHECK(normalize_text("  Zoom-In,   RUL! ") == "zoomin rul");
}

TEST_CASE("reports round-trip and pass the schema check") {
  const auto t = load_worked_example();
  const MetricReport r = build_report(t.rows, t.dataset);
  CHECK(r.n == 35);
  CHECK(r.success.at("multi_pass").rate == Rate{32, 35});
  CHECK(r.by_category.at("structure").at("composite").rate == Rate{5, 5});
  CHECK(r.cross_category.at("structure x type").at("single|explicit").rate == Rate{11, 11});
  CHECK(r.by_agent.at("ir").at("stt").rate == Rate{6, 7});
  CHECK(r.path_flows.at("stt>cc").at("0>1") == 7);
  const auto j = to_json(r);
  CHECK(report_schema_errors(j).empty());
  CHECK(report_from_json(j) == r);

  auto broken = j;
  broken["success"].erase("strict");
  broken["stage_accuracy"]["stt"]["rate"] = 0.5;
  const auto errors = report_schema_errors(broken);
  auto mentions = [&](const std::string& what) {
    return std::any_of(errors.begin(), errors.end(),
                       [&](const std::string& e) { return e.find(what) != std::string::npos; });
  };
  CHECK(mentions("success lacks 'strict'"));
  CHECK(mentions("stage_accuracy.stt: rate does not match counts"));
  for (const auto& e : errors) {
    CHECK((e.find("strict") != std::string::npos || e.find("stt") != std::string::npos));
  }
}

TEST_CASE("CSV outputs") {
  const auto t = load_worked_example();
  const auto csv = to_csv(build_report(t.rows, t.dataset));
  CHECK(csv.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("success,multi_pass,32,35,") != std::string::npos);
  const auto rows = rows_to_csv(t.rows, t.dataset);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 36);
  CHECK(rows.find("we-01,ir,single,explicit,baseline,1,1,1,1,1,1,1,0") != std::string::npos);
}

TEST_CASE("the bundled dataset has the reference category counts") {
  const Dataset ds = load_dataset(testing::data_path("dataset.jsonl"));
  CHECK(ds.records.size() == 240);
  CHECK(ds.summary.counts == reference_counts());
}

TEST_CASE("the dataset skeleton has the reference counts and valid records") {
  const auto skeleton = dataset_skeleton();
  CHECK(summarize(skeleton).counts == reference_counts());
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    CHECK_NOTHROW(record_from_json(to_json(skeleton[i]), i + 1));
  }
}

TEST_CASE("loader rejects malformed records with the row number") {
  const auto path = std::filesystem::temp_directory_path() / "surgvoice_bad_dataset.jsonl";
  auto write = [&](const std::string& body) {
    std::ofstream(path) << body;
  };
  const std::string good =
      R"({"id": "a", "agent": "ir", "raw_text": "Show BMI", "gold_revised": "Show BMI", )"
      R"("structure": "single", "type": "explicit", "expression": "baseline", )"
      R"("gold_action": "SHOW", "gold_params": {"fields": []}})";
  write(good + "\n");
  CHECK(load_dataset(path).records.size() == 1);

  std::string bad = good;
  bad.replace(bad.find("\"single\""), 8, "\"double\"");
  write(good + "\n" + bad + "\n");
  try {
    load_dataset(path);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.row() == 2);
  }
  write(good + "\n" + good + "\n");
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
  write("{not json}\n");
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
}

TEST_CASE("outcome rows validate their fields") {
  auto j = nlohmann::json::parse(
      R"({"id": "x", "agent": "ar", "stt": 1, "cc": 1, "cr": 1, "af": 1, "ap": 0, "ad": 1, "of": 1, "ic": 0})");
  CHECK_THROWS_AS(row_from_json(j), SchemaError);
  j["ad"] = 0;
  CHECK(row_from_json(j).ap == 0);
  j["stt"] = 2;
  CHECK_THROWS_AS(row_from_json(j), SchemaError);
}

}  // namespace
}  // namespace surgvoice::eval
