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

#ifndef SURGVOICE_TESTS_TEST_SUPPORT_H_
#define SURGVOICE_TESTS_TEST_SUPPORT_H_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgvoice/moem_eval.h"

namespace surgvoice::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(SURGVOICE_DATA_DIR) / name;
}

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(SURGVOICE_FIXTURE_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Per-command outcome rows of the published worked example, with a dataset
// carrying their categories so category breakdowns can be computed.
struct OutcomeTable {
  std::vector<eval::StageOutcomeRow> rows;
  eval::Dataset dataset;
  std::vector<std::string> commands;
};

inline OutcomeTable load_outcome_table(const std::filesystem::path& path) {
  OutcomeTable t;
  std::ifstream in(path);
  std::string line;
  std::vector<eval::CommandRecord> records;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    char id[16];
    std::snprintf(id, sizeof id, "we-%02d", ++n);
    j["id"] = id;
    eval::StageOutcomeRow row = eval::row_from_json(j);

    eval::CommandRecord r;
    r.id = id;
    r.agent_gold = row.agent;
    r.raw_text = j["command"].get<std::string>();
    r.gold_revised = *r.raw_text;
    r.structure = j["structure"].get<std::string>();
    r.ctype = j["type"].get<std::string>();
    r.expression = j["expression"].get<std::string>();
    t.rows.push_back(row);
    t.commands.push_back(*r.raw_text);
    records.push_back(std::move(r));
  }
  t.dataset = eval::make_dataset(std::move(records));
  return t;
}

inline OutcomeTable load_worked_example() {
  return load_outcome_table(fixture_path("worked_example_rows.jsonl"));
}

// A synthetic row with internally consistent outcomes (ad = af and ap).
inline eval::StageOutcomeRow random_row(std::mt19937& rng, int index) {
  std::bernoulli_distribution coin(0.8);
  std::uniform_int_distribution<int> ic(0, 5);
  eval::StageOutcomeRow r;
  r.id = "r" + std::to_string(index);
  r.agent = kAllAgents[static_cast<std::size_t>(index) % kAllAgents.size()];
  r.stt = coin(rng);
  r.cc = coin(rng);
  r.cr = coin(rng);
  r.af = coin(rng);
  r.ap = coin(rng);
  r.ad = r.af & r.ap;
  r.of = coin(rng);
  r.ic = coin(rng) ? 0 : ic(rng);
  return r;
}

inline std::vector<eval::StageOutcomeRow> random_table(std::mt19937& rng) {
  std::uniform_int_distribution<int> size(1, 60);
  std::vector<eval::StageOutcomeRow> rows;
  const int n = size(rng);
  for (int i = 0; i < n; ++i) rows.push_back(random_row(rng, i));
  return rows;
}

}  // namespace surgvoice::testing

#endif  // SURGVOICE_TESTS_TEST_SUPPORT_H_
