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
#include <random>

#include "surgvoice/agent_ir.h"
#include "surgvoice/errors.h"

namespace surgvoice::ir {
namespace {

Decision show_all(const ColumnManifest& m, double p = 1.0) {
  Decision d;
  d.field_probs.assign(m.size(), p);
  return d;
}

TEST_CASE("fields render with labels, units, and composite formats") {
  const auto m = ColumnManifest::defaults();
  const auto rec = sample_record();
  CHECK(format_field(m.columns[*m.index_of("sex_age")], rec) == "Sex/Age: M/63");
  CHECK(format_field(m.columns[*m.index_of("height")], rec) == "Height: 172 cm");
  CHECK(format_field(m.columns[*m.index_of("weight")], rec) == "Weight: 68.5 kg");
  CHECK(format_field(m.columns[*m.index_of("fev1")], rec) == "FEV1: 2.1 L (78%)");
  CHECK(format_field(m.columns[*m.index_of("comorbidities")], rec) ==
        "Comorbidities: hypertension, type 2 diabetes");
}

TEST_CASE("missing record values render as a dash") {
  const auto m = ColumnManifest::defaults();
  auto rec = sample_record();
  rec.erase("weight");
  rec.erase("fvc_pct");
  CHECK(format_field(m.columns[*m.index_of("weight")], rec) == "Weight: —");
  CHECK(format_field(m.columns[*m.index_of("fvc")], rec) == "FVC: —");
}

TEST_CASE("random field subsets compose to popcount lines") {
  const auto m = ColumnManifest::defaults();
  const auto rec = sample_record();
  std::mt19937 rng(7);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<bool> y(m.size());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = coin(rng);
    const auto cols = select_columns(y, m);
    const auto text = compose_info_string(cols, rec);
    const auto k = static_cast<long>(std::count(y.begin(), y.end(), true));
    if (k == 0) {
      CHECK(text.empty());
    } else {
      CHECK(std::count(text.begin(), text.end(), '\n') == k - 1);
      CHECK(text.back() != '\n');
    }
  }
}

TEST_CASE("HIDE is idempotent and yields the zero vector with no text") {
  const auto m = ColumnManifest::defaults();
  const auto rec = sample_record();
  const IrState shown = apply(empty_state(m), show_all(m), m, rec).state;
  REQUIRE_FALSE(shown.text.empty());

  Decision hide = show_all(m);
  hide.action = Action::kHide;
  const Applied once = apply(shown, hide, m, rec);
  const Applied twice = apply(once.state, hide, m, rec);
  CHECK(once.state.fields == std::vector<bool>(m.size(), false));
  CHECK(once.state.text.empty());
  CHECK(twice.state == once.state);
  CHECK(once.directive.kind == DirectiveKind::kClearOverlay);
  CHECK(twice.directive == once.directive);
}

TEST_CASE("raising the threshold never selects more fields") {
  const auto m = ColumnManifest::defaults();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Decision d;
    for (std::size_t j = 0; j < m.size(); ++j) d.field_probs.push_back(u(rng));
    double t1 = 0.01 + 0.98 * u(rng);
    double t2 = 0.01 + 0.98 * u(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto lo = threshold_fields(d, t1);
    const auto hi = threshold_fields(d, t2);
    for (std::size_t j = 0; j < m.size(); ++j) CHECK((!hi[j] || lo[j]));
  }
  CHECK_THROWS_AS(threshold_fields(Decision{}, 1.0), std::invalid_argument);
}

TEST_CASE("decisions parse from probabilities, ids, and aliases") {
  const auto m = ColumnManifest::defaults();
  const auto d = parse_decision(
      R"({"action_probs": {"SHOW": 0.9, "HIDE": 0.1}, "field_probs": {"height": 0.8, "fev1": 0.2}})",
      m);
  CHECK(d.action == Action::kShow);
  CHECK(d.field_probs[*m.index_of("height")] == doctest::Approx(0.8));
  CHECK(canonical_params(d, m) == nlohmann::json::parse(R"({"fields": ["height"]})"));

  const auto pft = parse_decision(R"({"action": "SHOW", "fields": ["PFT"]})", m);
  CHECK(canonical_params(pft, m) == nlohmann::json::parse(R"({"fields": ["fev1", "fvc"]})"));

  const auto info = parse_decision(R"({"action": "SHOW", "fields": ["patient information"]})", m);
  CHECK(canonical_params(info, m)["fields"].size() == 9);

  const auto reset = parse_decision(R"({"action": "SHOW", "fields": ["age"], "reset": true})", m);
  CHECK(reset.action == Action::kHide);

  CHECK_THROWS_AS(parse_decision("not json", m), ParseError);
}

TEST_CASE("showing the patient information places nine lines at the top right") {
  const auto m = ColumnManifest::defaults();
  const auto d = parse_decision(R"({"action": "SHOW", "fields": ["patient information"]})", m);
  const Applied a = apply(empty_state(m), d, m, sample_record());
  CHECK(a.directive.kind == DirectiveKind::kTextOverlay);
  CHECK(a.directive.anchor == Anchor::kTopRight);
  CHECK(std::count(a.state.text.begin(), a.state.text.end(), '\n') == 8);
  CHECK(a.state.text.rfind("Sex/Age: M/63\n", 0) == 0);
}

TEST_CASE("manifest JSON round-trips and the prompt lists every field") {
  const auto m = ColumnManifest::defaults();
  const auto again = ColumnManifest::from_json(m.to_json());
  CHECK(again.to_json() == m.to_json());
  const auto prompt = build_prompt("Show BMI", m);
  for (const auto& c : m.columns) CHECK(prompt.find(c.id) != std::string::npos);
  CHECK(prompt.find("Revised command: \"Show BMI\"") != std::string::npos);
}

}  // namespace
}  // namespace surgvoice::ir
