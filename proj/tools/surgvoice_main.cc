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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "surgvoice/errors.h"
#include "surgvoice/service.h"
#include "surgvoice/session_engine.h"

namespace fs = std::filesystem;
using namespace surgvoice;

namespace {

struct ResourceOptions {
  std::string manifest;
  std::string record;
  std::string structures;
  std::string volume;
  std::string rules;
  int fps = OverlayTimeline::kDefaultFps;
  int ic_max = 3;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "IR column manifest (JSON)");
    cmd->add_option("--record", record, "patient record (JSON)");
    cmd->add_option("--structures", structures, "AR structure manifest (JSON)");
    cmd->add_option("--volume", volume, "CT volume file");
    cmd->add_option("--correction-rules", rules, "correction rules (JSON map)");
    cmd->add_option("--fps", fps, "overlay timeline frame rate")->check(CLI::PositiveNumber);
    cmd->add_option("--ic-max", ic_max, "invalid loops allowed per clip")
        ->check(CLI::NonNegativeNumber);
  }

  Resources build() const {
    Resources r;
    if (!manifest.empty()) {
      r.columns = ir::ColumnManifest::load(manifest);
      r.vocabulary = CommandVocabulary::defaults(r.columns);
    }
    if (!record.empty()) r.record = ir::load_record(record);
    if (!structures.empty()) r.structures = ar::StructureManifest::load(structures);
    if (!volume.empty()) r.set_volume(iv::Volume::load(volume));
    if (!rules.empty()) r.rules = CorrectionRules::load(rules);
    r.fps = fps;
    r.ic_max = ic_max;
    return r;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::unique_ptr<LlmBackend> make_backend(const std::string& kind, const std::string& mock_script,
                                         const eval::Dataset* dataset) {
  if (kind == "live") return std::make_unique<HttpBackend>(HttpBackend::from_env());
  if (!mock_script.empty()) return std::make_unique<MockBackend>(MockScript::load_jsonl(mock_script));
  if (dataset) return std::make_unique<MockBackend>(gold_mock_script(*dataset));
  throw std::runtime_error("mock backend needs --mock-script");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surgvoice: voice command orchestration for surgical video overlays"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log debug output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "run a command dataset and write metric reports");
  std::string dataset_path = std::string(SURGVOICE_DATA_DIR) + "/dataset.jsonl";
  std::string backend_kind = "mock";
  std::string mock_script;
  std::string out_dir = "eval_out";
  double level = 0.95;
  ResourceOptions eval_res;
  eval_cmd->add_option("--dataset", dataset_path, "dataset (JSON lines)");
  eval_cmd->add_option("--backend", backend_kind, "mock or live")
      ->check(CLI::IsMember({"mock", "live"}));
  eval_cmd->add_option("--mock-script", mock_script,
                       "mock script; defaults to one generated from the dataset gold labels");
  eval_cmd->add_option("--out", out_dir, "output directory");
  eval_cmd->add_option("--level", level, "confidence level")->check(CLI::Range(0.5, 0.999));
  eval_res.add_to(eval_cmd);

  // run: interactive session over stdin, one line per clip
  auto* run_cmd = app.add_subcommand("run", "process transcripts from stdin, one line per clip");
  std::string run_backend = "live";
  std::string run_mock;
  ResourceOptions run_res;
  run_cmd->add_option("--backend", run_backend, "mock or live")
      ->check(CLI::IsMember({"mock", "live"}));
  run_cmd->add_option("--mock-script", run_mock, "mock script for --backend mock");
  run_res.add_to(run_cmd);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "start the HTTP session service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port")->check(CLI::Range(1, 65535));

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "write bundled defaults and synthetic data");
  gen_cmd->require_subcommand(1);
  std::string gen_out;
  auto* gen_volume = gen_cmd->add_subcommand("volume", "synthetic gradient CT volume");
  std::vector<int> dims{64, 64, 64};
  int gradient_axis = 2;
  gen_volume->add_option("--dims", dims, "nx ny nz")->expected(3);
  gen_volume->add_option("--axis", gradient_axis, "grid axis of the ramp")->check(CLI::Range(0, 2));
  auto* gen_manifest = gen_cmd->add_subcommand("manifest", "default IR column manifest");
  auto* gen_record = gen_cmd->add_subcommand("record", "sample patient record");
  auto* gen_structures = gen_cmd->add_subcommand("structures", "default AR structure manifest");
  auto* gen_rules = gen_cmd->add_subcommand("rules", "default correction rules");
  auto* gen_mock = gen_cmd->add_subcommand("mock-script", "gold mock script for a dataset");
  auto* gen_skeleton =
      gen_cmd->add_subcommand("dataset-skeleton", "unannotated records with the reference counts");
  std::string gen_dataset = dataset_path;
  gen_mock->add_option("--dataset", gen_dataset, "dataset (JSON lines)");
  for (auto* sub : {gen_volume, gen_manifest, gen_record, gen_structures, gen_rules, gen_mock,
                    gen_skeleton}) {
    sub->add_option("--out", gen_out, "output file")->required();
  }

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*eval_cmd) {
      const auto start = std::chrono::steady_clock::now();
      const eval::Dataset dataset = eval::load_dataset(dataset_path);
      const Resources resources = eval_res.build();
      auto backend = make_backend(backend_kind, mock_script, &dataset);
      const EvalRun run = run_dataset(dataset, *backend, resources);
      const eval::MetricReport report =
          eval::build_report(run.rows, dataset, level, resources.ic_max);

      const fs::path out(out_dir);
      write_file(out / "report.json", eval::to_json(report).dump(2) + "\n");
      write_file(out / "report.csv", eval::to_csv(report));
      write_file(out / "rows.csv", eval::rows_to_csv(run.rows, dataset));
      std::string traces;
      for (const auto& t : run.traces) traces += trace_to_jsonl(t);
      write_file(out / "traces.jsonl", traces);

      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << "commands: " << report.n << " (" << secs << " s)\n";
      for (const auto& [k, v] : report.stage_accuracy) {
        std::cout << "  " << k << ": " << v.rate.value() << " [" << v.lo << ", " << v.hi << "]\n";
      }
      for (const auto& [k, v] : report.success) {
        std::cout << "  sr_" << k << ": " << v.rate.successes << "/" << v.rate.n << " = "
                  << v.rate.value() << " [" << v.lo << ", " << v.hi << "]\n";
      }
      std::cout << "reports written to " << out.string() << "\n";
      return 0;
    }

    if (*run_cmd) {
      const Resources resources = run_res.build();
      auto backend = make_backend(run_backend, run_mock, nullptr);
      Session session(resources);
      StreamSource source(std::cin);
      while (true) {
        try {
          const CommandResult r = session.process(source, *backend);
          std::cout << to_json(r).dump() << std::endl;
        } catch (const SourceExhausted&) {
          break;
        }
        if (std::cin.eof()) break;
      }
      return 0;
    }

    if (*serve_cmd) {
      SessionManager manager;
      httplib::Server server;
      register_routes(server, manager);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }

    if (*gen_volume) {
      iv::Volume::gradient({dims[0], dims[1], dims[2]}, gradient_axis).save(gen_out);
    } else if (*gen_manifest) {
      write_file(gen_out, ir::ColumnManifest::defaults().to_json().dump(2) + "\n");
    } else if (*gen_record) {
      write_file(gen_out, ir::sample_record().dump(2) + "\n");
    } else if (*gen_structures) {
      write_file(gen_out, ar::StructureManifest::defaults().to_json().dump(2) + "\n");
    } else if (*gen_rules) {
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (const auto& [from, to] : CorrectionRules::defaults().rules) j[from] = to;
      write_file(gen_out, j.dump(2) + "\n");
    } else if (*gen_skeleton) {
      std::string lines;
      for (const auto& r : eval::dataset_skeleton()) lines += eval::to_json(r).dump() + "\n";
      write_file(gen_out, lines);
    } else if (*gen_mock) {
      write_file(gen_out, gold_mock_script(eval::load_dataset(gen_dataset)).to_jsonl());
    }
    return 0;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
