// Copyright 2026 The sicql Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "support/files.hpp"

using sicql::testing::TempDir;

namespace {

int run_cli(const std::string& args, const std::string& out_file) {
  std::string cmd = std::string(SICQL_CLI) + " " + args + " >" + out_file + " 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("cli exit codes and run output") {
  TempDir dir;
  std::string data = sicql::testing::data_path("ehr");
  std::string common = "-c " + data + "/config.json --run-dir " + dir.file("runs");
  std::string query = sicql::testing::data_path("ehr_sepsis.sicql");
  std::string log = dir.file("out.txt");

  CHECK(run_cli("run " + query + " -d " + data + " " + common + " --run-id a -o " + dir.file("a.jsonl"), log) == 0);
  auto summary = nlohmann::json::parse(sicql::testing::read_file(log));
  CHECK(summary["status"] == "completed");
  CHECK(run_cli("run " + query + " -d " + data + " " + common + " --run-id b -o " + dir.file("b.jsonl"), log) == 0);
  CHECK(sicql::testing::read_file(dir.file("a.jsonl")) == sicql::testing::read_file(dir.file("b.jsonl")));
  CHECK_FALSE(sicql::testing::read_file(dir.file("a.jsonl")).empty());

  CHECK(run_cli("explain " + query + " " + common, log) == 0);
  CHECK(sicql::testing::read_file(log).find("[deterministic]") != std::string::npos);

  sicql::testing::write_file(dir.file("t.jsonl"), "{\"a\": 1}\n");
  sicql::testing::write_file(dir.file("script.json"), R"({"rules": [{"pattern": "", "responses": ["bad"]}]})");
  sicql::testing::write_file(dir.file("abort.sicql"),
                             "FROM t |> EXTEND p'label {a}' AS y STRING |> ASSERT y EXCLUDES 'bad' RETRY 0 ABORT ON FAIL\n");
  std::string fake = "--script " + dir.file("script.json") + " --run-dir " + dir.file("runs") + " --current-date 2025-01-01";
  CHECK(run_cli("run " + dir.file("abort.sicql") + " -d " + dir.str() + " " + fake, log) == 2);

  sicql::testing::write_file(dir.file("bad.sicql"), "FROM t |> WHERE\n");
  CHECK(run_cli("run " + dir.file("bad.sicql") + " -d " + dir.str() + " " + fake, log) == 1);
  CHECK(sicql::testing::read_file(log).rfind("sicql: ", 0) == 0);

  std::string store = "--store " + dir.file("store.jsonl");
  CHECK(run_cli("store register \"x IN ('A')\" " + store, log) == 0);
  CHECK(run_cli("store register \"x IN ('B')\" --id x2 " + store, log) == 0);
  CHECK(run_cli("store conflicts " + store, log) == 0);
  CHECK(sicql::testing::read_file(log).find("disjoint-domain") != std::string::npos);
}
