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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "sicql/engine.hpp"
#include "sicql/error.hpp"
#include "sicql/pipeline.hpp"
#include "sicql/relation.hpp"
#include "support/files.hpp"

using namespace sicql;
using sicql::testing::TempDir;

namespace {

struct Harness {
  Config config;
  model::FakeModel model;
  Relation table;
  TempDir runs;
  PlannedQuery planned;
  int run_count = 0;

  Harness(const std::string& script, const std::string& rows)
      : model(model::parse_fake_script(script)), table(parse_jsonl(rows, "t")) {
    config.current_date = Date::parse("2025-01-01");
    config.decode_allowlist = {};
  }

  engine::RunOutcome run(const std::string& query, std::vector<obs::OpInvocationRecord>* ops = nullptr,
                         std::vector<obs::ConstraintInvocationRecord>* cis = nullptr) {
    lang::Catalog cat;
    cat.tables["t"] = relation_schema(table);
    planned = plan_query(query, config, model, &cat);
    engine::Engine eng(model, engine_config(config));
    std::string id = "run" + std::to_string(run_count++);
    obs::RunWriter writer(runs.str(), id);
    auto out = eng.execute(planned.physical, {{"t", table}}, &writer);
    writer.write_run(obs::RunRecord{id});
    writer.flush();
    obs::RunStore store(runs.str());
    if (ops) *ops = store.op_invocations(id);
    if (cis) *cis = store.constraint_invocations(id);
    for (const auto& s : out.stages) CHECK_MESSAGE(s.conserved(), s.op_id);
    return out;
  }
};

std::string responses(int bad, const std::string& good) {
  std::string r = "[";
  for (int i = 0; i < bad; ++i) r += "\"bad\", ";
  return r + "\"" + good + "\"]";
}

int64_t attempts_of(const std::vector<obs::OpInvocationRecord>& ops, const std::string& kind) {
  int64_t n = 0;
  for (const auto& o : ops) n += o.kind == kind && o.status != "skipped";
  return n;
}

}  // namespace

TEST_CASE("retry stops at the first passing attempt or the retry budget") {
  for (int k = 0; k <= 4; ++k) {
    for (int r = 0; r <= 3; ++r) {
      Harness h(R"({"rules": [{"pattern": "label", "responses": )" + responses(k, "good") + "}]}", "{\"x\": \"a\"}\n");
      std::vector<obs::OpInvocationRecord> ops;
      auto out = h.run("FROM t |> EXTEND p'label {x}' AS y STRING |> ASSERT REGEXP_CONTAINS(y, r'^good$') RETRY " +
                           std::to_string(r) + " CONTINUE ON FAIL",
                       &ops);
      CAPTURE(k);
      CAPTURE(r);
      CHECK(attempts_of(ops, "extend") == std::min(k, r) + 1);
      REQUIRE(out.output.tuples.size() == 1);
      const auto& t = out.output.tuples[0];
      CHECK(t.values.at("y") == Value(k <= r ? "good" : "bad"));
      CHECK(t.flags.empty() == (k <= r));
    }
  }
}

TEST_CASE("retries carry feedback in the prompt") {
  Harness h(R"({"rules": [{"pattern": "label", "responses": ["bad", "good"]}]})", "{\"x\": \"a\"}\n");
  std::vector<obs::OpInvocationRecord> ops;
  h.run("FROM t |> EXTEND p'label {x}' AS y STRING |> ASSERT REGEXP_CONTAINS(y, r'^good$') RETRY 1", &ops);
  std::erase_if(ops, [](const obs::OpInvocationRecord& o) { return o.kind != "extend"; });
  REQUIRE(ops.size() == 2);
  CHECK(ops[0].prompt.find("Previous output") == std::string::npos);
  CHECK(ops[1].prompt.find("Previous output: bad") != std::string::npos);
  CHECK(ops[1].prompt.find("Violated constraint:") != std::string::npos);
  CHECK(ops[1].final);
  CHECK(ops[1].disposition == "kept");
}

TEST_CASE("ignore drops the tuple and abort stops the run") {
  const std::string script = R"({"rules": [{"pattern": "label a", "responses": ["bad"]}, {"pattern": "label", "responses": ["good"]}]})";
  const std::string rows = "{\"x\": \"a\"}\n{\"x\": \"b\"}\n{\"x\": \"c\"}\n";
  {
    Harness h(script, rows);
    auto out = h.run("FROM t |> EXTEND p'label {x}' AS y STRING |> ASSERT y EXCLUDES 'bad' RETRY 0 IGNORE ON FAIL");
    CHECK(out.status == "completed");
    CHECK(out.output.tuples.size() == 2);
    int64_t ignored = 0;
    for (const auto& s : out.stages) ignored += s.ignored;
    CHECK(ignored == 1);
  }
  {
    Harness h(script, rows);
    auto out = h.run("FROM t |> EXTEND p'label {x}' AS y STRING |> ASSERT y EXCLUDES 'bad' RETRY 0 ABORT ON FAIL");
    CHECK(out.status == "aborted");
    CHECK_FALSE(out.error.empty());
    CHECK(out.output.tuples.empty());
    int64_t discarded = 0;
    for (const auto& s : out.stages) discarded += s.aborted_discarded;
    CHECK(discarded == 3);
  }
}

TEST_CASE("aggregates record lineage and drop groups with ignored members") {
  const std::string script =
      R"({"rules": [{"pattern": "copy", "responses": ["{note}"]}, {"pattern": "summarize", "responses": ["summary"]}]})";
  const std::string rows =
      "{\"k\": \"g1\", \"note\": \"fine\"}\n{\"k\": \"g1\", \"note\": \"bad\"}\n{\"k\": \"g2\", \"note\": \"ok\"}\n"
      "{\"k\": \"g3\", \"note\": \"ok\"}\n{\"k\": \"g3\", \"note\": \"also ok\"}\n";
  Harness h(script, rows);
  std::vector<obs::OpInvocationRecord> ops;
  auto out = h.run(
      "FROM t |> EXTEND p'copy {note}' AS n STRING |> ASSERT n EXCLUDES 'bad' RETRY 0 IGNORE ON FAIL "
      "|> AGGREGATE p'summarize {n}' AS s GROUP BY k",
      &ops);
  REQUIRE(out.output.tuples.size() == 2);
  CHECK(out.output.tuples[0].values.at("k") == Value("g2"));
  CHECK(out.output.tuples[0].parents.size() == 1);
  CHECK(out.output.tuples[1].values.at("k") == Value("g3"));
  CHECK(out.output.tuples[1].parents.size() == 2);
  const auto& agg = out.stages.back();
  CHECK(agg.in == 4);
  CHECK(agg.out == 2);
  CHECK(agg.ignored == 1);
  CHECK(agg.merged == 1);
  bool skipped = false;
  for (const auto& o : ops) skipped |= o.kind == "aggregate" && o.status == "skipped" && o.disposition == "ignored";
  CHECK(skipped);
}

TEST_CASE("scan only returns the table unchanged") {
  Harness h(R"({"rules": []})", "{\"a\": 1, \"b\": \"x\"}\n{\"a\": 2, \"b\": null}\n");
  auto out = h.run("FROM t");
  REQUIRE(out.output.tuples.size() == 2);
  for (size_t i = 0; i < 2; ++i) CHECK(out.output.tuples[i].values == h.table.tuples[i].values);
  CHECK(out.totals.op_invocations == 2);
  CHECK(out.totals.cost == 0.0);
}

TEST_CASE("unparseable typed output is retried") {
  Harness h(R"({"rules": [{"pattern": "count", "responses": ["abc", "3"]}]})", "{\"x\": \"a\"}\n");
  std::vector<obs::OpInvocationRecord> ops;
  auto out = h.run("FROM t |> EXTEND p'count {x}' AS n INT", &ops);
  REQUIRE(out.output.tuples.size() == 1);
  CHECK(out.output.tuples[0].values.at("n") == Value(int64_t{3}));
  CHECK(attempts_of(ops, "extend") == 2);
}

TEST_CASE("missing scan tables are reported") {
  Harness h(R"({"rules": []})", "{\"a\": 1}\n");
  lang::Catalog cat;
  cat.tables["t"] = relation_schema(h.table);
  auto planned = plan_query("FROM t", h.config, h.model, &cat);
  engine::Engine eng(h.model, engine_config(h.config));
  try {
    eng.execute(planned.physical, {});
    FAIL("expected kNotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }
}

TEST_CASE("parallel workers produce identical records") {
  std::string query = testing::read_file(testing::data_path("ehr_sepsis.sicql"));
  std::string data = testing::data_path("ehr");
  std::vector<std::string> outputs;
  for (int workers : {1, 4}) {
    TempDir runs;
    Config c = load_config(testing::data_path("ehr/config.json"));
    c.run_dir = runs.str();
    c.workers = workers;
    auto client = make_client(c);
    auto res = run_query(query, data, c, *client, nullptr, "r");
    REQUIRE(res.status == "completed");
    outputs.push_back(testing::read_file(res.run_dir + "/results.jsonl") +
                      testing::read_file(res.run_dir + "/op_invocations.jsonl") +
                      testing::read_file(res.run_dir + "/constraint_invocations.jsonl") +
                      testing::read_file(res.run_dir + "/lineage.jsonl"));
  }
  CHECK(outputs[0] == outputs[1]);
}

TEST_CASE("every constraint class fires once an assertion is added") {
  std::string query = testing::read_file(testing::data_path("ehr_sepsis.sicql"));
  query += "|> ASSERT age_yrs < patient_id + 200\n";
  TempDir runs;
  Config c = load_config(testing::data_path("ehr/config.json"));
  c.run_dir = runs.str();
  auto client = make_client(c);
  auto res = run_query(query, testing::data_path("ehr"), c, *client, nullptr, "r");
  REQUIRE(res.status == "completed");
  auto planned = plan_query(query, c, *client);
  std::map<std::string, lang::ConstraintClass> cls;
  for (const auto& s : planned.optimized.stages)
    if (s.kind == lang::StageKind::kAssert) cls[s.constraint.id] = s.constraint.cls;
  std::set<std::string> fired;
  for (const auto& r : obs::RunStore(runs.str()).constraint_invocations("r"))
    if (cls.count(r.constraint_id)) fired.insert(lang::class_name(cls.at(r.constraint_id)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kDomain)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kExclude)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kGrounded)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kSound)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kRelevant)));
  CHECK(fired.count(lang::class_name(lang::ConstraintClass::kAssertion)));
}

TEST_CASE("exemplar cache returns similar accepted outputs") {
  engine::ExemplarCache cache(2);
  cache.add("op", "summarize fever and cough", "A");
  cache.add("op", "extract lab results", "B");
  cache.add("other", "summarize fever", "C");
  CHECK(cache.size() == 2);
  auto near = cache.nearest("op", "summarize fever history", 2);
  REQUIRE(near.size() == 0);
  cache.add("op", "summarize fever and cough", "A");
  near = cache.nearest("op", "summarize fever history", 2);
  REQUIRE(near.size() == 1);
  CHECK(near[0].output == "A");
  CHECK(cache.nearest("op", "summarize fever and cough", 2).empty());
}

TEST_CASE("prompt rendering and feedback") {
  lang::PromptTemplate p;
  p.raw_text = "age {a} and {b}";
  CHECK(engine::render_prompt(p, {{"a", Value(int64_t{3})}, {"b", Value("x")}}) == "age 3 and x");
  std::string fb = engine::feedback_block("out", "c1", "why");
  CHECK(fb.find("Previous output: out\nViolated constraint: c1\nReason: why") != std::string::npos);
}
