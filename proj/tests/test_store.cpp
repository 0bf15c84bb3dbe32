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

#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "sicql/embedding.hpp"
#include "sicql/error.hpp"
#include "sicql/model.hpp"
#include "sicql/parser.hpp"
#include "sicql/pipeline.hpp"
#include "sicql/store.hpp"
#include "support/files.hpp"
#include "support/generators.hpp"

using namespace sicql;
using namespace sicql::store;
using sicql::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

lang::ConstraintDecl decl(const std::string& id, const std::string& text) {
  auto d = parse_single_constraint(text);
  d.id = id;
  return d;
}

bool has(const std::vector<Conflict>& cs, const std::string& a, const std::string& b, ConflictKind k) {
  return std::any_of(cs.begin(), cs.end(), [&](const Conflict& c) {
    return c.kind == k && ((c.first == a && c.second == b) || (c.first == b && c.second == a)) && !c.explanation.empty();
  });
}

}  // namespace

TEST_CASE("embeddings are bag-of-words") {
  CHECK(embed("patient EHR summary") == embed("patient EHR summary"));
  CHECK(cosine(embed("patient EHR summary"), embed("EHR patient summary")) == doctest::Approx(1.0));
  CHECK(cosine(embed("alpha"), embed("beta")) == doctest::Approx(0.0));
  CHECK(cosine(embed(""), embed("x")) == 0.0);
  CHECK(word_tokens("Dr. Kim's EHR-2") == std::vector<std::string>{"dr", "kim", "s", "ehr", "2"});
  double norm = 0;
  for (double v : embed("a b b c")) norm += v * v;
  CHECK(norm == doctest::Approx(1.0));
}

TEST_CASE("register and lookup") {
  TempDir dir;
  std::string path = dir.file("store.jsonl");
  {
    ConstraintStore s(path);
    Metadata m;
    m.description = "exclude patient PII such as names and record numbers from EHR summaries";
    m.tags = {"ehr", "pii"};
    m.provenance = "q1";
    std::string id = s.register_constraint("summary EXCLUDES ('SSN', 'MRN')", m);
    CHECK(id == "summary:exclude");
    CHECK(code_of([&] { s.register_constraint("summary EXCLUDES 'x'"); }) == ErrorCode::kConflict);
    CHECK(code_of([&] { s.register_constraint("a GROUNDED AND b GROUNDED"); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([&] { s.register_constraint("a EXCLUDES"); }) == ErrorCode::kParse);
    CHECK(code_of([&] { s.lookup("nope"); }) == ErrorCode::kNotFound);
    s.accept(id);
  }
  ConstraintStore reloaded(path);
  REQUIRE(reloaded.size() == 1);
  auto c = reloaded.lookup("summary:exclude");
  CHECK(c.decl.cls == lang::ConstraintClass::kExclude);
  CHECK(c.tags == std::vector<std::string>{"ehr", "pii"});
  CHECK(c.provenance == "q1");
  CHECK(c.usage_count == 1);
  CHECK(lang::equal(c.decl, parse_single_constraint(c.text)));
}

TEST_CASE("recommendations rank by similarity") {
  ConstraintStore s;
  CHECK(code_of([&] { s.recommend("x", 3); }) == ErrorCode::kNotFound);
  Metadata pii;
  pii.id = "pii";
  pii.description = "exclude PII from the patient summary of an EHR";
  s.register_constraint("summary EXCLUDES p'personally identifying information'", pii);
  Metadata url;
  url.id = "url";
  url.description = "links must point to the company web domain";
  s.register_constraint("link INCLUDES r'https://example\\.com/'", url);

  auto recs = s.recommend("write a patient summary from the notes", 2);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].constraint.id == "pii");
  CHECK(recs[0].score > recs[1].score);
  CHECK(s.recommend("anything", 0).empty());
  auto self = s.recommend(url.description, 2);
  CHECK(self[0].constraint.id == "url");
  CHECK(self[0].score == doctest::Approx(1.0));
  auto again = s.recommend("write a patient summary from the notes", 2);
  CHECK(again[0].constraint.id == recs[0].constraint.id);
  CHECK(again[1].score == recs[1].score);
}

TEST_CASE("judge reranking puts relevant items first") {
  ConstraintStore s;
  for (const char* id : {"a", "b"}) {
    Metadata m;
    m.id = id;
    m.description = std::string("summary rule ") + (id[0] == 'a' ? "alpha alpha" : "beta");
    s.register_constraint(std::string("x") + id + " GROUNDED", m);
  }
  model::FakeModel judge(model::parse_fake_script(
      R"({"rules": [], "judges": [{"name": "judge", "rules": [{"mode": "relevance", "pattern": "alpha", "verdict": false}]}]})"));
  auto plain = s.recommend("summary rule alpha", 2);
  CHECK(plain[0].constraint.id == "a");
  auto reranked = s.recommend("summary rule alpha", 2, &judge);
  REQUIRE(reranked.size() == 2);
  CHECK(reranked[0].constraint.id == "b");
  CHECK(reranked[0].judge_relevant == std::optional<bool>(true));
  CHECK(reranked[1].judge_relevant == std::optional<bool>(false));
}

TEST_CASE("conflict fixtures") {
  std::vector<lang::ConstraintDecl> ds = {
      decl("sets1", "status IN ('A', 'B')"),         decl("sets2", "status IN ('C')"),
      decl("sets3", "status IN ('B', 'D')"),         decl("re1", "REGEXP_CONTAINS(code, r'^a+$')"),
      decl("re2", "REGEXP_CONTAINS(code, r'^b+$')"), decl("re3", "REGEXP_CONTAINS(code, r'a')"),
      decl("inc", "note INCLUDES 'dose'"),           decl("exc", "note EXCLUDES 'dose'"),
      decl("exc2", "note EXCLUDES 'other'"),         decl("other", "status2 IN ('C')"),
  };
  auto cs = detect_conflicts(ds);
  CHECK(has(cs, "sets1", "sets2", ConflictKind::kDisjointDomain));
  CHECK(has(cs, "sets3", "sets2", ConflictKind::kDisjointDomain));
  CHECK_FALSE(has(cs, "sets1", "sets3", ConflictKind::kDisjointDomain));
  CHECK(has(cs, "re1", "re2", ConflictKind::kEmptyRegexIntersection));
  CHECK_FALSE(has(cs, "re1", "re3", ConflictKind::kEmptyRegexIntersection));
  CHECK(has(cs, "inc", "exc", ConflictKind::kIncludeExcludeContradiction));
  CHECK_FALSE(has(cs, "inc", "exc2", ConflictKind::kIncludeExcludeContradiction));
  CHECK_FALSE(has(cs, "other", "sets2", ConflictKind::kDisjointDomain));
  CHECK(has(cs, "re2", "re3", ConflictKind::kEmptyRegexIntersection));
  CHECK(cs.size() == 5);
}

TEST_CASE("include literal containing an excluded literal contradicts") {
  auto cs = detect_conflicts({decl("i", "n INCLUDES 'daily dose'"), decl("e", "n EXCLUDES 'dose'")});
  CHECK(has(cs, "i", "e", ConflictKind::kIncludeExcludeContradiction));
  cs = detect_conflicts({decl("i", "n INCLUDES ('dose', 'amount')"), decl("e", "n EXCLUDES 'dose'")});
  CHECK(cs.empty());
}

TEST_CASE("conflict detection is symmetric and self-consistent") {
  testing::Rng rng(5);
  const std::vector<std::string> pool = {
      "v IN ('A', 'B')", "v IN ('C')",          "v IN ('B')",       "REGEXP_CONTAINS(v, r'^a+$')",
      "REGEXP_CONTAINS(v, r'^b')", "v INCLUDES 'x'", "v EXCLUDES 'x'", "v EXCLUDES r'[0-9]'",
      "v INCLUDES r'^[0-9]+$'", "v INCLUDES ('ab', 'b')"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string a = rng.pick(pool), b = rng.pick(pool);
    auto ab = detect_conflicts({decl("a", a), decl("b", b)});
    auto ba = detect_conflicts({decl("b", b), decl("a", a)});
    CAPTURE(a);
    CAPTURE(b);
    REQUIRE(ab.size() == ba.size());
    for (const auto& c : ab) CHECK(has(ba, "a", "b", c.kind));
  }
  for (const auto& t : pool) {
    auto self = detect_conflicts({decl("a", t), decl("b", t)});
    CAPTURE(t);
    for (const auto& c : self) CHECK(c.kind == ConflictKind::kIncludeExcludeContradiction);
  }
}

TEST_CASE("prompt pairs go to the judge") {
  model::FakeModel judge(model::parse_fake_script(
      R"({"rules": [], "judges": [{"name": "judge", "rules": [{"mode": "semantic-match", "field": "output", "pattern": "diagnosis", "verdict": true}], "default_verdict": false}]})"));
  std::vector<lang::ConstraintDecl> ds = {decl("i", "s INCLUDES p'diagnosis dates'"), decl("e", "s EXCLUDES p'PII'")};
  CHECK(detect_conflicts(ds).empty());
  auto cs = detect_conflicts(ds, &judge);
  CHECK(has(cs, "i", "e", ConflictKind::kFlaggedByJudge));
}

TEST_CASE("store conflicts surface in query planning") {
  auto st = std::make_shared<ConstraintStore>();
  st->register_constraint("y IN ('x')");
  Config c;
  c.current_date = Date::parse("2025-01-01");
  model::FakeModel m(model::parse_fake_script(R"({"rules": [{"pattern": "", "responses": ["x"]}]})"));
  auto q = plan_query("FROM t |> EXTEND p'label {a}' AS y STRING |> ASSERT y IN ('z')", c, m, nullptr, st.get());
  REQUIRE_FALSE(q.warnings.empty());
  CHECK(q.warnings[0].find("disjoint-domain") != std::string::npos);
  std::string text = explain_query("FROM t |> EXTEND p'label {a}' AS y STRING |> ASSERT y IN ('z')",
                                   ExplainLevel::kPhysical, c, m, st.get());
  CHECK(text.find("WARNING conflict disjoint-domain") != std::string::npos);
  CHECK(st->conflicts().empty());
}

TEST_CASE("soft constraints never abort") {
  TempDir dir;
  testing::write_file(dir.file("t.jsonl"), "{\"a\": 1}\n{\"a\": 2}\n");
  ConstraintStore st;
  Metadata soft;
  soft.soft = true;
  std::string id = st.register_constraint("y EXCLUDES 'bad'", soft);
  Config c;
  c.current_date = Date::parse("2025-01-01");
  c.run_dir = dir.file("runs");
  model::FakeModel m(model::parse_fake_script(R"({"rules": [{"pattern": "", "responses": ["bad"]}]})"));
  const std::string q = "FROM t |> EXTEND p'label {a}' AS y STRING |> ASSERT y EXCLUDES 'bad' RETRY 0 ABORT ON FAIL";
  auto hard = run_query(q, dir.str(), c, m, nullptr, "hard");
  CHECK(hard.status == "aborted");
  CHECK(hard.exit_code() == 2);
  auto res = run_query(q, dir.str(), c, m, &st, "soft");
  CHECK(res.status == "completed");
  REQUIRE(res.outcome.output.tuples.size() == 2);
  CHECK(res.outcome.output.tuples[0].flags == std::vector<std::string>{id});
}
