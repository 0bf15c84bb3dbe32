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

#include <string>

#include "doctest.h"
#include "sicql/checkers.hpp"
#include "sicql/error.hpp"
#include "sicql/model.hpp"
#include "sicql/parser.hpp"

using namespace sicql;
using namespace sicql::checks;
using lang::DomainSpec;
using lang::Matcher;

namespace {

DomainSpec type_domain(Type t) {
  DomainSpec d;
  d.kind = DomainSpec::Kind::kType;
  d.type = t;
  return d;
}

DomainSpec regex_domain(std::string p) {
  DomainSpec d;
  d.kind = DomainSpec::Kind::kRegex;
  d.pattern = std::move(p);
  return d;
}

model::FakeModel judge_model() {
  model::FakeModelScript s;
  model::FakeJudge j;
  j.name = "judge";
  j.cost = 0.5;
  model::JudgeRule unsupported;
  unsupported.mode = model::JudgeMode::kFactCheck;
  unsupported.pattern = "invented";
  unsupported.verdict = false;
  model::JudgeRule bad_steps;
  bad_steps.mode = model::JudgeMode::kSoundnessSteps;
  bad_steps.pattern = "therefore the moon";
  bad_steps.verdict = false;
  model::JudgeRule social;
  social.mode = model::JudgeMode::kRelevance;
  social.pattern = "smokes";
  social.verdict = false;
  j.rules = {unsupported, bad_steps, social};
  s.judges = {j};
  return model::FakeModel(s);
}

}  // namespace

TEST_CASE("domain checks are deterministic with confidence 1") {
  auto ok = check_domain(Value("1985-03-12"), regex_domain(R"(^\d{4}-\d{2}-\d{2}$)"));
  CHECK(ok.pass);
  CHECK(ok.confidence == 1.0);
  auto bad = check_domain(Value("12/03/1985"), regex_domain(R"(^\d{4}-\d{2}-\d{2}$)"));
  CHECK_FALSE(bad.pass);
  CHECK(bad.confidence == 1.0);
  CHECK_FALSE(bad.feedback.empty());

  CHECK(check_domain(Value("42"), type_domain(Type::kInt)).pass);
  CHECK_FALSE(check_domain(Value("abc"), type_domain(Type::kInt)).pass);
  CHECK(check_domain(Value::null(), type_domain(Type::kInt)).pass);
  CHECK_FALSE(check_domain(Value::null(), regex_domain("a")).pass);

  DomainSpec range;
  range.kind = DomainSpec::Kind::kRange;
  range.lo = 0;
  range.hi = 10;
  CHECK(check_domain(Value(int64_t{10}), range).pass);
  CHECK_FALSE(check_domain(Value(10.5), range).pass);
  range.hi_inclusive = false;
  CHECK_FALSE(check_domain(Value(int64_t{10}), range).pass);

  DomainSpec len;
  len.kind = DomainSpec::Kind::kMaxLength;
  len.max_length = 3;
  CHECK(check_domain(Value("ab"), len).pass);
  CHECK_FALSE(check_domain(Value("abc"), len).pass);

  DomainSpec set;
  set.kind = DomainSpec::Kind::kValueSet;
  set.values = {Value("low"), Value("high")};
  CHECK(check_domain(Value("high"), set).pass);
  CHECK_FALSE(check_domain(Value("medium"), set).pass);
}

TEST_CASE("include and exclude with deterministic matchers") {
  Matcher lit;
  lit.kind = Matcher::Kind::kLiteral;
  lit.text = "SSN";
  CHECK_FALSE(check_ie(Value("patient SSN 123"), lit, false).pass);
  CHECK(check_ie(Value("patient 123"), lit, false).pass);
  CHECK(check_ie(Value("patient SSN 123"), lit, true).pass);
  CHECK_FALSE(check_ie(Value("patient ssn 123"), lit, true).pass);

  Matcher set;
  set.kind = Matcher::Kind::kLiteralSet;
  set.items = {"MRN", "SSN"};
  CHECK_FALSE(check_ie(Value("MRN 9"), set, false).pass);
  CHECK(check_ie(Value("MRN 9"), set, true).pass);

  Matcher re;
  re.kind = Matcher::Kind::kRegex;
  re.text = R"(\d{3}-\d{2}-\d{4})";
  CHECK_FALSE(check_ie(Value("id 123-45-6789"), re, false).pass);
  CHECK(check_ie(Value("id 12-345"), re, false).pass);
}

TEST_CASE("prompt matchers need a judge") {
  Matcher m;
  m.kind = Matcher::Kind::kPrompt;
  m.prompt = lang::make_prompt("test results");
  CHECK_THROWS(check_ie(Value("x"), m, false));
  auto model = judge_model();
  JudgeRef j{&model, "judge", 1};
  auto v = check_ie(Value("pending test results from cardiology"), m, false, j);
  CHECK_FALSE(v.pass);
  CHECK(v.confidence < 1.0);
  CHECK(v.cost == 0.5);
  CHECK(check_ie(Value("history of asthma"), m, false, j).pass);
}

TEST_CASE("extractive grounding is exact containment") {
  CHECK(check_grounding_extractive("HR 112", "T 39C, HR 112, BP 90/60").pass);
  CHECK_FALSE(check_grounding_extractive("hr 112", "T 39C, HR 112").pass);
  CHECK_FALSE(check_grounding_extractive("HR  112", "T 39C, HR 112").pass);
  CHECK(check_grounding_extractive("HR  112", "T 39C, HR 112", true).pass);
  CHECK(check_grounding_extractive("", "anything").pass);
  std::vector<std::string> sources = {"alpha beta", "gamma delta"};
  CHECK(check_grounding_extractive("gamma", sources).pass);
  CHECK_FALSE(check_grounding_extractive("beta gamma", sources).pass);
}

TEST_CASE("abstractive grounding, relevance and soundness use the judge") {
  auto model = judge_model();
  JudgeRef j{&model, "judge", 1};
  CHECK(check_grounding_abstractive("a summary", "the source", j).pass);
  CHECK_FALSE(check_grounding_abstractive("an invented fact", "the source", j).pass);

  CHECK(check_relevance("extract the medical history", "ehr: ...", "asthma", j).pass);
  CHECK_FALSE(check_relevance("extract the medical history", "ehr: ...", "smokes daily", j).pass);
  CHECK_FALSE(check_relevance("extract the medical history", "ehr: ...", "", j).pass);

  model::Cot good{{"T 39C", "lactate 3"}, {"fever and lactate indicate sepsis"}, true};
  CHECK(check_soundness("T 39C, lactate 3", good, true, j).pass);
  auto mismatch = check_soundness("T 39C, lactate 3", good, false, j);
  CHECK_FALSE(mismatch.pass);
  model::Cot unsupported{{"invented lactate 9"}, {"high lactate"}, true};
  auto u = check_soundness("T 39C", unsupported, true, j);
  CHECK_FALSE(u.pass);
  CHECK(u.feedback.find("premise 1") != std::string::npos);
  model::Cot bad_steps{{"T 39C"}, {"therefore the moon is cheese"}, true};
  CHECK_FALSE(check_soundness("T 39C", bad_steps, true, j).pass);
  model::Cot empty{{}, {"x"}, true};
  CHECK_FALSE(check_soundness("T 39C", empty, true, j).pass);
}

TEST_CASE("assertions require TRUE") {
  auto e = lang::parse_expr("x > 3");
  EvalContext ctx;
  CHECK(eval_assertion(*e, {{"x", Value(int64_t{4})}}, ctx).pass);
  CHECK_FALSE(eval_assertion(*e, {{"x", Value(int64_t{2})}}, ctx).pass);
  auto n = eval_assertion(*e, {{"x", Value::null()}}, ctx);
  CHECK_FALSE(n.pass);
  CHECK(n.feedback.find("NULL") != std::string::npos);
}

TEST_CASE("excerpt shortens long text") {
  std::string s(500, 'a');
  CHECK(excerpt(s, 20).size() < 40);
  CHECK(excerpt("short") == "short");
}
